#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "rcar/first_moment.hpp"
#include "rcar/model.hpp"
#include "rcar/simulate.hpp"
#include "rcar/solve.hpp"

namespace rcar {

using json = nlohmann::ordered_json;

/// Schema error with a JSON-pointer-style path to the offending field.
class SchemaError : public ValidationError {
public:
    SchemaError(std::string path, const std::string& message)
        : ValidationError(path + ": " + message), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

// Model file schema:
//   { "assumption": "A1"|"A2",
//     "coeffs": { "kind": "finite_independent", "dists": [DIST...] }
//            | { "kind": "finite_single_factor", "weights": [w...], "factor": DIST }
//            | { "kind": "geometric_factor", "beta": b, "factor": DIST },
//     "noise": { "dist": DIST, "dependence": "independent"|"joint_row" } }
// with DIST one of
//   {"kind":"constant","value":c}, {"kind":"scaled_bernoulli","prob":q,"value":c},
//   {"kind":"exponential","rate":l}, {"kind":"lognormal","mu":m,"sigma":s},
//   {"kind":"chisquare1"}, {"kind":"uniform","lo":a,"hi":b}.
// Unknown keys are rejected with their path.

ScalarDist dist_from_json(const json& j, const std::string& path = "/dist");
json dist_to_json(const ScalarDist& d);

ModelSpec model_from_json(const json& j);
json model_to_json(const ModelSpec& spec);

ModelSpec load_model_file(const std::string& path);

json report_to_json(const CriterionReport& rep);

/// 12-significant-digit numeric formatting shared by all CSV output.
std::string format_number(double v);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> sweep_from_csv(const std::string& text);

std::string garch_to_csv(const std::vector<GarchPoint>& points);
std::vector<GarchPoint> garch_from_csv(const std::string& text);

json sim_report_to_json(const SimReport& report, const SimConfig& config);

} // namespace rcar
