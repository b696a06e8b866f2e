#include "rcar/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace rcar {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_keys(const json& j, const std::string& path,
                  const std::set<std::string>& required,
                  const std::set<std::string>& optional = {}) {
    if (!j.is_object()) throw SchemaError(path, "expected an object");
    for (const auto& k : required)
        if (!j.contains(k)) throw SchemaError(path + "/" + k, "missing required key");
    for (const auto& [k, v] : j.items())
        if (!required.count(k) && !optional.count(k))
            throw SchemaError(path + "/" + k, "unknown key");
}

double get_number(const json& j, const std::string& path, const std::string& key) {
    const json& v = j.at(key);
    if (!v.is_number()) throw SchemaError(path + "/" + key, "expected a number");
    return v.get<double>();
}

std::string get_string(const json& j, const std::string& path, const std::string& key) {
    const json& v = j.at(key);
    if (!v.is_string()) throw SchemaError(path + "/" + key, "expected a string");
    return v.get<std::string>();
}

// +inf serialized as the string "inf" (JSON has no infinity literal)
json num_or_inf(double v) {
    if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
    if (std::isnan(v)) return json("nan");
    return json(v);
}

} // namespace

ScalarDist dist_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw SchemaError(path, "expected an object");
    if (!j.contains("kind")) throw SchemaError(path + "/kind", "missing required key");
    const std::string kind = get_string(j, path, "kind");
    try {
        if (kind == "constant") {
            require_keys(j, path, {"kind", "value"});
            return ScalarDist(Constant{get_number(j, path, "value")});
        }
        if (kind == "scaled_bernoulli") {
            require_keys(j, path, {"kind", "prob", "value"});
            return ScalarDist(ScaledBernoulli{get_number(j, path, "prob"), get_number(j, path, "value")});
        }
        if (kind == "exponential") {
            require_keys(j, path, {"kind", "rate"});
            return ScalarDist(Exponential{get_number(j, path, "rate")});
        }
        if (kind == "lognormal") {
            require_keys(j, path, {"kind", "mu", "sigma"});
            return ScalarDist(LogNormal{get_number(j, path, "mu"), get_number(j, path, "sigma")});
        }
        if (kind == "chisquare1") {
            require_keys(j, path, {"kind"});
            return ScalarDist(ChiSquare1{});
        }
        if (kind == "uniform") {
            require_keys(j, path, {"kind", "lo", "hi"});
            return ScalarDist(UniformLaw{get_number(j, path, "lo"), get_number(j, path, "hi")});
        }
    } catch (const SchemaError&) {
        throw;
    } catch (const ValidationError& e) {
        throw SchemaError(path, e.what());
    }
    throw SchemaError(path + "/kind", "unknown distribution kind '" + kind + "'");
}

json dist_to_json(const ScalarDist& d) {
    json j;
    std::visit(
        [&j](const auto& law) {
            using T = std::decay_t<decltype(law)>;
            if constexpr (std::is_same_v<T, Constant>) {
                j["kind"] = "constant";
                j["value"] = law.value;
            } else if constexpr (std::is_same_v<T, ScaledBernoulli>) {
                j["kind"] = "scaled_bernoulli";
                j["prob"] = law.prob;
                j["value"] = law.value;
            } else if constexpr (std::is_same_v<T, Exponential>) {
                j["kind"] = "exponential";
                j["rate"] = law.rate;
            } else if constexpr (std::is_same_v<T, LogNormal>) {
                j["kind"] = "lognormal";
                j["mu"] = law.mu;
                j["sigma"] = law.sigma;
            } else if constexpr (std::is_same_v<T, ChiSquare1>) {
                j["kind"] = "chisquare1";
            } else {
                j["kind"] = "uniform";
                j["lo"] = law.lo;
                j["hi"] = law.hi;
            }
        },
        d.law());
    return j;
}

ModelSpec model_from_json(const json& j) {
    require_keys(j, "", {"assumption", "coeffs", "noise"});

    const std::string a = get_string(j, "", "assumption");
    Assumption assumption;
    if (a == "A1") assumption = Assumption::A1;
    else if (a == "A2") assumption = Assumption::A2;
    else throw SchemaError("/assumption", "expected \"A1\" or \"A2\"");

    const json& jc = j.at("coeffs");
    if (!jc.is_object() || !jc.contains("kind"))
        throw SchemaError("/coeffs/kind", "missing required key");
    const std::string kind = get_string(jc, "/coeffs", "kind");
    std::optional<CoeffFamily> coeffs;
    try {
        if (kind == "finite_independent") {
            require_keys(jc, "/coeffs", {"kind", "dists"});
            if (!jc.at("dists").is_array())
                throw SchemaError("/coeffs/dists", "expected an array");
            std::vector<ScalarDist> dists;
            int i = 0;
            for (const auto& dj : jc.at("dists"))
                dists.push_back(dist_from_json(dj, "/coeffs/dists/" + std::to_string(i++)));
            coeffs.emplace(FiniteIndependent{std::move(dists)});
        } else if (kind == "finite_single_factor") {
            require_keys(jc, "/coeffs", {"kind", "weights", "factor"});
            if (!jc.at("weights").is_array())
                throw SchemaError("/coeffs/weights", "expected an array");
            std::vector<double> weights;
            for (const auto& w : jc.at("weights")) {
                if (!w.is_number()) throw SchemaError("/coeffs/weights", "expected numbers");
                weights.push_back(w.get<double>());
            }
            coeffs.emplace(FiniteSingleFactor{std::move(weights),
                                              dist_from_json(jc.at("factor"), "/coeffs/factor")});
        } else if (kind == "geometric_factor") {
            require_keys(jc, "/coeffs", {"kind", "beta", "factor"});
            coeffs.emplace(GeometricFactor{get_number(jc, "/coeffs", "beta"),
                                           dist_from_json(jc.at("factor"), "/coeffs/factor")});
        } else {
            throw SchemaError("/coeffs/kind", "unknown family kind '" + kind + "'");
        }
    } catch (const SchemaError&) {
        throw;
    } catch (const ValidationError& e) {
        throw SchemaError("/coeffs", e.what());
    }

    const json& jn = j.at("noise");
    require_keys(jn, "/noise", {"dist", "dependence"});
    const std::string dep = get_string(jn, "/noise", "dependence");
    NoiseDependence dependence;
    if (dep == "independent") dependence = NoiseDependence::IndependentOfA;
    else if (dep == "joint_row") dependence = NoiseDependence::JointRowA1;
    else throw SchemaError("/noise/dependence", "expected \"independent\" or \"joint_row\"");

    ModelSpec spec{assumption, std::move(*coeffs),
                   NoiseSpec{dist_from_json(jn.at("dist"), "/noise/dist"), dependence}};
    try {
        spec.validate();
    } catch (const ValidationError& e) {
        throw SchemaError("/noise/dependence", e.what());
    }
    return spec;
}

json model_to_json(const ModelSpec& spec) {
    json j;
    j["assumption"] = spec.assumption == Assumption::A1 ? "A1" : "A2";
    json jc;
    if (const auto* fi = std::get_if<FiniteIndependent>(&spec.coeffs.family())) {
        jc["kind"] = "finite_independent";
        json arr = json::array();
        for (const auto& d : fi->dists) arr.push_back(dist_to_json(d));
        jc["dists"] = std::move(arr);
    } else if (const auto* sf = std::get_if<FiniteSingleFactor>(&spec.coeffs.family())) {
        jc["kind"] = "finite_single_factor";
        jc["weights"] = sf->weights;
        jc["factor"] = dist_to_json(sf->factor);
    } else {
        const auto* gf = std::get_if<GeometricFactor>(&spec.coeffs.family());
        jc["kind"] = "geometric_factor";
        jc["beta"] = gf->beta;
        jc["factor"] = dist_to_json(gf->factor);
    }
    j["coeffs"] = std::move(jc);
    json jn;
    jn["dist"] = dist_to_json(spec.noise.dist);
    jn["dependence"] = spec.noise.dependence == NoiseDependence::IndependentOfA
                           ? "independent" : "joint_row";
    j["noise"] = std::move(jn);
    return j;
}

ModelSpec load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open model file: " + path);
    json j;
    try {
        j = json::parse(in); // parse errors carry the byte offset
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("/", std::string("malformed JSON at byte ") + std::to_string(e.byte) +
                                   ": " + e.what());
    }
    return model_from_json(j);
}

json report_to_json(const CriterionReport& rep) {
    json j;
    j["verdict"] = to_string(rep.verdict);
    json just = json::array();
    for (Clause c : rep.justification) just.push_back(to_string(c));
    j["justification"] = std::move(just);
    j["theta"] = rep.theta;
    j["boundary"] = rep.boundary;
    json vals;
    for (const auto& [k, v] : rep.values) vals[k] = num_or_inf(v);
    j["values"] = std::move(vals);
    return j;
}

std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "# schema: rcar.sweep.v1\n";
    os << "theta,beta_phi1,beta_phi1_tilde,beta_phi2,beta_phi2_tilde,beta_exact,flags\n";
    auto cell = [](const std::optional<double>& v) {
        return v ? format_number(*v) : std::string();
    };
    for (const auto& r : rows) {
        os << format_number(r.theta) << ',' << cell(r.beta_phi1) << ',' << cell(r.beta_phi1_tilde)
           << ',' << cell(r.beta_phi2) << ',' << cell(r.beta_phi2_tilde) << ','
           << cell(r.beta_exact) << ',' << r.flags << '\n';
    }
    return os.str();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::optional<double> parse_opt(const std::string& s) {
    if (s.empty()) return std::nullopt;
    if (s == "inf") return kInf;
    return std::stod(s);
}

} // namespace

std::vector<SweepRow> sweep_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<SweepRow> rows;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line.rfind("theta,", 0) != 0)
                throw ValidationError("sweep csv: missing header");
            header_seen = true;
            continue;
        }
        const auto cells = split_csv_line(line);
        if (cells.size() != 7) throw ValidationError("sweep csv: expected 7 columns");
        SweepRow r;
        r.theta = std::stod(cells[0]);
        r.beta_phi1 = parse_opt(cells[1]);
        r.beta_phi1_tilde = parse_opt(cells[2]);
        r.beta_phi2 = parse_opt(cells[3]);
        r.beta_phi2_tilde = parse_opt(cells[4]);
        r.beta_exact = parse_opt(cells[5]);
        r.flags = cells[6];
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string garch_to_csv(const std::vector<GarchPoint>& points) {
    std::ostringstream os;
    os << "# schema: rcar.garch.v1\n";
    os << "alpha1,beta1,phi1_ok,phi2_ok\n";
    for (const auto& p : points)
        os << format_number(p.alpha1) << ',' << format_number(p.beta1) << ','
           << (p.phi1_ok ? 1 : 0) << ',' << (p.phi2_ok ? 1 : 0) << '\n';
    return os.str();
}

std::vector<GarchPoint> garch_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<GarchPoint> points;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line.rfind("alpha1,", 0) != 0)
                throw ValidationError("garch csv: missing header");
            header_seen = true;
            continue;
        }
        const auto cells = split_csv_line(line);
        if (cells.size() != 4) throw ValidationError("garch csv: expected 4 columns");
        GarchPoint p;
        p.alpha1 = std::stod(cells[0]);
        p.beta1 = std::stod(cells[1]);
        p.phi1_ok = cells[2] == "1";
        p.phi2_ok = cells[3] == "1";
        points.push_back(p);
    }
    return points;
}

json sim_report_to_json(const SimReport& report, const SimConfig& config) {
    json j;
    j["schema"] = "rcar.simulate.v1";
    j["seed"] = config.seed;
    j["horizon"] = config.horizon;
    j["replicas"] = config.replicas;
    j["burn_in"] = config.burn_in;
    j["mode"] = config.mode == SimMode::ReplicaEnsemble ? "replica_ensemble" : "time_average";
    json moments = json::array();
    for (const auto& m : report.moments) {
        json mj;
        mj["theta"] = m.theta;
        mj["estimate"] = num_or_inf(m.estimate);
        mj["std_error"] = num_or_inf(m.std_error);
        mj["replicas"] = m.replicas;
        mj["low_confidence"] = m.low_confidence;
        mj["divergence_suspected"] = m.divergence_suspected;
        json cps = json::array();
        for (double c : m.checkpoint_estimates) cps.push_back(num_or_inf(c));
        mj["checkpoint_estimates"] = std::move(cps);
        moments.push_back(std::move(mj));
    }
    j["moments"] = std::move(moments);
    if (report.tail_index) {
        json tj;
        tj["alpha"] = report.tail_index->alpha;
        tj["k_used"] = report.tail_index->k_used;
        tj["samples"] = report.tail_index->samples;
        j["tail_index"] = std::move(tj);
    }
    return j;
}

} // namespace rcar
