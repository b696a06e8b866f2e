#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "rcar/io.hpp"

using namespace rcar;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

#ifdef RCAR_CLI_PATH
int run_cli(const std::string& args, const std::string& stdout_path) {
    const std::string cmd = std::string(RCAR_CLI_PATH) + " " + args + " > " + stdout_path + " 2>/dev/null";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}
#endif

const char* kModelText = R"({
  "assumption": "A1",
  "coeffs": {
    "kind": "finite_independent",
    "dists": [
      {"kind": "scaled_bernoulli", "prob": 0.45, "value": 0.6666666666666666},
      {"kind": "scaled_bernoulli", "prob": 0.45, "value": 0.6666666666666666}
    ]
  },
  "noise": {"dist": {"kind": "constant", "value": 1.0}, "dependence": "independent"}
})";

} // namespace

TEST_CASE("model JSON round trip") {
    const ModelSpec specs[] = {
        model_from_json(json::parse(kModelText)),
        ModelSpec{Assumption::A2,
                  CoeffFamily(GeometricFactor{0.4, ScalarDist(ChiSquare1{})}),
                  NoiseSpec{ScalarDist(Exponential{2.0}), NoiseDependence::IndependentOfA}},
        ModelSpec{Assumption::A1,
                  CoeffFamily(FiniteSingleFactor{{0.3, 0.2}, ScalarDist(LogNormal{0.1, 0.5})}),
                  NoiseSpec{ScalarDist(UniformLaw{0.0, 2.0}), NoiseDependence::JointRowA1}},
    };
    for (const auto& spec : specs) {
        const json j = model_to_json(spec);
        const ModelSpec back = model_from_json(j);
        CHECK(model_to_json(back) == j); // serialize-parse-serialize fixed point
    }
}

TEST_CASE("schema errors carry a path") {
    SUBCASE("unknown distribution kind") {
        json j = json::parse(R"({"kind": "zeta", "s": 2})");
        CHECK_THROWS_WITH_AS(dist_from_json(j, "/x"), doctest::Contains("/x/kind"), SchemaError);
    }
    SUBCASE("unknown key is rejected") {
        json j = json::parse(R"({"kind": "constant", "value": 1.0, "extra": 3})");
        CHECK_THROWS_WITH_AS(dist_from_json(j, "/d"), doctest::Contains("/d/extra"), SchemaError);
    }
    SUBCASE("missing key") {
        json j = json::parse(R"({"kind": "exponential"})");
        CHECK_THROWS_AS(dist_from_json(j), SchemaError);
    }
    SUBCASE("A2 with joint-row noise") {
        json j = json::parse(kModelText);
        j["assumption"] = "A2";
        j["noise"]["dependence"] = "joint_row";
        CHECK_THROWS_AS(model_from_json(j), SchemaError);
    }
    SUBCASE("invalid parameter is reported with the coeffs path") {
        json j = json::parse(kModelText);
        j["coeffs"]["dists"][0]["prob"] = 1.5;
        CHECK_THROWS_WITH_AS(model_from_json(j), doctest::Contains("/coeffs/dists/0"),
                             SchemaError);
    }
}

TEST_CASE("malformed JSON cites the byte offset") {
    const std::string path = "/tmp/rcar_bad_model.json";
    spit(path, "{\"assumption\": \"A1\", ");
    try {
        load_model_file(path);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("byte") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("number formatting uses 12 significant digits") {
    CHECK(format_number(1.0 / 3.0) == "0.333333333333");
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(2.0) == "2");
    CHECK(format_number(1.0 / 0.0) == "inf");
}

TEST_CASE("sweep CSV round trip") {
    std::vector<SweepRow> rows(2);
    rows[0].theta = 1.0;
    rows[0].beta_phi1 = 0.5;
    rows[0].beta_phi1_tilde = 0.5;
    rows[0].beta_phi2 = 0.445041867912;
    rows[0].beta_phi2_tilde = 0.408248290464;
    rows[0].beta_exact = 0.5;
    rows[1].theta = 2.0;
    rows[1].flags = "phi2:truncation";
    const std::string csv = sweep_to_csv(rows);
    CHECK(csv.find("# schema: rcar.sweep.v1\n") == 0);
    CHECK(csv.find("theta,beta_phi1,beta_phi1_tilde,beta_phi2,beta_phi2_tilde,beta_exact,flags\n")
          != std::string::npos);
    const auto back = sweep_from_csv(csv);
    REQUIRE(back.size() == 2);
    CHECK(*back[0].beta_phi2 == doctest::Approx(0.445041867912).epsilon(1e-12));
    CHECK_FALSE(back[1].beta_phi1.has_value());
    CHECK(back[1].flags == "phi2:truncation");
}

TEST_CASE("garch CSV round trip") {
    std::vector<GarchPoint> pts(1);
    pts[0].alpha1 = 0.5;
    pts[0].beta1 = 0.2;
    pts[0].phi1_ok = false;
    pts[0].phi2_ok = true;
    const std::string csv = garch_to_csv(pts);
    CHECK(csv.find("alpha1,beta1,phi1_ok,phi2_ok\n") != std::string::npos);
    const auto back = garch_from_csv(csv);
    REQUIRE(back.size() == 1);
    CHECK(back[0].phi2_ok);
    CHECK_FALSE(back[0].phi1_ok);
}

#ifdef RCAR_CLI_PATH
TEST_CASE("command line round trips") {
    const std::string model = "/tmp/rcar_cli_model.json";
    spit(model, kModelText);

    SUBCASE("analyze emits parseable JSON and exit 0") {
        const int rc = run_cli("analyze " + model + " --theta 2", "/tmp/rcar_out1.json");
        CHECK(rc == 0);
        const json j = json::parse(slurp("/tmp/rcar_out1.json"));
        CHECK(j.at("schema") == "rcar.analyze.v1");
        CHECK(j.at("results").at(0).at("combined").at("verdict") == "finite");
    }
    SUBCASE("validation failures exit 2") {
        spit("/tmp/rcar_bad.json", "{\"assumption\": \"A3\"}");
        CHECK(run_cli("analyze /tmp/rcar_bad.json", "/tmp/rcar_out2.json") == 2);
        spit("/tmp/rcar_bad2.json", "not json at all");
        CHECK(run_cli("analyze /tmp/rcar_bad2.json", "/tmp/rcar_out3.json") == 2);
        CHECK(run_cli("analyze /tmp/rcar_missing_file.json", "/tmp/rcar_out4.json") == 2);
    }
    SUBCASE("simulate is byte-identical for a fixed seed") {
        const std::string flags = "simulate " + model + " --theta 2 --reps 200 --horizon 50 --seed 9";
        CHECK(run_cli(flags, "/tmp/rcar_sim1.json") == 0);
        CHECK(run_cli(flags, "/tmp/rcar_sim2.json") == 0);
        CHECK(slurp("/tmp/rcar_sim1.json") == slurp("/tmp/rcar_sim2.json"));
        CHECK_FALSE(slurp("/tmp/rcar_sim1.json").empty());
    }
    SUBCASE("verify passes on the order-2 example") {
        CHECK(run_cli("verify " + model + " --m-max 16", "/tmp/rcar_ver.json") == 0);
        const json j = json::parse(slurp("/tmp/rcar_ver.json"));
        CHECK(j.at("pass") == true);
    }
    SUBCASE("sweep emits the pinned CSV header") {
        CHECK(run_cli("sweep --thetas 1.0:1.0:1.0", "/tmp/rcar_sweep.csv") == 0);
        const auto rows = sweep_from_csv(slurp("/tmp/rcar_sweep.csv"));
        REQUIRE(rows.size() == 1);
        CHECK(std::abs(*rows[0].beta_phi1 - 0.5) <= 1e-8); // chi-square default factor
    }
    std::remove(model.c_str());
}
#endif
