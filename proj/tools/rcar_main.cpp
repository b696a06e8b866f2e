// rcar: moment criteria, exact second moments, Monte Carlo validation and
// figure data for random coefficient autoregressions with non-negative
// coefficients. Subcommands: analyze, sweep, simulate, verify, fig.
//
// Exit codes: 0 ok, 1 verification failure, 2 input error, 3 internal
// inconsistency.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>

#include "rcar/io.hpp"
#include "rcar/spectral.hpp"

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

rcar::json num_or_inf(double v) {
    if (std::isinf(v)) return v > 0 ? rcar::json("inf") : rcar::json("-inf");
    if (std::isnan(v)) return rcar::json("nan");
    return rcar::json(v);
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw rcar::ValidationError("cannot open output file: " + out_path);
    out << text;
}

std::vector<double> parse_theta_grid(const std::string& text) {
    std::vector<double> grid;
    if (text.find(':') != std::string::npos) {
        double lo = 0, hi = 0, step = 0;
        if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 || step <= 0)
            throw rcar::ValidationError("--thetas: expected lo:hi:step");
        for (double t = lo; t <= hi + 1e-12; t += step) grid.push_back(t);
        return grid;
    }
    std::istringstream in(text);
    std::string cell;
    while (std::getline(in, cell, ',')) grid.push_back(std::stod(cell));
    if (grid.empty()) throw rcar::ValidationError("--thetas: empty grid");
    return grid;
}

int cmd_analyze(const std::string& model_path, const std::vector<double>& thetas,
                const std::string& out_path, const rcar::DpControls& dp) {
    const rcar::ModelSpec spec = rcar::load_model_file(model_path);
    const rcar::MomentOracle oracle = rcar::build_oracle(spec);

    rcar::json j;
    j["schema"] = "rcar.analyze.v1";
    j["model"] = rcar::model_to_json(spec);
    if (const auto p = oracle.order()) j["order"] = *p;
    else j["order"] = "infinite";
    j["mean_exact"] = num_or_inf(rcar::mean_exact(oracle));

    rcar::json results = rcar::json::array();
    for (double theta : thetas) {
        rcar::json rj;
        rj["theta"] = theta;
        rj["theorem1"] = rcar::report_to_json(rcar::theorem1_verdict(oracle, theta));
        rj["theorem2"] = rcar::report_to_json(
            rcar::theorem2_verdict(oracle, theta, spec.assumption, dp));
        if (oracle.order() && theta == 2.0)
            rj["nq"] = rcar::report_to_json(rcar::nq_criterion(oracle));
        rj["combined"] = rcar::report_to_json(
            rcar::combined_verdict(oracle, theta, spec.assumption, dp));
        if (theta == 2.0 && oracle.noise_independent() && oracle.order()) {
            rcar::SecondMomentControls smc;
            smc.dp = dp;
            const rcar::SecondMomentResult sm =
                rcar::second_moment_exact(oracle, spec.assumption, smc);
            rcar::json smj;
            smj["value"] = num_or_inf(sm.value);
            smj["exact"] = sm.exact;
            smj["lower"] = num_or_inf(sm.lower);
            smj["upper"] = num_or_inf(sm.upper);
            smj["s_closed"] = num_or_inf(sm.closed.value);
            smj["s_open_partial"] = num_or_inf(sm.open.partial);
            smj["s_open_tail_estimate"] = num_or_inf(sm.open.tail_estimate);
            rj["second_moment"] = std::move(smj);
        }
        results.push_back(std::move(rj));
    }
    j["results"] = std::move(results);

    if (oracle.order() && *oracle.order() <= rcar::kMaxSpectralOrder) {
        const rcar::JensenCheck jc = rcar::jensen_lemma_check(oracle);
        rcar::json sj;
        sj["companion_radius"] = jc.companion_radius;
        sj["kron_radius"] = jc.kron_radius;
        sj["jensen_holds"] = jc.holds;
        if (spec.assumption == rcar::Assumption::A1 && oracle.noise_independent())
            sj["kron_second_moment_unit_noise"] = num_or_inf(rcar::kron_second_moment(oracle));
        j["spectral"] = std::move(sj);
    }

    emit(j.dump(2) + "\n", out_path);
    return 0;
}

int cmd_sweep(const std::string& z_json, const std::string& theta_text,
              double bisect_tol, const std::string& out_path) {
    const rcar::ScalarDist z = z_json.empty()
        ? rcar::ScalarDist(rcar::ChiSquare1{})
        : rcar::dist_from_json(rcar::json::parse(z_json), "/z");
    const std::vector<double> grid = theta_text.empty()
        ? rcar::default_theta_grid() : parse_theta_grid(theta_text);
    const auto rows = rcar::theta_sweep(grid, z, bisect_tol);
    emit(rcar::sweep_to_csv(rows), out_path);
    return 0;
}

int cmd_fig(const std::string& which, const std::string& out_path) {
    if (which == "phis") {
        const auto rows = rcar::theta_sweep(rcar::default_theta_grid(),
                                            rcar::ScalarDist(rcar::ChiSquare1{}));
        emit(rcar::sweep_to_csv(rows), out_path);
        return 0;
    }
    if (which == "garch") {
        emit(rcar::garch_to_csv(rcar::garch_region_scan(0.01)), out_path);
        return 0;
    }
    throw rcar::ValidationError("fig: expected 'phis' or 'garch'");
}

int cmd_simulate(const std::string& model_path, const rcar::SimConfig& config,
                 double tail_fraction, const std::string& out_path) {
    const rcar::ModelSpec spec = rcar::load_model_file(model_path);
    rcar::SimReport report = rcar::run_simulation(spec, config);
    if (tail_fraction > 0.0) {
        // tail index from the final-value ensemble
        std::vector<double> finals;
        finals.reserve(static_cast<std::size_t>(config.replicas));
        for (long r = 0; r < config.replicas; ++r) {
            rcar::RandomStream stream(config.seed, static_cast<std::uint64_t>(r));
            finals.push_back(rcar::simulate_path(spec, config.horizon, stream).back());
        }
        report.tail_index = rcar::hill_tail_index(std::move(finals), tail_fraction);
    }
    emit(rcar::sim_report_to_json(report, config).dump(2) + "\n", out_path);
    return 0;
}

int cmd_verify(const std::string& model_path, double theta, int m_max,
               const std::string& out_path, const rcar::DpControls& dp) {
    const rcar::ModelSpec spec = rcar::load_model_file(model_path);
    const rcar::MomentOracle oracle = rcar::build_oracle(spec);
    const bool finite = oracle.order().has_value();

    rcar::json checks = rcar::json::array();
    bool all_pass = true;
    auto push = [&](const std::string& name, bool pass, double gap, const std::string& detail) {
        rcar::json c;
        c["name"] = name;
        c["pass"] = pass;
        c["gap"] = num_or_inf(gap);
        c["detail"] = detail;
        checks.push_back(std::move(c));
        all_pass = all_pass && pass;
    };

    // truncation for the brute-force comparisons
    const int trunc = finite ? *oracle.order() : std::max(m_max, 2);
    const rcar::PairWeights w = rcar::weights_for(oracle, theta, rcar::PairTransform::Phi2, trunc);

    // 1. DP vs brute force
    {
        const rcar::SumResult dp_res = rcar::closed_pair_sum_dp(w, dp);
        const rcar::SumResult bf = rcar::closed_pair_sum_bruteforce(w, spec.assumption, m_max);
        if (std::isinf(dp_res.value)) {
            push("dp_vs_bruteforce", true, kInf,
                 "DP divergent; brute-force partial " + rcar::format_number(bf.value));
        } else {
            const double gap = dp_res.value - bf.value;
            const bool pass = gap >= -1e-9 * std::max(1.0, dp_res.value) &&
                              gap <= 10.0 * bf.tail_estimate + 1e-9 * std::max(1.0, dp_res.value);
            push("dp_vs_bruteforce", pass, gap,
                 "dp=" + rcar::format_number(dp_res.value) + " bf=" + rcar::format_number(bf.value));
        }
    }

    // 2. A1/A2 factorization equality per endpoint
    {
        const auto a1 = rcar::closed_pair_sums_by_endpoint(w, rcar::Assumption::A1, m_max);
        const auto a2 = rcar::closed_pair_sums_by_endpoint(w, rcar::Assumption::A2, m_max);
        double worst = 0.0;
        for (std::size_t m = 1; m < a1.size(); ++m)
            worst = std::max(worst, std::abs(a1[m] - a2[m]) / std::max(1.0, std::abs(a1[m])));
        push("a1_a2_factorization", worst <= 1e-12, worst,
             "max relative per-endpoint gap over m <= " + std::to_string(m_max));
    }

    if (finite && *oracle.order() <= rcar::kMaxSpectralOrder) {
        // 3. comparison-theorem sign agreement
        {
            const rcar::SumResult sc = rcar::closed_pair_sum(oracle, 2.0, rcar::PairTransform::Phi2, dp);
            const double msum = oracle.sum_marginal(1.0);
            const double rho = rcar::spectral_radius(rcar::expected_kron(oracle));
            if (std::abs(rho - 1.0) < 1e-6 || (!std::isinf(sc.value) && std::abs(sc.value - 1.0) < 1e-6)) {
                push("theorem3_sign_agreement", true, 0.0, "skipped: boundary band");
            } else {
                const bool lhs = sc.value < 1.0 && msum < 1.0;
                const bool rhs = rho < 1.0;
                push("theorem3_sign_agreement", lhs == rhs, std::abs(rho - 1.0),
                     std::string("s_closed=") + rcar::format_number(sc.value) +
                         " sum_means=" + rcar::format_number(msum) +
                         " rho=" + rcar::format_number(rho));
            }
        }

        // 4. Kronecker second moment vs pair-sum second moment (unit noise)
        if (oracle.noise_independent()) {
            rcar::ModelSpec unit = spec;
            unit.noise.dist = rcar::ScalarDist(rcar::Constant{1.0});
            const rcar::MomentOracle uo = rcar::build_oracle(unit);
            const double kron = rcar::kron_second_moment(uo);
            rcar::SecondMomentControls smc;
            smc.dp = dp;
            const rcar::SecondMomentResult sm =
                rcar::second_moment_exact(uo, rcar::Assumption::A1, smc);
            bool pass;
            double gap;
            if (std::isinf(kron) || std::isinf(sm.value)) {
                pass = std::isinf(kron) && std::isinf(sm.value);
                gap = kInf;
            } else {
                gap = std::abs(kron - sm.value) / std::max(1.0, kron);
                pass = gap <= 1e-6;
            }
            push("kron_vs_pair_sum_second_moment", pass, gap,
                 "kron=" + rcar::format_number(kron) + " pair=" + rcar::format_number(sm.value));
        } else {
            push("kron_vs_pair_sum_second_moment", true, 0.0, "skipped: joint-row noise");
        }

        // 5. Jensen lemma
        {
            const rcar::JensenCheck jc = rcar::jensen_lemma_check(oracle);
            push("jensen_lemma", jc.holds, jc.companion_radius - std::sqrt(jc.kron_radius),
                 "rho(E[A])=" + rcar::format_number(jc.companion_radius) +
                     " sqrt(rho(E[AxA]))=" + rcar::format_number(std::sqrt(jc.kron_radius)));
        }
    } else {
        push("theorem3_sign_agreement", true, 0.0, "skipped: infinite order (truncated checks only)");
    }

    rcar::json j;
    j["schema"] = "rcar.verify.v1";
    j["theta"] = theta;
    j["m_max"] = m_max;
    j["checks"] = std::move(checks);
    j["pass"] = all_pass;
    emit(j.dump(2) + "\n", out_path);
    return all_pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"moment criteria for random coefficient autoregressions"};
    app.require_subcommand(1);

    std::string model_path, out_path, z_json, theta_text, fig_which;
    std::vector<double> thetas{1.0, 2.0};
    rcar::DpControls dp;
    rcar::SimConfig sim;
    std::string mode_text = "ensemble";
    double tail_fraction = 0.0;
    double verify_theta = 2.0;
    int verify_m_max = 14;

    auto* analyze = app.add_subcommand("analyze", "criterion reports for a model file (JSON)");
    analyze->add_option("model", model_path, "model JSON file")->required();
    analyze->add_option("--theta", thetas, "moment orders to analyze");
    analyze->add_option("--out", out_path, "write to a file instead of stdout");
    analyze->add_option("--trunc-cap", dp.truncation_cap, "geometric truncation cap");
    analyze->add_option("--dp-tol", dp.rel_tol, "DP fixed-point tolerance");

    double bisect_tol = 1e-10;
    auto* sweep = app.add_subcommand("sweep", "critical-beta sweep (CSV)");
    sweep->add_option("--z", z_json, "factor law as inline JSON (default chisquare1)");
    sweep->add_option("--thetas", theta_text, "grid: lo:hi:step or comma list");
    sweep->add_option("--bisect-tol", bisect_tol, "bracket tolerance for critical betas");
    sweep->add_option("--out", out_path, "write to a file instead of stdout");

    auto* fig = app.add_subcommand("fig", "figure data: phis | garch (CSV)");
    fig->add_option("which", fig_which, "phis or garch")->required();
    fig->add_option("--out", out_path, "write to a file instead of stdout");

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo moment estimates (JSON)");
    simulate->add_option("model", model_path, "model JSON file")->required();
    simulate->add_option("--theta", sim.thetas, "moment orders to estimate");
    simulate->add_option("--horizon", sim.horizon, "steps per path");
    simulate->add_option("--reps", sim.replicas, "replica count");
    simulate->add_option("--burn-in", sim.burn_in, "burn-in for time averages");
    simulate->add_option("--seed", sim.seed, "RNG seed");
    simulate->add_option("--threads", sim.threads, "worker threads (replica-level)");
    simulate->add_option("--mode", mode_text, "ensemble | time_average");
    simulate->add_option("--tail-fraction", tail_fraction,
                         "Hill tail-index fraction (0 disables)");
    simulate->add_option("--out", out_path, "write to a file instead of stdout");

    auto* verify = app.add_subcommand("verify", "cross-oracle checks for a model (JSON)");
    verify->add_option("model", model_path, "model JSON file")->required();
    verify->add_option("--theta", verify_theta, "theta for the pair-sum checks");
    verify->add_option("--m-max", verify_m_max, "brute-force endpoint bound");
    verify->add_option("--out", out_path, "write to a file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (analyze->parsed()) return cmd_analyze(model_path, thetas, out_path, dp);
        if (sweep->parsed()) return cmd_sweep(z_json, theta_text, bisect_tol, out_path);
        if (fig->parsed()) return cmd_fig(fig_which, out_path);
        if (simulate->parsed()) {
            if (mode_text == "ensemble") sim.mode = rcar::SimMode::ReplicaEnsemble;
            else if (mode_text == "time_average") sim.mode = rcar::SimMode::TimeAverage;
            else throw rcar::ValidationError("--mode: expected ensemble or time_average");
            return cmd_simulate(model_path, sim, tail_fraction, out_path);
        }
        if (verify->parsed()) return cmd_verify(model_path, verify_theta, verify_m_max, out_path, dp);
    } catch (const rcar::InternalInconsistency& e) {
        std::cerr << "internal inconsistency: " << e.what() << "\n";
        return 3;
    } catch (const rcar::ValidationError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const rcar::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
