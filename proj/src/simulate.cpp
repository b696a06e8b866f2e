#include "rcar/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

namespace rcar {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void SimConfig::validate() const {
    if (horizon < 1) throw ValidationError("sim: horizon must be >= 1");
    if (replicas < 1) throw ValidationError("sim: replicas must be >= 1");
    if (burn_in < 0 || burn_in >= horizon)
        throw ValidationError("sim: burn_in must lie in [0, horizon)");
    if (thetas.empty()) throw ValidationError("sim: need at least one theta");
    for (double th : thetas)
        if (!(th > 0.0)) throw ValidationError("sim: thetas must be > 0");
    if (threads < 1) throw ValidationError("sim: threads must be >= 1");
}

std::vector<double> simulate_path(const ModelSpec& spec, long horizon, RandomStream& stream,
                                  std::vector<std::vector<double>>* row_trace) {
    spec.validate();
    if (std::holds_alternative<GeometricFactor>(spec.coeffs.family())) {
        if (row_trace)
            throw ValidationError("simulate_path: row tracing is a finite-order facility");
        return simulate_geometric(spec, horizon, stream).recursion;
    }

    const int p = *spec.coeffs.order();
    const auto* indep = std::get_if<FiniteIndependent>(&spec.coeffs.family());
    const auto* single = std::get_if<FiniteSingleFactor>(&spec.coeffs.family());

    auto draw_row = [&](std::vector<double>& row) {
        row.resize(static_cast<std::size_t>(p));
        if (indep) {
            for (int j = 0; j < p; ++j) row[static_cast<std::size_t>(j)] = sample(indep->dists[static_cast<std::size_t>(j)], stream);
        } else {
            const double z = sample(single->factor, stream);
            for (int j = 0; j < p; ++j) row[static_cast<std::size_t>(j)] = single->weights[static_cast<std::size_t>(j)] * z;
        }
    };

    std::vector<double> x(static_cast<std::size_t>(horizon) + 1, 0.0);
    const bool diagonal = spec.assumption == Assumption::A2;
    // under diagonal sharing, ring[u % p] is the row drawn with index u
    std::vector<std::vector<double>> ring(diagonal ? static_cast<std::size_t>(p) : 0);
    std::vector<double> row;

    for (long t = 0; t <= horizon; ++t) {
        if (t >= 1) {
            if (diagonal) {
                draw_row(ring[static_cast<std::size_t>((t - 1) % p)]);
            } else {
                draw_row(row);
            }
        }
        const double b = sample(spec.noise.dist, stream);
        double acc = b;
        const int lags = static_cast<int>(std::min<long>(t, p));
        for (int j = 1; j <= lags; ++j) {
            const double a = diagonal ? ring[static_cast<std::size_t>((t - j) % p)][static_cast<std::size_t>(j - 1)]
                                      : row[static_cast<std::size_t>(j - 1)];
            if (a == 0.0) continue; // a zero coefficient kills the term, even against +inf
            const double lag = x[static_cast<std::size_t>(t - j)];
            acc += std::isinf(lag) ? kInf : a * lag;
        }
        x[static_cast<std::size_t>(t)] = acc;
        if (row_trace) {
            std::vector<double> effective(static_cast<std::size_t>(p), 0.0);
            for (int j = 1; j <= lags; ++j)
                effective[static_cast<std::size_t>(j - 1)] =
                    diagonal ? ring[static_cast<std::size_t>((t - j) % p)][static_cast<std::size_t>(j - 1)]
                             : row[static_cast<std::size_t>(j - 1)];
            row_trace->push_back(std::move(effective));
        }
    }
    return x;
}

GeometricPaths simulate_geometric(const ModelSpec& spec, long horizon, RandomStream& stream) {
    spec.validate();
    const auto* geo = std::get_if<GeometricFactor>(&spec.coeffs.family());
    if (!geo) throw ValidationError("simulate_geometric: geometric family required");
    const double beta = geo->beta;

    GeometricPaths out;
    out.recursion.resize(static_cast<std::size_t>(horizon) + 1);
    out.markov.resize(static_cast<std::size_t>(horizon) + 1);

    const double b0 = sample(spec.noise.dist, stream);
    out.recursion[0] = b0;
    out.markov[0] = b0;
    double running = 0.0; // S_t

    for (long t = 1; t <= horizon; ++t) {
        const double z = sample(geo->factor, stream);
        const double b = sample(spec.noise.dist, stream);
        const double prev = out.recursion[static_cast<std::size_t>(t - 1)];
        double term = 0.0;
        if (z > 0.0) term = std::isinf(prev) ? kInf : beta * z * prev;
        running = beta * running + term;
        out.recursion[static_cast<std::size_t>(t)] = b + running;

        const double mprev = out.markov[static_cast<std::size_t>(t - 1)];
        out.markov[static_cast<std::size_t>(t)] =
            std::isinf(mprev) ? kInf : 1.0 + beta * (1.0 + z) * mprev;
    }
    return out;
}

MomentEstimate estimate_moment(std::span<const double> samples, double theta) {
    if (!(theta > 0.0)) throw ValidationError("estimate_moment: theta must be > 0");
    if (samples.empty()) throw ValidationError("estimate_moment: no samples");
    MomentEstimate e;
    e.theta = theta;
    e.replicas = static_cast<long>(samples.size());

    double sum = 0.0;
    for (double x : samples) sum += std::pow(x, theta);
    const double n = static_cast<double>(samples.size());
    e.estimate = sum / n;

    if (samples.size() < 10) {
        e.low_confidence = true;
        return e;
    }
    if (!std::isfinite(e.estimate)) {
        e.std_error = kInf;
        e.divergence_suspected = true;
        return e;
    }
    // jackknife over leave-one-out means
    double ss = 0.0;
    for (double x : samples) {
        const double loo = (sum - std::pow(x, theta)) / (n - 1.0);
        ss += (loo - e.estimate) * (loo - e.estimate);
    }
    e.std_error = std::sqrt((n - 1.0) / n * ss);
    return e;
}

SimReport run_simulation(const ModelSpec& spec, const SimConfig& config) {
    spec.validate();
    config.validate();
    const long r_total = config.replicas;
    const long t1 = std::max<long>(1, config.horizon / 4);
    const long t2 = std::max<long>(1, config.horizon / 2);

    // per-replica storage, indexed by replica for order-fixed reduction
    std::vector<double> x_final(static_cast<std::size_t>(r_total));
    std::vector<double> x_cp1(static_cast<std::size_t>(r_total));
    std::vector<double> x_cp2(static_cast<std::size_t>(r_total));
    const std::size_t n_theta = config.thetas.size();
    std::vector<std::vector<double>> time_avg; // [theta][replica]
    if (config.mode == SimMode::TimeAverage)
        time_avg.assign(n_theta, std::vector<double>(static_cast<std::size_t>(r_total), 0.0));

    auto worker = [&](long lo, long hi) {
        for (long r = lo; r < hi; ++r) {
            RandomStream stream(config.seed, static_cast<std::uint64_t>(r));
            const std::vector<double> path = simulate_path(spec, config.horizon, stream);
            x_final[static_cast<std::size_t>(r)] = path.back();
            x_cp1[static_cast<std::size_t>(r)] = path[static_cast<std::size_t>(t1)];
            x_cp2[static_cast<std::size_t>(r)] = path[static_cast<std::size_t>(t2)];
            if (config.mode == SimMode::TimeAverage) {
                for (std::size_t k = 0; k < n_theta; ++k) {
                    double acc = 0.0;
                    for (long t = config.burn_in + 1; t <= config.horizon; ++t)
                        acc += std::pow(path[static_cast<std::size_t>(t)], config.thetas[k]);
                    time_avg[k][static_cast<std::size_t>(r)] =
                        acc / static_cast<double>(config.horizon - config.burn_in);
                }
            }
        }
    };

    if (config.threads <= 1 || r_total < 2 * config.threads) {
        worker(0, r_total);
    } else {
        std::vector<std::thread> pool;
        const long chunk = (r_total + config.threads - 1) / config.threads;
        for (int i = 0; i < config.threads; ++i) {
            const long lo = i * chunk;
            const long hi = std::min(r_total, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(worker, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    SimReport report;
    for (std::size_t k = 0; k < n_theta; ++k) {
        const double theta = config.thetas[k];
        MomentEstimate e;
        if (config.mode == SimMode::ReplicaEnsemble) {
            e = estimate_moment(x_final, theta);
        } else {
            e = estimate_moment(time_avg[k], 1.0); // samples are already theta-powered
            e.theta = theta;
        }
        MomentEstimate c1 = estimate_moment(x_cp1, theta);
        MomentEstimate c2 = estimate_moment(x_cp2, theta);
        e.checkpoint_estimates = {c1.estimate, c2.estimate, estimate_moment(x_final, theta).estimate};
        const double g1 = e.checkpoint_estimates[1] / std::max(e.checkpoint_estimates[0], 1e-300);
        const double g2 = e.checkpoint_estimates[2] / std::max(e.checkpoint_estimates[1], 1e-300);
        e.divergence_suspected = e.divergence_suspected ||
                                 !std::isfinite(e.checkpoint_estimates[2]) ||
                                 (g1 >= 2.0 && g2 >= 2.0);
        report.moments.push_back(std::move(e));
    }
    return report;
}

std::optional<TailIndexEstimate> hill_tail_index(std::vector<double> samples, double k_fraction) {
    if (!(k_fraction > 0.0 && k_fraction <= 0.2))
        throw ValidationError("hill_tail_index: k_fraction must lie in (0, 0.2]");
    std::erase_if(samples, [](double x) { return !(x > 0.0) || !std::isfinite(x); });
    const long n = static_cast<long>(samples.size());
    if (n < 1000) return std::nullopt;
    const long k = static_cast<long>(std::ceil(k_fraction * static_cast<double>(n)));
    if (k < 50 || k + 1 > n) return std::nullopt;

    std::partial_sort(samples.begin(), samples.begin() + k + 1, samples.end(),
                      std::greater<double>());
    const double log_thresh = std::log(samples[static_cast<std::size_t>(k)]);
    double acc = 0.0;
    for (long i = 0; i < k; ++i) acc += std::log(samples[static_cast<std::size_t>(i)]) - log_thresh;
    if (!(acc > 0.0)) return std::nullopt; // degenerate upper tail
    TailIndexEstimate est;
    est.alpha = static_cast<double>(k) / acc;
    est.k_used = k;
    est.samples = n;
    return est;
}

} // namespace rcar
