#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rcar/model.hpp"

namespace rcar {

enum class SimMode { ReplicaEnsemble, TimeAverage };

struct SimConfig {
    long horizon = 300;     // T
    long replicas = 10000;  // R
    long burn_in = 0;       // time-average mode, must be < horizon
    std::uint64_t seed = 1;
    std::vector<double> thetas{1.0};
    SimMode mode = SimMode::ReplicaEnsemble;
    int threads = 1;

    void validate() const;
};

struct MomentEstimate {
    double theta = 0.0;
    double estimate = 0.0;
    double std_error = 0.0;
    long replicas = 0;
    bool low_confidence = false;       // too few replicas for a standard error
    bool divergence_suspected = false; // estimate keeps growing across checkpoints
    std::vector<double> checkpoint_estimates; // at T/4, T/2, T
};

struct TailIndexEstimate {
    double alpha = 0.0;
    long k_used = 0;
    long samples = 0;
};

struct SimReport {
    std::vector<MomentEstimate> moments;
    std::optional<TailIndexEstimate> tail_index;
};

/// Forward path X_0..X_T from zero initial past.
///
/// Draw schedule (fixed, part of the determinism contract): at step t >= 1
/// one coefficient row is drawn (entries j = 1..p in order for independent
/// families, a single factor otherwise), then B_t; step 0 draws only B_0.
/// Under row-iid sampling (A1) the row drawn at t is (A_{t,j})_j; under
/// diagonal sharing (A2) it is the row with index t-1, and A_{t,j} reuses
/// the row drawn at time t-j. Joint-row noise models are simulated with
/// independent noise (the supported dependence structures do not couple B).
/// Overflow to +infinity propagates; a zero coefficient always kills its
/// term even against an infinite lag.
///
/// `row_trace`, when given, receives the coefficient row used at each step.
std::vector<double> simulate_path(const ModelSpec& spec, long horizon, RandomStream& stream,
                                  std::vector<std::vector<double>>* row_trace = nullptr);

struct GeometricPaths {
    std::vector<double> recursion; // X_t via the O(1) running sum
    std::vector<double> markov;    // X'_t = 1 + beta (1 + Z_t) X'_{t-1}, X'_0 = X_0
};

/// Geometric-family path in O(1) per step through S_t = beta Z_t X_{t-1}
/// + beta S_{t-1}, X_t = B_t + S_t, plus the Markov path driven by the
/// same Z stream (their difference is a pure floating-point transient).
GeometricPaths simulate_geometric(const ModelSpec& spec, long horizon, RandomStream& stream);

/// Ensemble mean of samples^theta with jackknife standard error.
/// Fewer than 10 samples: estimate only, flagged low-confidence.
MomentEstimate estimate_moment(std::span<const double> samples, double theta);

/// Full Monte Carlo run. Replica r uses the substream (seed, r); results
/// are reduced in replica order, so reports are byte-identical for any
/// thread count.
SimReport run_simulation(const ModelSpec& spec, const SimConfig& config);

/// Hill estimator on the top ceil(k_fraction * n) order statistics of the
/// positive samples. Refuses (nullopt) fewer than 50 exceedances or a
/// degenerate tail (zero log-spacing).
std::optional<TailIndexEstimate> hill_tail_index(std::vector<double> samples, double k_fraction);

} // namespace rcar
