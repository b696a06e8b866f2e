#pragma once

#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "rcar/dist.hpp"

namespace rcar {

/// How coefficient rows relate across time.
///   A1: rows ((A_{t,j})_j, B_t) are iid across t.
///   A2: coefficients are shared along diagonals, A_{t,j} = A'_{t-j,j},
///       with the noise iid and independent of all coefficients.
enum class Assumption { A1, A2 };

enum class NoiseDependence { IndependentOfA, JointRowA1 };

/// A_1..A_p mutually independent within a row.
struct FiniteIndependent {
    std::vector<ScalarDist> dists;
};

/// A_j = w_j * Z with one shared factor Z per row (A1) or per diagonal (A2).
struct FiniteSingleFactor {
    std::vector<double> weights;
    ScalarDist factor;
};

/// Infinite order, A_j = beta^j * Z, beta in (0,1).
struct GeometricFactor {
    double beta = 0.5;
    ScalarDist factor;
};

class CoeffFamily {
public:
    using Variant = std::variant<FiniteIndependent, FiniteSingleFactor, GeometricFactor>;
    CoeffFamily(Variant v); // validates; throws ValidationError
    const Variant& family() const { return family_; }
    /// p for finite families, nullopt for infinite order.
    std::optional<int> order() const;

private:
    Variant family_;
};

struct NoiseSpec {
    ScalarDist dist;
    NoiseDependence dependence = NoiseDependence::IndependentOfA;
};

/// Declarative description of the autoregressive model
/// X_t = sum_j A_{t,j} X_{t-j} + B_t with non-negative coefficients.
struct ModelSpec {
    Assumption assumption = Assumption::A1;
    CoeffFamily coeffs;
    NoiseSpec noise;

    void validate() const; // throws ValidationError listing the offending field
};

/// Moment accessors every criterion consumes. Immutable after construction.
///
/// Conventions: indices j start at 1; marginal(j, theta) = E[A_j^theta]
/// (zero beyond the order for finite families); joint(i, j, theta) =
/// E[A_i^{theta/2} A_j^{theta/2}], symmetric, with joint(i,i,theta) =
/// marginal(i, theta).
class MomentOracle {
public:
    std::optional<int> order() const { return order_; }
    bool is_geometric() const { return !order_.has_value(); }
    double beta() const; // geometric families only

    double marginal(int j, double theta) const;
    double joint(int i, int j, double theta) const;
    double noise_moment(double theta) const;

    /// Joint moment of several entries of one row raised to multiples of a
    /// common unit exponent: E[prod_g A_{j_g}^{m_g * unit}]. Entries with
    /// equal index are merged before evaluation.
    double group_moment(std::span<const std::pair<int, int>> sizes_mults, double unit) const;

    /// Sum_j E[A_j^theta]; closed geometric form for infinite order.
    double sum_marginal(double theta) const;
    /// Sum_j E[A_j^theta]^{1/theta}.
    double sum_marginal_root(double theta) const;
    /// Sum_{i,j >= 1} joint(i,j,theta)^r.
    double sum_joint_pow(double theta, double r) const;
    /// Sum_{j > J} E[A_j^theta]; geometric families only.
    double tail_mass(double theta, int J) const;

    /// E[Z^theta] for factor-backed families (single factor / geometric).
    double factor_moment(double theta) const;
    bool has_factor() const { return static_cast<bool>(factor_moment_); }

    /// True when every coefficient is almost surely strictly positive
    /// (hypothesis (+) of the finite-order comparison theorem).
    bool coefficients_as_positive() const { return coeffs_positive_; }

    Assumption assumption() const { return assumption_; }
    NoiseDependence noise_dependence() const { return noise_dependence_; }
    bool noise_independent() const { return noise_dependence_ == NoiseDependence::IndependentOfA; }

private:
    friend MomentOracle build_oracle(const ModelSpec&);
    friend MomentOracle geometric_oracle(double, std::function<double(double)>,
                                         const ScalarDist&, Assumption);

    MomentOracle() = default;

    std::optional<int> order_;
    // Exactly one backing is populated:
    std::vector<ScalarDist> independent_;          // finite, independent entries
    std::vector<double> weights_;                  // finite, single factor
    double beta_ = -1.0;                           // geometric single factor
    std::function<double(double)> factor_moment_;  // E[Z^theta] for factor families
    std::function<double(double)> noise_moment_;
    Assumption assumption_ = Assumption::A1;
    NoiseDependence noise_dependence_ = NoiseDependence::IndependentOfA;
    bool coeffs_positive_ = false;

    double weight(int j) const; // w_j (factor families), beta^j for geometric
};

/// Build the oracle for a validated model.
MomentOracle build_oracle(const ModelSpec& spec);

/// Sum_{j > J} E[A_j^theta] in closed geometric form.
/// Errors on finite families.
double tail_mass(const ModelSpec& spec, double theta, int J);

/// Plumbing for solvers and tests: a geometric-family oracle whose factor
/// moments are supplied directly (e.g. a rescaled factor law).
MomentOracle geometric_oracle(double beta, std::function<double(double)> z_moment,
                              const ScalarDist& noise_dist,
                              Assumption assumption = Assumption::A2);

} // namespace rcar
