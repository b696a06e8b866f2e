#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>

#include "rcar/errors.hpp"
#include "rcar/random.hpp"

namespace rcar {

// Scalar laws supported as coefficient / factor / noise distributions.
// All supports are contained in [0, inf).

struct Constant {
    double value = 0.0; // >= 0
};

struct ScaledBernoulli {
    double prob = 1.0;  // q in [0,1]
    double value = 0.0; // c >= 0; the law is c with probability q, else 0
};

struct Exponential {
    double rate = 1.0; // lambda > 0
};

struct LogNormal {
    double mu = 0.0;
    double sigma = 1.0; // > 0
};

struct ChiSquare1 {};

struct UniformLaw {
    double lo = 0.0; // >= 0
    double hi = 1.0; // > lo
};

/// Non-negative scalar probability law. Parameters are validated at
/// construction; invalid parameters throw ValidationError.
class ScalarDist {
public:
    using Variant = std::variant<Constant, ScaledBernoulli, Exponential,
                                 LogNormal, ChiSquare1, UniformLaw>;

    ScalarDist() : law_(Constant{0.0}) {}
    ScalarDist(Variant law); // NOLINT: implicit by design
    const Variant& law() const { return law_; }

    /// True when P(D > 0) = 1.
    bool almost_surely_positive() const;
    /// True for a point mass.
    bool is_degenerate() const;

private:
    Variant law_;
};

/// E[D^theta] for theta > 0, by closed form. +infinity is an admissible
/// return (no built-in law produces it for finite theta).
/// Closed forms:
///   Constant c         : c^theta
///   ScaledBernoulli q,c: q c^theta
///   Exponential lambda : Gamma(theta+1) / lambda^theta
///   LogNormal mu,sigma : exp(theta mu + theta^2 sigma^2 / 2)
///   ChiSquare1         : 2^theta Gamma(theta+1/2) / Gamma(1/2)
///   Uniform lo,hi      : (hi^{theta+1} - lo^{theta+1}) / ((theta+1)(hi-lo))
double moment(const ScalarDist& d, double theta);

struct QuadratureResult {
    double value = 0.0;
    double abs_error = 0.0; // internal error estimate
    long evaluations = 0;
};

/// Independent route for E[D^theta]: adaptive quadrature on a transformed
/// bounded domain (atoms are summed exactly). Used to cross-check the
/// closed forms. Throws NumericError if the evaluation cap is reached
/// before the tolerance is met.
QuadratureResult moment_by_quadrature(const ScalarDist& d, double theta,
                                      double tol = 1e-10,
                                      long max_evals = 1000000);

/// E[g(D)] by the same quadrature engine (exact for atomic laws).
QuadratureResult expect(const ScalarDist& d,
                        const std::function<double(double)>& g,
                        double tol = 1e-10, long max_evals = 1000000);

/// One draw from D. Deterministic given the stream state; advances the
/// stream by a fixed number of pulls per law.
double sample(const ScalarDist& d, RandomStream& stream);

std::string describe(const ScalarDist& d);

} // namespace rcar
