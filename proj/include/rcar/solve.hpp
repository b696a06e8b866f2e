#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rcar/pair_sum.hpp"

namespace rcar {

/// Plain bisection; requires a sign change over [lo, hi] (BracketError via
/// NumericError otherwise) and shrinks the bracket to `tol`. Uses at most
/// ceil(log2((hi-lo)/tol)) + 2 evaluations. Infinite function values are
/// legal; only signs are consumed.
double bisect_root(const std::function<double(double)>& f, double lo, double hi, double tol);

enum class SweepCriterion { Phi1, Phi1Tilde, Phi2, Phi2Tilde, Exact };

std::string to_string(SweepCriterion c);

struct CriticalBeta {
    std::optional<double> beta;
    std::string flag; // empty when clean; "all_negative"/"all_positive"/"truncation"
};

/// The beta in (0,1) where the named criterion for the geometric model
/// A_j = beta^j Z crosses zero. Criterion values come from the library
/// machinery (phi2/phi2~ through the closed-pair DP); `Exact` evaluates
/// E[(beta(1+Z))^theta] - 1 by quadrature. Monotonicity in beta is
/// verified on a 32-point grid before bisecting; a single-signed
/// criterion yields a boundary flag instead of a root.
CriticalBeta critical_beta(SweepCriterion criterion, double theta, const ScalarDist& z,
                           double tol = 1e-10);

struct SweepRow {
    double theta = 0.0;
    std::optional<double> beta_phi1, beta_phi1_tilde, beta_phi2, beta_phi2_tilde, beta_exact;
    std::string flags; // "criterion:flag" entries joined by ';'
};

/// One row per theta with all five critical values. Rows fail
/// independently; a failure lands in `flags`, never drops the row.
std::vector<SweepRow> theta_sweep(std::span<const double> thetas, const ScalarDist& z,
                                  double tol = 1e-10);

/// GARCH(1,1) volatility map: a grid point (alpha1, beta1) is mapped to
/// the geometric model with beta = beta1 and Z = (alpha1/beta1) Z0^2,
/// Z0 standard normal (beta1 = 0 degenerates to the order-1 model
/// A = alpha1 Z0^2). phi1_ok reports the first-moment-method sufficient
/// condition at theta = 2 (closed form sqrt(3) alpha1 + beta1 < 1);
/// phi2_ok the pair-sum condition (3 alpha1^2 + 2 alpha1 beta1 + beta1^2
/// < 1). Machinery and closed-form sums are both recorded.
struct GarchPoint {
    double alpha1 = 0.0, beta1 = 0.0;
    bool phi1_ok = false, phi2_ok = false;
    double phi1_sum_machinery = 0.0, phi2_sum_machinery = 0.0;
    double phi1_sum_closed = 0.0, phi2_sum_closed = 0.0;
};

std::vector<GarchPoint> garch_region_scan(double step = 0.01);

/// Default sweep grid theta in {0.1, 0.2, ..., 3.0}.
std::vector<double> default_theta_grid();

} // namespace rcar
