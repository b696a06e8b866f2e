#include "rcar/solve.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace rcar {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

} // namespace

double bisect_root(const std::function<double(double)>& f, double lo, double hi, double tol) {
    if (!(tol > 0.0)) throw ValidationError("bisect_root: tol must be > 0");
    if (!(lo < hi)) throw ValidationError("bisect_root: need lo < hi");
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if (sign_of(flo) == sign_of(fhi))
        throw NumericError("bisect_root: no sign change over the bracket");
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break; // bracket at floating-point resolution
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if (sign_of(fm) == sign_of(flo)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

std::string to_string(SweepCriterion c) {
    switch (c) {
        case SweepCriterion::Phi1: return "phi1";
        case SweepCriterion::Phi1Tilde: return "phi1_tilde";
        case SweepCriterion::Phi2: return "phi2";
        case SweepCriterion::Phi2Tilde: return "phi2_tilde";
        default: return "exact";
    }
}

namespace {

// criterion value at (theta, beta); negative on the finite-moment side.
double criterion_value(SweepCriterion c, double theta, double beta, const ScalarDist& z,
                       bool* truncated) {
    if (c == SweepCriterion::Exact) {
        return expect(z, [beta, theta](double zz) { return std::pow(beta * (1.0 + zz), theta); }).value - 1.0;
    }
    const ModelSpec spec{Assumption::A2,
                         CoeffFamily(GeometricFactor{beta, z}),
                         NoiseSpec{ScalarDist(Constant{1.0}), NoiseDependence::IndependentOfA}};
    const MomentOracle oracle = build_oracle(spec);
    switch (c) {
        case SweepCriterion::Phi1: return phi1(oracle, theta).value;
        case SweepCriterion::Phi1Tilde: return phi1_tilde(oracle, theta).value;
        case SweepCriterion::Phi2: {
            const PhiResult r = phi2(oracle, theta);
            if (!r.converged && truncated) *truncated = true;
            return r.value;
        }
        default: {
            const PhiResult r = phi2_tilde(oracle, theta);
            if (!r.converged && truncated) *truncated = true;
            return r.value;
        }
    }
}

} // namespace

CriticalBeta critical_beta(SweepCriterion criterion, double theta, const ScalarDist& z,
                           double tol) {
    if (!(theta > 0.0)) throw ValidationError("critical_beta: theta must be > 0");
    CriticalBeta out;
    bool truncated = false;
    auto f = [&](double beta) { return criterion_value(criterion, theta, beta, z, &truncated); };

    // sampled monotonicity check before trusting bisection
    constexpr int kGrid = 32;
    const double eps = 1e-6;
    double prev = -kInf;
    double f_lo = 0.0, f_hi = 0.0;
    for (int i = 0; i < kGrid; ++i) {
        const double beta = eps + (1.0 - 2.0 * eps) * static_cast<double>(i) / (kGrid - 1);
        const double v = f(beta);
        if (i == 0) f_lo = v;
        if (i == kGrid - 1) f_hi = v;
        const double slack = 1e-9 * std::max(1.0, std::isfinite(prev) ? std::abs(prev) : 1.0);
        if (std::isfinite(prev) && std::isfinite(v) && v < prev - slack) {
            std::ostringstream os;
            os << "critical_beta: " << to_string(criterion) << " not monotone in beta near "
               << beta << " (theta=" << theta << ", " << prev << " -> " << v << ")";
            throw NumericError(os.str());
        }
        if (std::isinf(prev) && prev > 0.0 && std::isfinite(v)) {
            throw NumericError("critical_beta: criterion dropped from +inf; not monotone");
        }
        prev = v;
    }

    if (f_lo >= 0.0) {
        out.flag = "all_positive";
        return out;
    }
    if (f_hi < 0.0) {
        out.flag = "all_negative";
        return out;
    }
    out.beta = bisect_root(f, eps, 1.0 - eps, tol);
    if (truncated) out.flag = "truncation";
    return out;
}

std::vector<double> default_theta_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 30; ++i) grid.push_back(static_cast<double>(i) / 10.0);
    return grid;
}

std::vector<SweepRow> theta_sweep(std::span<const double> thetas, const ScalarDist& z,
                                  double tol) {
    std::vector<SweepRow> rows;
    rows.reserve(thetas.size());
    for (double theta : thetas) {
        SweepRow row;
        row.theta = theta;
        std::ostringstream flags;
        auto run = [&](SweepCriterion c, std::optional<double>& slot) {
            try {
                CriticalBeta cb = critical_beta(c, theta, z, tol);
                slot = cb.beta;
                if (!cb.flag.empty()) {
                    if (flags.tellp() > 0) flags << ';';
                    flags << to_string(c) << ':' << cb.flag;
                }
            } catch (const std::exception&) {
                if (flags.tellp() > 0) flags << ';';
                flags << to_string(c) << ":error";
            }
        };
        run(SweepCriterion::Phi1, row.beta_phi1);
        run(SweepCriterion::Phi1Tilde, row.beta_phi1_tilde);
        run(SweepCriterion::Phi2, row.beta_phi2);
        run(SweepCriterion::Phi2Tilde, row.beta_phi2_tilde);
        run(SweepCriterion::Exact, row.beta_exact);
        row.flags = flags.str();
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<GarchPoint> garch_region_scan(double step) {
    if (!(step > 0.0 && step < 1.0)) throw ValidationError("garch_region_scan: step must lie in (0,1)");
    const ScalarDist chi{ChiSquare1{}};
    const ScalarDist one{Constant{1.0}};
    const int n = static_cast<int>(std::lround(1.0 / step));
    const double ez4 = moment(chi, 2.0); // E[Z0^4] = 3

    std::vector<GarchPoint> points;
    points.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (int ia = 0; ia < n; ++ia) {
        const double alpha1 = ia * step;
        for (int ib = 0; ib < n; ++ib) {
            const double beta1 = ib * step;
            GarchPoint pt;
            pt.alpha1 = alpha1;
            pt.beta1 = beta1;

            if (beta1 > 0.0) {
                const double c = alpha1 / beta1; // Z = c Z0^2
                auto z_mom = [c, chi](double theta) {
                    return std::pow(c, theta) * moment(chi, theta);
                };
                const MomentOracle oracle = geometric_oracle(beta1, z_mom, one);
                pt.phi1_sum_machinery = oracle.sum_marginal_root(2.0);
                pt.phi2_sum_machinery = closed_pair_sum(oracle, 2.0, PairTransform::Phi2).value;
            } else {
                // pure ARCH: order-1 model A = alpha1 Z0^2
                const ModelSpec spec{Assumption::A1,
                                     CoeffFamily(FiniteSingleFactor{{alpha1}, chi}),
                                     NoiseSpec{one, NoiseDependence::IndependentOfA}};
                const MomentOracle oracle = build_oracle(spec);
                pt.phi1_sum_machinery = oracle.sum_marginal_root(2.0);
                pt.phi2_sum_machinery = closed_pair_sum(oracle, 2.0, PairTransform::Phi2).value;
            }

            pt.phi1_sum_closed = std::sqrt(ez4) * alpha1 / (1.0 - beta1);
            const double denom = 1.0 - beta1 * beta1 - 2.0 * alpha1 * beta1;
            pt.phi2_sum_closed = denom > 0.0 ? ez4 * alpha1 * alpha1 / denom : kInf;

            pt.phi1_ok = pt.phi1_sum_machinery < 1.0;
            pt.phi2_ok = pt.phi2_sum_machinery < 1.0;
            points.push_back(pt);
        }
    }
    return points;
}

} // namespace rcar
