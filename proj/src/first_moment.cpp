#include "rcar/first_moment.hpp"

#include <cmath>
#include <limits>

namespace rcar {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_log(double s) {
    if (s == 0.0) return -kInf;
    if (std::isinf(s)) return kInf;
    return std::log(s);
}
} // namespace

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Finite: return "finite";
        case Verdict::Infinite: return "infinite";
        default: return "inconclusive";
    }
}

std::string to_string(Clause c) {
    switch (c) {
        case Clause::FirstMomentSufficient: return "first_moment_sufficient";
        case Clause::FirstMomentTildeSufficient: return "first_moment_tilde_sufficient";
        case Clause::FirstMomentNecessary: return "first_moment_necessary";
        case Clause::FirstMomentTildeNecessary: return "first_moment_tilde_necessary";
        case Clause::SecondMomentSufficient: return "second_moment_sufficient";
        case Clause::SecondMomentNecessary: return "second_moment_necessary";
        case Clause::KroneckerRadius: return "kronecker_radius";
        case Clause::BoundaryBand: return "boundary_band";
        default: return "none";
    }
}

PhiResult phi1(const MomentOracle& oracle, double theta) {
    PhiResult r;
    r.value = safe_log(oracle.sum_marginal(theta));
    r.lower_bound = r.value;
    return r;
}

PhiResult phi1_tilde(const MomentOracle& oracle, double theta) {
    PhiResult r;
    r.value = safe_log(oracle.sum_marginal_root(theta));
    r.lower_bound = r.value;
    return r;
}

double mean_exact(const MomentOracle& oracle) {
    const double s = oracle.sum_marginal(1.0);
    if (!(s < 1.0)) return kInf;
    return oracle.noise_moment(1.0) / (1.0 - s);
}

CriterionReport theorem1_verdict(const MomentOracle& oracle, double theta) {
    if (!(theta > 0.0)) throw ValidationError("theorem1_verdict: theta must be > 0");
    CriterionReport rep;
    rep.theta = theta;

    const double p1 = phi1(oracle, theta).value;
    const double p1t = phi1_tilde(oracle, theta).value;
    const double bmom = oracle.noise_moment(theta);
    rep.values["phi1"] = p1;
    rep.values["phi1_tilde"] = p1t;
    rep.values["noise_moment"] = bmom;

    const bool noise_finite = std::isfinite(bmom);
    // an exactly-zero criterion decides through the weak inequality; only
    // nonzero values inside the band are numerical-noise territory
    auto in_band = [](double v) {
        return std::isfinite(v) && v != 0.0 && std::abs(v) <= kBoundaryBand;
    };
    const bool p1_boundary = in_band(p1);
    const bool p1t_boundary = in_band(p1t);

    auto decide = [&](double phi_suff, bool suff_boundary, double phi_nec, bool nec_boundary,
                      Clause suff_clause, Clause nec_clause) {
        if ((phi_nec >= 0.0 && !nec_boundary) || !noise_finite) {
            rep.verdict = Verdict::Infinite;
            rep.justification.push_back(nec_clause);
            return;
        }
        if (phi_suff < 0.0 && !suff_boundary && noise_finite) {
            rep.verdict = Verdict::Finite;
            rep.justification.push_back(suff_clause);
            return;
        }
        rep.verdict = Verdict::Inconclusive;
        if (suff_boundary || nec_boundary) {
            rep.boundary = true;
            rep.justification.push_back(Clause::BoundaryBand);
        }
    };

    if (theta < 1.0) {
        // sufficient via phi1, necessary via phi1~.
        decide(p1, p1_boundary, p1t, p1t_boundary,
               Clause::FirstMomentSufficient, Clause::FirstMomentTildeNecessary);
    } else if (theta > 1.0) {
        decide(p1t, p1t_boundary, p1, p1_boundary,
               Clause::FirstMomentTildeSufficient, Clause::FirstMomentNecessary);
    } else {
        // theta == 1: the two functions coincide and the criterion is sharp.
        decide(p1, p1_boundary, p1, p1_boundary,
               Clause::FirstMomentSufficient, Clause::FirstMomentNecessary);
    }
    return rep;
}

} // namespace rcar
