#pragma once

#include <map>
#include <string>
#include <vector>

#include "rcar/model.hpp"

namespace rcar {

enum class Verdict { Finite, Infinite, Inconclusive };

std::string to_string(Verdict v);

/// Theorem clauses a verdict can rest on.
enum class Clause {
    None,
    FirstMomentSufficient,       // theta <= 1, phi1 < 0, E[B^theta] finite
    FirstMomentTildeSufficient,  // theta >= 1, phi1~ < 0, E[B^theta] finite
    FirstMomentNecessary,        // theta >= 1, phi1 >= 0 or E[B^theta] infinite
    FirstMomentTildeNecessary,   // theta < 1, phi1~ >= 0 or E[B^theta] infinite
    SecondMomentSufficient,      // pair-sum sufficient clause
    SecondMomentNecessary,       // pair-sum necessary clause
    KroneckerRadius,             // finite-order spectral criterion
    BoundaryBand,                // a decisive value sat within 1e-12 of 0
};

std::string to_string(Clause c);

/// Verdict plus the numbers that justify it. `values` holds every quantity
/// the decision touched (phi1, phi1_tilde, phi2, phi2_tilde, noise_moment,
/// spectral_radius, ... as applicable).
struct CriterionReport {
    Verdict verdict = Verdict::Inconclusive;
    std::vector<Clause> justification;
    std::map<std::string, double> values;
    double theta = 0.0;
    bool boundary = false;
};

/// Width of the band around zero treated as numerically undecidable.
inline constexpr double kBoundaryBand = 1e-12;

/// Value of a criterion function. `converged` is false only when a
/// truncated evaluation could not be driven to tolerance, in which case
/// `lower_bound` still certifies one-sided statements.
struct PhiResult {
    double value = 0.0;
    bool converged = true;
    double lower_bound = 0.0;
    int truncation = 0;
};

/// phi_1(theta) = log sum_j E[A_j^theta]. -inf when the sum is 0,
/// +inf when it diverges.
PhiResult phi1(const MomentOracle& oracle, double theta);

/// phi_1~(theta) = log sum_j E[A_j^theta]^{1/theta}.
PhiResult phi1_tilde(const MomentOracle& oracle, double theta);

/// E[B] / (1 - sum_j E[A_j]) when the sum is < 1, else +inf.
double mean_exact(const MomentOracle& oracle);

/// First-moment verdict:
///   Finite   if (theta <= 1 and phi1 < 0 and E[B^theta] < inf)
///            or (theta >= 1 and phi1~ < 0 and E[B^theta] < inf);
///   Infinite if (theta >= 1 and (phi1 >= 0 or E[B^theta] = inf))
///            or (theta < 1 and (phi1~ >= 0 or E[B^theta] = inf));
///   else Inconclusive. Values within kBoundaryBand of 0 are flagged and
///   yield Inconclusive rather than a verdict resting on noise.
CriterionReport theorem1_verdict(const MomentOracle& oracle, double theta);

} // namespace rcar
