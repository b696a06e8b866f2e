#pragma once

#include <Eigen/Dense>

#include "rcar/first_moment.hpp"
#include "rcar/model.hpp"

namespace rcar {

/// Largest supported order; keeps the Kronecker matrix at most 4096 x 4096.
inline constexpr int kMaxSpectralOrder = 64;

/// E[A] for the companion form of a finite-order model: first row
/// (E[A_1], ..., E[A_p]), ones on the subdiagonal, zeros elsewhere.
Eigen::MatrixXd expected_companion(const MomentOracle& oracle);

/// E[A (x) A] (p^2 x p^2), with row/column index (i-1)p + k for block (i,k):
///   ((1,1),(j,l)) = E[A_j A_l]
///   ((1,k),(j,l)) = E[A_j] 1{k = l+1}          for k >= 2
///   ((i,1),(j,l)) = 1{i = j+1} E[A_l]          for i >= 2
///   ((i,k),(j,l)) = 1{i = j+1} 1{k = l+1}      otherwise.
Eigen::MatrixXd expected_kron(const MomentOracle& oracle);

/// Spectral radius of a non-negative square matrix by power iteration with
/// certified Collatz-Wielandt brackets (falling back to even powers for
/// periodic matrices), cross-checked against a repeated-squaring estimate;
/// throws NumericError if the two routes disagree by more than 1e-8
/// relative or neither converges.
double spectral_radius(const Eigen::MatrixXd& m);

/// Finite-order second-moment test: Finite iff rho(E[A (x) A]) < 1.
/// The report lists which of the comparison theorem's hypotheses the model
/// satisfies; the verdict itself only evaluates the radius.
CriterionReport nq_criterion(const MomentOracle& oracle);

/// Exact E[X^2] for finite order, row-iid coefficients and B = 1:
/// the (1,1) entry of
///   (I - K2)^{-1} (I + I (x) R + R (x) I),  R = K1 (I - K1)^{-1},
/// with K1 = E[A], K2 = E[A (x) A]; +inf when rho(K2) >= 1 or
/// rho(K1) >= 1. Linear solves only, no explicit inverses; a pivot ratio
/// below 1e-12 in either solve raises NumericError instead of returning
/// a hollow value.
double kron_second_moment(const MomentOracle& oracle);

struct JensenCheck {
    bool holds = false;
    double companion_radius = 0.0;
    double kron_radius = 0.0;
};

/// Checks rho(E[A]) <= sqrt(rho(E[A (x) A])) with slack >= -1e-10.
JensenCheck jensen_lemma_check(const MomentOracle& oracle);

} // namespace rcar
