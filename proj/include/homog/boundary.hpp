#pragma once

#include <optional>

#include "homog/assembly.hpp"
#include "homog/types.hpp"

namespace homog {

// Field on one region with prescribed Gamma trace, stored over region dofs
// [interior..., gamma (loop order)...]. z absent means the tau-harmonic lift.
struct LiftField {
  Region region = Region::soft;
  Vec2 tau = Vec2::Zero();
  std::optional<Complex> z;
  Vec values;
};

// interior values = -(K_ii - z M_ii)^{-1} (K_ib - z M_ib) phi, trace = phi
LiftField harmonic_lift(const RegionForms& forms, const Vec& phi);
LiftField solution_operator(const RegionForms& forms, Complex z, const Vec& phi);

enum class BoundaryKind {
  lambda_soft,
  lambda_stiff_unweighted,
  m_soft,
  m_stiff,
  m_total,
};

// Dense Gamma x Gamma matrix in the nodal basis, acting as a sesquilinear
// form: <Op phi, chi>_{L2(Gamma)} = chi^H matrix phi. Eigenproblems against
// it are generalized problems with B_gamma.
struct BoundaryOperator {
  BoundaryKind kind = BoundaryKind::m_total;
  std::optional<Complex> z;
  Vec2 tau = Vec2::Zero();
  std::optional<double> eps;
  Mat matrix;
};

// Negative Schur complement of (weight K - z M) onto Gamma; z absent gives
// the DN map Lambda (non-positive by this sign convention).
Mat dtn_matrix(const RegionForms& forms, std::optional<Complex> z, double weight);
BoundaryOperator dtn_operator(const RegionForms& forms, std::optional<Complex> z,
                              double weight, BoundaryKind kind);

// Full M-function of the transmission pencil: M_soft(z) + eps^{-2}-weighted
// M_stiff(z) on the shared Gamma dofs.
Mat m_total_matrix(const RegionForms& soft, const RegionForms& stiff, Complex z, double eps);

// Krein resolvent: solves (K_eps - z M) u = M f purely from the two decoupled
// region Dirichlet solves plus the Gamma-sized correction through M(z)^{-1}.
Vec krein_resolvent(const FibreOperator& fibre, Complex z, const Vec& f);

// Schur-Frobenius block inversion of [[A, B], [E, D]].
struct BlockInverse {
  Mat top_left, top_right, bottom_left, bottom_right;
};
BlockInverse schur_frobenius_invert(const Mat& A, const Mat& B, const Mat& E, const Mat& D);

// Smallest Dirichlet eigenvalue of the region interior pencil (unit weight);
// used by resonance guards.
double dirichlet_lambda1(const RegionForms& forms);

// Region mass as one sparse matrix over [interior; gamma] dofs, and the
// Gram X^H (Mass Y) of two column families of region fields.
RSpMat region_mass(const RegionForms& forms);
Mat mass_gram(const RegionForms& forms, const Mat& X, const Mat& Y);

}  // namespace homog
