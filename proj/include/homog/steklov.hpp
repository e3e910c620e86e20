#pragma once

#include <array>

#include "homog/boundary.hpp"
#include "homog/mesh.hpp"
#include "homog/types.hpp"

namespace homog {

// Least-by-absolute-value Steklov eigenpair of the unweighted stiff DN map:
// Lambda~ psi = mu B_gamma psi, with the phase fixed so <psi, 1>_{B_gamma} is
// real and nonnegative.
struct SteklovData {
  Vec2 tau = Vec2::Zero();
  double mu = 0;
  double gap = 0;         // |mu| distance to the next Steklov eigenvalue
  Vec psi;                // B_gamma-normalized
  Vec Psi_lift;           // tau-harmonic lift to the stiff region
  Mat projection;         // nodal action of <., psi>_B psi
};

SteklovData steklov_solve(const RegionForms& stiff_forms);

// Least-squares quadratic fit mu_tau ~ mu_* tau.tau over the symmetric stencil
// {+-s e1, +-s e2, +-s (e1+e2)/sqrt(2)} with mu_0 = 0 pinned.
struct EffectiveTensor {
  Mat2 mu_star = Mat2::Zero();
  double fit_residual = 0;
  std::vector<Vec2> stencil;
};

EffectiveTensor effective_tensor(const CellMesh& mesh, Model model, double stencil_step);

// Birman-Suslina germ of the Neumann-perforated stiff cell (Model I):
// correctors  div(e_k + grad w_k) = 0 in Q_stiff, (e_k + grad w_k).n = 0 on
// Gamma, periodic on the cell boundary; q_jk = |Q_stiff|^{-1} int (e_j+grad
// w_j).(e_k+grad w_k).  Satisfies mu_* = -(|Q_stiff|/|Gamma|) q.
Mat2 germ_oracle(const CellMesh& mesh);

// Rank-one stability correction Lambda_Delta with psi1 obtained by central
// finite differences of the Steklov vector at +-fd_step along each axis.
struct LambdaDelta {
  Mat matrix;             // nodal dual form on Gamma
  Vec2 tau = Vec2::Zero();
  double eps = 0;
  std::array<Vec, 2> psi1;
  Vec psi0;
  double scalar = 0;      // <Lambda_Delta psi0, psi0>_H (real part)
};

LambdaDelta lambda_delta(const CellMesh& mesh, const Vec2& tau, double eps, double fd_step);

}  // namespace homog
