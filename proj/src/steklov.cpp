#include "homog/steklov.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>

#include "homog/eigensolve.hpp"
#include "homog/util.hpp"

namespace homog {

SteklovData steklov_solve(const RegionForms& stiff_forms) {
  if (stiff_forms.region != Region::stiff)
    throw ModelMismatchError("steklov_solve expects stiff-region forms");
  Mat lam = dtn_matrix(stiff_forms, std::nullopt, 1.0);
  Mat lam_h = 0.5 * (lam + lam.adjoint());
  Mat B = Mat(stiff_forms.B_gamma.cast<Complex>());
  EigResult es = dense_generalized(lam_h, B);

  // least |mu|; spectrum is non-positive so this is the top of the ordering,
  // but scan to be safe against tiny positive roundoff
  const int ng = static_cast<int>(es.values.size());
  int best = 0;
  for (int k = 1; k < ng; ++k)
    if (std::abs(es.values[k]) < std::abs(es.values[best])) best = k;
  double second = std::numeric_limits<double>::infinity();
  for (int k = 0; k < ng; ++k)
    if (k != best) second = std::min(second, std::abs(es.values[k] - es.values[best]));
  if (second < 1e-6)
    throw DegenerateError("least Steklov eigenvalue is not simple within 1e-6");

  SteklovData sd;
  sd.tau = stiff_forms.tau;
  sd.mu = es.values[best];
  sd.gap = second;
  sd.psi = es.vectors.col(best);

  // phase: <psi, 1>_B real and >= 0
  Vec Bpsi = stiff_forms.B_gamma.cast<Complex>() * sd.psi;
  Complex overlap = Bpsi.sum();  // = 1^H B psi = <psi, 1>_B
  if (std::abs(overlap) > 1e-12) {
    sd.psi *= std::conj(overlap) / std::abs(overlap);
  } else {
    // fall back to the largest entry when psi is orthogonal to constants
    int imax = 0;
    for (int k = 1; k < sd.psi.size(); ++k)
      if (std::abs(sd.psi[k]) > std::abs(sd.psi[imax])) imax = k;
    sd.psi *= std::conj(sd.psi[imax]) / std::abs(sd.psi[imax]);
  }

  sd.Psi_lift = harmonic_lift(stiff_forms, sd.psi).values;
  Vec Bp = stiff_forms.B_gamma.cast<Complex>() * sd.psi;
  sd.projection = sd.psi * Bp.adjoint();
  return sd;
}

EffectiveTensor effective_tensor(const CellMesh& mesh, Model model, double s) {
  if (!(s > 0 && s <= 0.3)) throw FitError("stencil step must lie in (0, 0.3]");
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  std::vector<Vec2> stencil = {Vec2(s, 0),  Vec2(-s, 0),
                               Vec2(0, s),  Vec2(0, -s),
                               Vec2(s * inv_sqrt2, s * inv_sqrt2),
                               Vec2(-s * inv_sqrt2, -s * inv_sqrt2)};
  RVec mu(static_cast<int>(stencil.size()));
  for (std::size_t k = 0; k < stencil.size(); ++k) {
    auto rf = assemble_region(mesh, Region::stiff, stencil[k]);
    mu[static_cast<int>(k)] = steklov_solve(rf).mu;
  }
  // least squares for mu = a t1^2 + 2 b t1 t2 + c t2^2 (mu_0 = 0 built in)
  RMat Adesign(static_cast<int>(stencil.size()), 3);
  for (std::size_t k = 0; k < stencil.size(); ++k) {
    const Vec2& t = stencil[k];
    Adesign(static_cast<int>(k), 0) = t.x() * t.x();
    Adesign(static_cast<int>(k), 1) = 2.0 * t.x() * t.y();
    Adesign(static_cast<int>(k), 2) = t.y() * t.y();
  }
  Eigen::Vector3d coef = Adesign.colPivHouseholderQr().solve(mu);
  RVec resid = mu - Adesign * coef;

  EffectiveTensor et;
  et.stencil = stencil;
  et.fit_residual = resid.lpNorm<Eigen::Infinity>() / (s * s);
  Mat2 fitted;
  fitted << coef[0], coef[1], coef[1], coef[2];
  if (model == Model::II) {
    et.mu_star = Mat2::Zero();
    return et;
  }
  et.mu_star = fitted;
  double scale = fitted.norm();
  if (scale > 0 && et.fit_residual > 0.05 * scale)
    throw FitError("quadratic fit residual exceeds 5% of mu_*; reduce the stencil step");
  return et;
}

Mat2 germ_oracle(const CellMesh& mesh) {
  if (mesh.geom.model != Model::I)
    throw ModelMismatchError("germ oracle requires Model I (connected stiff component)");
  auto rf = assemble_region(mesh, Region::stiff, Vec2::Zero());
  const int ni = rf.n_i(), ng = rf.n_g(), nr = ni + ng;

  // full Neumann stiffness over all region dofs (real at tau = 0), with a
  // mean constraint appended to remove the constant kernel
  RSpMat K(nr + 1, nr + 1);
  {
    std::vector<Eigen::Triplet<double>> trips;
    auto add = [&](const SpMat& B, int r0, int c0) {
      for (int c = 0; c < B.outerSize(); ++c)
        for (SpMat::InnerIterator it(B, c); it; ++it)
          trips.emplace_back(int(it.row()) + r0, int(it.col()) + c0, it.value().real());
    };
    add(rf.K_ii, 0, 0);
    add(rf.K_ib, 0, ni);
    add(SpMat(rf.K_ib.adjoint()), ni, 0);
    add(rf.K_bb, ni, ni);
    RVec m = RVec::Zero(nr);
    m.head(ni) = rf.M_ii * RVec::Ones(ni) + rf.M_ib * RVec::Ones(ng);
    m.tail(ng) = RSpMat(rf.M_ib.transpose()) * RVec::Ones(ni) + rf.M_bb * RVec::Ones(ng);
    for (int k = 0; k < nr; ++k) {
      trips.emplace_back(k, nr, m[k]);
      trips.emplace_back(nr, k, m[k]);
    }
    K.setFromTriplets(trips.begin(), trips.end());
  }
  Eigen::SparseLU<RSpMat> lu(K);
  if (lu.info() != Eigen::Success) throw SolverError("corrector system factorization failed");

  // per-element shape gradients over the stiff triangles
  struct ElemGrad {
    double area;
    Eigen::Matrix<double, 2, 3> g;
    int loc[3];
  };
  std::vector<ElemGrad> elems;
  {
    std::vector<int> local(mesh.n_dofs, -1);
    for (int k = 0; k < ni; ++k) local[rf.interior_dofs[k]] = k;
    for (int k = 0; k < ng; ++k) local[rf.gamma_dofs[k]] = ni + k;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
      if (mesh.tri_region[t] != Region::stiff) continue;
      const auto& tri = mesh.triangles[t];
      const Vec2 &p0 = mesh.vertices[tri[0]], &p1 = mesh.vertices[tri[1]],
                 &p2 = mesh.vertices[tri[2]];
      Eigen::Matrix2d J;
      J.col(0) = p1 - p0;
      J.col(1) = p2 - p0;
      double det = J.determinant();
      ElemGrad e;
      e.area = 0.5 * det;
      e.g.col(1) = Vec2(J(1, 1), -J(0, 1)) / det;
      e.g.col(2) = Vec2(-J(1, 0), J(0, 0)) / det;
      e.g.col(0) = -e.g.col(1) - e.g.col(2);
      for (int v = 0; v < 3; ++v) e.loc[v] = local[mesh.vertex_dof[tri[v]]];
      elems.push_back(e);
    }
  }

  // rhs_k[a] = -int_stiff e_k . grad(phi_a)
  RMat rhs = RMat::Zero(nr + 1, 2);
  for (const auto& e : elems)
    for (int v = 0; v < 3; ++v) {
      rhs(e.loc[v], 0) -= e.area * e.g(0, v);
      rhs(e.loc[v], 1) -= e.area * e.g(1, v);
    }
  RMat w = lu.solve(rhs);
  if (!w.allFinite()) throw SolverError("corrector solve failed");

  // q_jk = |Q_stiff|^{-1} sum_T area (e_j + grad w_j).(e_k + grad w_k)
  Mat2 q = Mat2::Zero();
  for (const auto& e : elems) {
    Vec2 field[2];
    for (int k = 0; k < 2; ++k) {
      Vec2 grad = Vec2::Zero();
      for (int v = 0; v < 3; ++v) grad += e.g.col(v) * w(e.loc[v], k);
      field[k] = Vec2::Unit(k) + grad;
    }
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) q(j, k) += e.area * field[j].dot(field[k]);
  }
  q /= rf.area;
  q = 0.5 * (q + q.transpose()).eval();
  return q;
}

LambdaDelta lambda_delta(const CellMesh& mesh, const Vec2& tau, double eps, double fd_step) {
  if (mesh.geom.model != Model::I) throw ModelMismatchError("lambda_delta requires Model I");
  if (!(fd_step > 0 && fd_step <= 0.05)) throw FitError("fd_step must lie in (0, 0.05]");

  LambdaDelta ld;
  ld.tau = tau;
  ld.eps = eps;

  // psi^(1)_k from central differences at tau = 0
  for (int k = 0; k < 2; ++k) {
    Vec2 dp = fd_step * Vec2::Unit(k);
    auto plus = steklov_solve(assemble_region(mesh, Region::stiff, dp));
    auto minus = steklov_solve(assemble_region(mesh, Region::stiff, -dp));
    ld.psi1[k] = (plus.psi - minus.psi) / (2.0 * fd_step);
  }
  auto rf0 = assemble_region(mesh, Region::stiff, Vec2::Zero());
  ld.psi0 = steklov_solve(rf0).psi;

  const int ng = static_cast<int>(ld.psi0.size());
  const RSpMat& B = rf0.B_gamma;

  // pointwise (tau.n)(tau.psi^(1)) on Gamma nodes; n is the outward normal of
  // the stiff region, i.e. the negative of the stored out-of-soft normal
  Vec w(ng);
  for (int a = 0; a < ng; ++a) {
    double tn = tau.dot(-mesh.gamma_normal[a]);
    Complex tpsi = tau.x() * ld.psi1[0][a] + tau.y() * ld.psi1[1][a];
    w[a] = tn * tpsi;
  }
  // g = i P^(0) w
  Vec Bw = B.cast<Complex>() * w;
  Complex overlap = ld.psi0.dot(Bw);  // <w, psi0>_B
  Vec g = Complex(0, 1) * overlap * ld.psi0;

  // dual form matrix of phi -> eps^{-2} <phi, g>_H psi0
  double w2 = 1.0 / (eps * eps);
  Vec Bpsi0 = B.cast<Complex>() * ld.psi0;
  Vec Bg = B.cast<Complex>() * g;
  ld.matrix = w2 * (Bpsi0 * Bg.adjoint());
  ld.scalar = std::real(Complex(w2) * std::conj(ld.psi0.dot(Bg)));
  return ld;
}

}  // namespace homog
