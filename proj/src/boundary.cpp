#include "homog/boundary.hpp"

#include <Eigen/SVD>
#include <Eigen/SparseLU>
#include <cmath>

#include "homog/eigensolve.hpp"
#include "homog/util.hpp"

namespace homog {

namespace {

SpMat interior_pencil(const RegionForms& forms, Complex z, double weight) {
  SpMat P = weight * forms.K_ii - z * forms.M_ii.cast<Complex>();
  P.makeCompressed();
  return P;
}

// Factorization of (weight K_ii - z M_ii) with a resonance guard for z close
// to the real axis: the distance to the region Dirichlet spectrum must exceed
// 1e-8 on the scale of the nearest eigenvalue.
struct InteriorFactor {
  SpMat P;
  Eigen::SparseLU<SpMat> lu;
  InteriorFactor(const RegionForms& forms, std::optional<Complex> z, double weight) {
    Complex zz = z.value_or(Complex(0, 0));
    P = interior_pencil(forms, zz, weight);
    lu.compute(P);
    if (lu.info() != Eigen::Success) {
      if (z.has_value()) throw ResonanceError("interior pencil is singular at z");
      throw SingularError("interior Dirichlet block is singular");
    }
    if (z.has_value() && std::abs(zz.imag()) < 1e-6 * (1.0 + std::abs(zz.real()))) {
      SpMat Mc = forms.M_ii.cast<Complex>();
      auto apply = [this, &Mc](const Vec& x) -> Vec {
        Vec rhs = Mc * x;
        return lu.solve(rhs);
      };
      double lam = nearest_eigenvalue(apply, Mc, zz.real(), 16);
      if (std::abs(lam - zz) < 1e-8 * std::max(1.0, std::abs(lam)))
        throw ResonanceError("z within resonance tolerance of a Dirichlet eigenvalue");
    }
  }
  Vec solve(const Vec& rhs) const {
    Vec x = lu.solve(rhs);
    if (!x.allFinite()) throw SingularError("interior solve returned non-finite values");
    return x;
  }
  Mat solve(const Mat& rhs) const {
    Mat x = lu.solve(rhs);
    if (!x.allFinite()) throw SingularError("interior solve returned non-finite values");
    return x;
  }
};

double condition_2norm(const Mat& A) {
  Eigen::JacobiSVD<Mat> svd(A);
  double smin = svd.singularValues().minCoeff();
  double smax = svd.singularValues().maxCoeff();
  return smin > 0 ? smax / smin : std::numeric_limits<double>::infinity();
}

// negative Schur complement onto Gamma reusing an existing interior
// factorization of (weight K_ii - z M_ii)
Mat dtn_from_factor(const RegionForms& forms, const InteriorFactor& f, Complex z,
                    double weight) {
  const int ni = forms.n_i(), ng = forms.n_g();
  Mat Kib = weight * Mat(forms.K_ib) - z * Mat(forms.M_ib.cast<Complex>());
  Mat Kbi = weight * Mat(forms.K_ib).adjoint() - z * Mat(forms.M_ib.cast<Complex>()).transpose();
  Mat Kbb = weight * Mat(forms.K_bb) - z * Mat(forms.M_bb.cast<Complex>());
  Mat X = ni > 0 ? f.solve(Kib) : Mat::Zero(0, ng);
  return -(Kbb - Kbi * X);
}

}  // namespace

LiftField harmonic_lift(const RegionForms& forms, const Vec& phi) {
  if (phi.size() != forms.n_g()) throw Error("harmonic_lift: trace size mismatch");
  InteriorFactor f(forms, std::nullopt, 1.0);
  LiftField out;
  out.region = forms.region;
  out.tau = forms.tau;
  out.values.resize(forms.n_i() + forms.n_g());
  out.values.head(forms.n_i()) = -f.solve(Vec(forms.K_ib * phi));
  out.values.tail(forms.n_g()) = phi;
  return out;
}

LiftField solution_operator(const RegionForms& forms, Complex z, const Vec& phi) {
  if (phi.size() != forms.n_g()) throw Error("solution_operator: trace size mismatch");
  InteriorFactor f(forms, z, 1.0);
  Vec rhs = forms.K_ib * phi - z * (forms.M_ib.cast<Complex>() * phi);
  LiftField out;
  out.region = forms.region;
  out.tau = forms.tau;
  out.z = z;
  out.values.resize(forms.n_i() + forms.n_g());
  out.values.head(forms.n_i()) = -f.solve(rhs);
  out.values.tail(forms.n_g()) = phi;
  return out;
}

Mat dtn_matrix(const RegionForms& forms, std::optional<Complex> z, double weight) {
  InteriorFactor f(forms, z, weight);
  return dtn_from_factor(forms, f, z.value_or(Complex(0, 0)), weight);
}

BoundaryOperator dtn_operator(const RegionForms& forms, std::optional<Complex> z,
                              double weight, BoundaryKind kind) {
  BoundaryOperator op;
  op.kind = kind;
  op.z = z;
  op.tau = forms.tau;
  if (weight != 1.0) op.eps = 1.0 / std::sqrt(weight);
  op.matrix = dtn_matrix(forms, z, weight);
  return op;
}

Mat m_total_matrix(const RegionForms& soft, const RegionForms& stiff, Complex z, double eps) {
  double w = 1.0 / (eps * eps);
  return dtn_matrix(soft, z, 1.0) + dtn_matrix(stiff, z, w);
}

Vec krein_resolvent(const FibreOperator& fibre, Complex z, const Vec& f) {
  const RegionForms& soft = *fibre.soft;
  const RegionForms& stiff = *fibre.stiff;
  const double w = 1.0 / (fibre.eps * fibre.eps);
  const int n = fibre.n();
  const int ng = soft.n_g();
  if (f.size() != n) throw Error("krein_resolvent: rhs size mismatch");

  Vec g = fibre.M.cast<Complex>() * f;

  auto gather = [&](const std::vector<int>& ids) {
    Vec v(static_cast<int>(ids.size()));
    for (std::size_t k = 0; k < ids.size(); ++k) v[static_cast<int>(k)] = g[ids[k]];
    return v;
  };
  Vec g_soft = gather(soft.interior_dofs);
  Vec g_stiff = gather(stiff.interior_dofs);
  Vec g_b = gather(soft.gamma_dofs);

  InteriorFactor fs(soft, z, 1.0);
  InteriorFactor ft(stiff, z, w);

  // decoupled Dirichlet solves
  Vec u_soft = fs.solve(g_soft);
  Vec u_stiff = ft.solve(g_stiff);

  // boundary data functional T = g_b - sum_r (w_r K_bi - z M_bi) u_r
  auto lower_apply = [&](const RegionForms& rf, double weight, const Vec& u) -> Vec {
    return weight * (Mat(rf.K_ib).adjoint() * u) -
           z * (rf.M_ib.cast<Complex>().transpose() * u);
  };
  Vec T = g_b - lower_apply(soft, 1.0, u_soft) - lower_apply(stiff, w, u_stiff);

  // Gamma correction through M(z)^{-1}, reusing the region factorizations
  Mat M = dtn_from_factor(soft, fs, z, 1.0) + dtn_from_factor(stiff, ft, z, w);
  if (condition_2norm(M) > 1e12)
    throw IllConditionedError("M(z) condition number exceeds 1e12");
  Vec u_b = -M.partialPivLu().solve(T);

  auto lift_correction = [&](const RegionForms& rf, const InteriorFactor& fac,
                             double weight) -> Vec {
    Vec rhs = weight * (rf.K_ib * u_b) - z * (rf.M_ib.cast<Complex>() * u_b);
    return -fac.solve(rhs);
  };
  Vec c_soft = lift_correction(soft, fs, 1.0);
  Vec c_stiff = lift_correction(stiff, ft, w);

  Vec u = Vec::Zero(n);
  for (int k = 0; k < soft.n_i(); ++k) u[soft.interior_dofs[k]] = u_soft[k] + c_soft[k];
  for (int k = 0; k < stiff.n_i(); ++k) u[stiff.interior_dofs[k]] = u_stiff[k] + c_stiff[k];
  for (int k = 0; k < ng; ++k) u[soft.gamma_dofs[k]] = u_b[k];
  return u;
}

BlockInverse schur_frobenius_invert(const Mat& A, const Mat& B, const Mat& E, const Mat& D) {
  if (A.rows() != A.cols() || D.rows() != D.cols() || B.rows() != A.rows() ||
      B.cols() != D.cols() || E.rows() != D.rows() || E.cols() != A.cols())
    throw Error("schur_frobenius_invert: inconsistent block shapes");
  if (condition_2norm(A) > 1e12) throw IllConditionedError("pivot block A is ill-conditioned");
  Eigen::PartialPivLU<Mat> luA(A);
  Mat AinvB = luA.solve(B);
  Mat S = D - E * AinvB;
  if (condition_2norm(S) > 1e12) throw IllConditionedError("Schur complement is ill-conditioned");
  Eigen::PartialPivLU<Mat> luS(S);
  Mat Sinv = luS.solve(Mat::Identity(S.rows(), S.cols()));
  Mat Eadj = E.adjoint();
  Mat X = luA.adjoint().solve(Eadj);
  Mat EAinv = X.adjoint();
  BlockInverse out;
  out.bottom_right = Sinv;
  out.top_right = -AinvB * Sinv;
  out.bottom_left = -Sinv * EAinv;
  out.top_left = luA.solve(Mat::Identity(A.rows(), A.cols())) + AinvB * Sinv * EAinv;
  return out;
}

double dirichlet_lambda1(const RegionForms& forms) {
  EigOptions opts;
  EigResult r = smallest_eigenpairs(forms.K_ii, SpMat(forms.M_ii.cast<Complex>()), 1, 0.0, opts);
  return r.values[0];
}

RSpMat region_mass(const RegionForms& forms) {
  const int ni = forms.n_i(), ng = forms.n_g();
  std::vector<Eigen::Triplet<double>> trips;
  auto add = [&](const RSpMat& B, int r0, int c0) {
    for (int c = 0; c < B.outerSize(); ++c)
      for (RSpMat::InnerIterator it(B, c); it; ++it)
        trips.emplace_back(int(it.row()) + r0, int(it.col()) + c0, it.value());
  };
  add(forms.M_ii, 0, 0);
  add(forms.M_ib, 0, ni);
  add(RSpMat(forms.M_ib.transpose()), ni, 0);
  add(forms.M_bb, ni, ni);
  RSpMat M(ni + ng, ni + ng);
  M.setFromTriplets(trips.begin(), trips.end());
  return M;
}

Mat mass_gram(const RegionForms& forms, const Mat& X, const Mat& Y) {
  RSpMat M = region_mass(forms);
  Mat MY = M.cast<Complex>() * Y;
  return X.adjoint() * MY;
}

}  // namespace homog
