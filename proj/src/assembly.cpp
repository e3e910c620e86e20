#include "homog/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <unordered_map>

#include "homog/util.hpp"

namespace homog {

namespace {

// Element contributions for P1 on a triangle with vertices p0,p1,p2:
//   stiffness L_ab = A grad(a).grad(b)
//   mass      M_ab = A/12 (1 + delta_ab)
//   drift     G_ab = (tau . grad(b)) * A/3
// and the magnetic element matrix  E = L + i (G^T - G) + |tau|^2 M,
// exact for affine shape functions (the phase never enters element integrals).
struct ElementMats {
  Eigen::Matrix3cd K;
  Eigen::Matrix3d M;
  double area;
};

ElementMats element_mats(const Vec2& p0, const Vec2& p1, const Vec2& p2, const Vec2& tau) {
  ElementMats em;
  Eigen::Matrix2d J;
  J.col(0) = p1 - p0;
  J.col(1) = p2 - p0;
  double det = J.determinant();
  em.area = 0.5 * det;
  // gradients of barycentric shape functions
  Eigen::Matrix<double, 2, 3> g;
  g.col(1) = Vec2(J(1, 1), -J(0, 1)) / det;
  g.col(2) = Vec2(-J(1, 0), J(0, 0)) / det;
  g.col(0) = -g.col(1) - g.col(2);
  Eigen::Matrix3d L = em.area * g.transpose() * g;
  Eigen::Matrix3d M;
  M.setConstant(em.area / 12.0);
  M.diagonal().setConstant(em.area / 6.0);
  Eigen::Matrix3d G;
  for (int b = 0; b < 3; ++b) G.col(b).setConstant(tau.dot(g.col(b)) * em.area / 3.0);
  em.M = M;
  em.K = L.cast<Complex>() + Complex(0, 1) * (G.transpose() - G).cast<Complex>() +
         tau.squaredNorm() * M.cast<Complex>();
  return em;
}

template <typename Scalar>
Eigen::SparseMatrix<Scalar> from_triplets(int rows, int cols,
                                          std::vector<Eigen::Triplet<Scalar>>& trips) {
  Eigen::SparseMatrix<Scalar> S(rows, cols);
  S.setFromTriplets(trips.begin(), trips.end());
  S.makeCompressed();
  return S;
}

SpMat hermitize(const SpMat& K) {
  SpMat Kh = SpMat(0.5 * (K + SpMat(K.adjoint())));
  Kh.makeCompressed();
  return Kh;
}

}  // namespace

Vec RegionForms::mass_apply(const Vec& full) const {
  const int ni = n_i(), ng = n_g();
  Vec out(ni + ng);
  out.head(ni) = M_ii * full.head(ni) + M_ib * full.tail(ng);
  out.tail(ng) = RSpMat(M_ib.transpose()) * full.head(ni) + M_bb * full.tail(ng);
  return out;
}

Complex RegionForms::mass_inner(const Vec& a, const Vec& b) const {
  return b.dot(mass_apply(a));
}

RegionForms assemble_region(const CellMesh& mesh, Region region, const Vec2& tau) {
  RegionForms rf;
  rf.region = region;
  rf.tau = tau;
  rf.area = mesh.area(region);
  rf.gamma_len = mesh.gamma_length();

  // local index map: gamma dofs in loop order, then interior dofs ascending
  const int ng = mesh.n_gamma();
  std::unordered_map<int, int> local;  // global dof -> local id (gamma: 0..ng-1)
  local.reserve(mesh.n_dofs);
  for (int k = 0; k < ng; ++k) local.emplace(mesh.gamma_loop[k], k);

  std::vector<int> interior;
  {
    std::vector<char> in_region(mesh.n_dofs, 0);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
      if (mesh.tri_region[t] != region) continue;
      for (int v : mesh.triangles[t]) in_region[mesh.vertex_dof[v]] = 1;
    }
    for (int d = 0; d < mesh.n_dofs; ++d)
      if (in_region[d] && !mesh.on_gamma(d)) interior.push_back(d);
  }
  const int ni = static_cast<int>(interior.size());
  for (int k = 0; k < ni; ++k) local.emplace(interior[k], ng + k);

  rf.interior_dofs = std::move(interior);
  rf.gamma_dofs.assign(mesh.gamma_loop.begin(), mesh.gamma_loop.end());

  std::vector<Eigen::Triplet<Complex>> kt_ii, kt_ib, kt_bb;
  std::vector<Eigen::Triplet<double>> mt_ii, mt_ib, mt_bb;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    if (mesh.tri_region[t] != region) continue;
    const auto& tri = mesh.triangles[t];
    ElementMats em = element_mats(mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                                  mesh.vertices[tri[2]], tau);
    int loc[3];
    for (int v = 0; v < 3; ++v) loc[v] = local.at(mesh.vertex_dof[tri[v]]);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        int ra = loc[a], cb = loc[b];
        bool ga = ra < ng, gb = cb < ng;
        if (!ga && !gb) {
          kt_ii.emplace_back(ra - ng, cb - ng, em.K(a, b));
          mt_ii.emplace_back(ra - ng, cb - ng, em.M(a, b));
        } else if (!ga && gb) {
          kt_ib.emplace_back(ra - ng, cb, em.K(a, b));
          mt_ib.emplace_back(ra - ng, cb, em.M(a, b));
        } else if (ga && gb) {
          kt_bb.emplace_back(ra, cb, em.K(a, b));
          mt_bb.emplace_back(ra, cb, em.M(a, b));
        }
        // gamma-row/interior-column entries are recovered from K_ib^H
      }
  }
  rf.K_ii = hermitize(from_triplets<Complex>(ni, ni, kt_ii));
  rf.K_ib = from_triplets<Complex>(ni, ng, kt_ib);
  rf.K_bb = hermitize(from_triplets<Complex>(ng, ng, kt_bb));
  rf.M_ii = from_triplets<double>(ni, ni, mt_ii);
  rf.M_ii = RSpMat(0.5 * (rf.M_ii + RSpMat(rf.M_ii.transpose())));
  rf.M_ib = from_triplets<double>(ni, ng, mt_ib);
  rf.M_bb = from_triplets<double>(ng, ng, mt_bb);
  rf.M_bb = RSpMat(0.5 * (rf.M_bb + RSpMat(rf.M_bb.transpose())));

  // boundary mass on the Gamma polygon
  std::vector<Eigen::Triplet<double>> bt;
  for (int k = 0; k < ng; ++k) {
    int k1 = (k + 1) % ng;
    double len = (mesh.dof_position[mesh.gamma_loop[k1]] -
                  mesh.dof_position[mesh.gamma_loop[k]]).norm();
    bt.emplace_back(k, k, len / 3.0);
    bt.emplace_back(k1, k1, len / 3.0);
    bt.emplace_back(k, k1, len / 6.0);
    bt.emplace_back(k1, k, len / 6.0);
  }
  rf.B_gamma = from_triplets<double>(ng, ng, bt);
  return rf;
}

FibreOperator assemble_fibre(std::shared_ptr<const RegionForms> soft,
                             std::shared_ptr<const RegionForms> stiff,
                             const CellMesh& mesh, double eps) {
  if (!(eps > 0.0 && eps <= 1.0)) throw ContrastError("eps must lie in (0, 1]");
  FibreOperator fo;
  fo.eps = eps;
  fo.tau = soft->tau;
  fo.soft = soft;
  fo.stiff = stiff;
  const double w = 1.0 / (eps * eps);
  const int n = mesh.n_dofs;

  std::vector<Eigen::Triplet<Complex>> kt;
  std::vector<Eigen::Triplet<double>> mt;
  auto scatter = [&](const RegionForms& rf, double weight) {
    const int ng = rf.n_g();
    auto gid = [&](int loc) {
      return loc < ng ? rf.gamma_dofs[loc] : rf.interior_dofs[loc - ng];
    };
    auto add_block = [&](const SpMat& B, int row_off, int col_off) {
      for (int c = 0; c < B.outerSize(); ++c)
        for (SpMat::InnerIterator it(B, c); it; ++it)
          kt.emplace_back(gid(int(it.row()) + row_off), gid(int(it.col()) + col_off),
                          weight * it.value());
    };
    add_block(rf.K_ii, ng, ng);
    add_block(rf.K_ib, ng, 0);
    add_block(SpMat(rf.K_ib.adjoint()), 0, ng);
    add_block(rf.K_bb, 0, 0);
    auto add_mass = [&](const RSpMat& B, int row_off, int col_off) {
      for (int c = 0; c < B.outerSize(); ++c)
        for (RSpMat::InnerIterator it(B, c); it; ++it)
          mt.emplace_back(gid(int(it.row()) + row_off), gid(int(it.col()) + col_off), it.value());
    };
    add_mass(rf.M_ii, ng, ng);
    add_mass(rf.M_ib, ng, 0);
    add_mass(RSpMat(rf.M_ib.transpose()), 0, ng);
    add_mass(rf.M_bb, 0, 0);
  };
  scatter(*soft, 1.0);
  scatter(*stiff, w);

  fo.K = hermitize(from_triplets<Complex>(n, n, kt));
  fo.M = from_triplets<double>(n, n, mt);
  fo.M = RSpMat(0.5 * (fo.M + RSpMat(fo.M.transpose())));
  return fo;
}

FibreOperator assemble_fibre(const CellMesh& mesh, const Vec2& tau, double eps) {
  auto soft = std::make_shared<RegionForms>(assemble_region(mesh, Region::soft, tau));
  auto stiff = std::make_shared<RegionForms>(assemble_region(mesh, Region::stiff, tau));
  return assemble_fibre(soft, stiff, mesh, eps);
}

EigenData dirichlet_eigenpairs(const RegionForms& forms, int J, const EigOptions& opts) {
  const int ni = forms.n_i();
  if (J < 1 || J > ni) throw SolverError("dirichlet_eigenpairs: J out of range");
  SpMat M_complex = forms.M_ii.cast<Complex>();
  EigResult r = smallest_eigenpairs(forms.K_ii, M_complex, J, 0.0, opts);
  EigenData ed;
  ed.lambda = r.values;
  ed.phi = r.vectors;
  ed.J = J;
  // <phi_j, 1>_{L2(region)} with phi extended by zero to Gamma
  RVec ones_i = RVec::Ones(ni), ones_g = RVec::Ones(forms.n_g());
  RVec w = forms.M_ii * ones_i + forms.M_ib * ones_g;
  ed.means = ed.phi.transpose() * w.cast<Complex>();  // sum_a w_a phi_aj
  return ed;
}

EigenData dirichlet_eigenpairs_upto(const RegionForms& forms, double lambda_max,
                                    const EigOptions& opts) {
  const int ni = forms.n_i();
  SpMat M_complex = forms.M_ii.cast<Complex>();
  EigResult r = eigenpairs_in_window(forms.K_ii, M_complex, 0.0, lambda_max, opts);
  EigenData ed;
  ed.lambda = r.values;
  ed.phi = r.vectors;
  ed.J = static_cast<int>(r.values.size());
  RVec ones_i = RVec::Ones(ni), ones_g = RVec::Ones(forms.n_g());
  RVec w = forms.M_ii * ones_i + forms.M_ib * ones_g;
  if (ed.J > 0)
    ed.means = ed.phi.transpose() * w.cast<Complex>();
  else
    ed.means.resize(0);
  return ed;
}

void write_coordinate_list(const SpMat& A, std::ostream& os) {
  os << A.rows() << " " << A.cols() << " " << A.nonZeros() << "\n";
  for (int c = 0; c < A.outerSize(); ++c)
    for (SpMat::InnerIterator it(A, c); it; ++it)
      os << it.row() << " " << it.col() << " " << fmt_double(it.value().real()) << " "
         << fmt_double(it.value().imag()) << "\n";
}

}  // namespace homog
