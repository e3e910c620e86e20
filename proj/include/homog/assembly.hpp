#pragma once

#include <memory>
#include <vector>

#include "homog/eigensolve.hpp"
#include "homog/mesh.hpp"
#include "homog/types.hpp"

namespace homog {

// Complex sesquilinear-form matrices of the magnetic expression
// (1/i grad + tau)^2 on one region, split into interior and Gamma blocks.
// Gamma dofs follow the mesh loop order; interior dofs ascend by global id.
struct RegionForms {
  Region region = Region::soft;
  Vec2 tau = Vec2::Zero();
  double area = 0;
  double gamma_len = 0;

  std::vector<int> interior_dofs;  // global dof ids
  std::vector<int> gamma_dofs;     // global dof ids, loop order

  SpMat K_ii, K_ib, K_bb;      // Hermitian-symmetrized magnetic stiffness blocks
  RSpMat M_ii, M_ib, M_bb;     // region L2 mass blocks
  RSpMat B_gamma;              // boundary mass matrix on Gamma

  int n_i() const { return static_cast<int>(interior_dofs.size()); }
  int n_g() const { return static_cast<int>(gamma_dofs.size()); }
  SpMat K_bi() const { return SpMat(K_ib.adjoint()); }

  // region mass applied to a full region vector [interior; gamma]
  Vec mass_apply(const Vec& full) const;
  Complex mass_inner(const Vec& a, const Vec& b) const;  // <a, b>_{L2(region)}
};

RegionForms assemble_region(const CellMesh& mesh, Region region, const Vec2& tau);

// Full high-contrast fibre operator over the union dof set:
// K = soft stiffness + eps^{-2} * stiff stiffness, sharing Gamma dofs.
struct FibreOperator {
  double eps = 1.0;
  Vec2 tau = Vec2::Zero();
  SpMat K;    // Hermitian
  RSpMat M;   // full cell mass
  std::shared_ptr<const RegionForms> soft;
  std::shared_ptr<const RegionForms> stiff;
  int n() const { return static_cast<int>(K.rows()); }
};

FibreOperator assemble_fibre(const CellMesh& mesh, const Vec2& tau, double eps);
FibreOperator assemble_fibre(std::shared_ptr<const RegionForms> soft,
                             std::shared_ptr<const RegionForms> stiff,
                             const CellMesh& mesh, double eps);

// Dirichlet eigenpairs of the region interior pencil (K_ii, M_ii), ascending,
// Mass-orthonormal. means[j] = <phi_j, 1>_{L2(region)}.
struct EigenData {
  RVec lambda;
  Mat phi;    // interior coefficients, one column per mode
  Vec means;
  int J = 0;
};

EigenData dirichlet_eigenpairs(const RegionForms& forms, int J, const EigOptions& opts = {});

// All Dirichlet eigenpairs with eigenvalue <= lambda_max.
EigenData dirichlet_eigenpairs_upto(const RegionForms& forms, double lambda_max,
                                    const EigOptions& opts = {});

// Coordinate-list text dump of a sparse matrix (debugging aid).
void write_coordinate_list(const SpMat& A, std::ostream& os);

}  // namespace homog
