#pragma once

#include <optional>

#include "homog/effective.hpp"
#include "homog/types.hpp"

namespace homog {

// Partial isometry from the cell space onto H_hom = L2(Q_soft) + C: identity
// on the soft part, stiff part mapped to its coefficient against eta =
// Pi_stiff psi / ||Pi_stiff psi||. An optional Mass-unitary reflection that
// fixes eta can be composed on the stiff side (distance invariance checks).
struct ThetaEmbedding {
  Model model = Model::I;
  Vec2 tau = Vec2::Zero();
  std::shared_ptr<const RegionForms> stiff;
  Vec eta;  // stiff-region dof vector [interior; gamma], Mass-normalized
  std::optional<Vec> reflect;  // r: W = I - 2 r <., r>_M / <r, r>_M

  Vec stiff_apply_w(const Vec& x) const;      // W x (identity without reflect)
  Complex coefficient(const Vec& stiff_part) const;  // <W x, eta>_Mass
  Vec embed(Complex beta) const;              // W* (beta eta)
};

ThetaEmbedding make_theta(std::shared_ptr<const RegionForms> stiff, const Vec& psi);

// random Mass-unitary reflection fixing eta (seeded)
ThetaEmbedding with_random_reflection(const ThetaEmbedding& theta, std::uint64_t seed);

// All fibre pencil eigenvalues in the window, Mass-orthonormal vectors kept.
EigResult direct_spectrum(const FibreOperator& fibre, double lo, double hi,
                          const EigOptions& opts = {});

struct DistanceOptions {
  double tol = 1e-6;     // relative tolerance on the singular value
  int max_iter = 5000;
  std::uint64_t seed = 20240901;
  double gap_margin = 0.1;  // spectral gap requirement for near-real z
};

// Largest singular value of R_direct(z) - Theta* R_hom(z) Theta in the
// Mass-weighted L2 -> L2 norm on the broken (per-region) cell space,
// computed by power iteration on D^H D with Mass-weighted adjoints.
double resolvent_distance(const FibreOperator& fibre, const HomFibreOperator& hom,
                          const ThetaEmbedding& theta, Complex z,
                          const DistanceOptions& opts = {});

// Two-path consistency checks (relative differences):
// soft-block generalized resolvent: hom pencil vs the directly assembled
// constrained soft problem with the z-dependent boundary coefficient.
double generalized_resolvent_block_check(const HomFibreOperator& hom, Complex z,
                                         std::uint64_t seed = 7);
// Strauss block form: the beta output of the hom resolvent vs kappa times the
// trace coefficient of the independently solved constrained problem.
double strauss_block_check(const HomFibreOperator& hom, Complex z, std::uint64_t seed = 7);

// ----- convergence study ------------------------------------------------------

struct ConvergenceConfig {
  Model model = Model::II;
  HomVariant variant = HomVariant::asymptotic;
  std::vector<Vec2> taus;
  std::vector<Complex> zs;
  std::vector<double> eps_list;  // >= 3, geometrically spaced
  bool floor_gate = true;        // two-mesh 10% stability check at eps_min
  bool floor_gate_all_taus = false;
  int threads = 1;
  DistanceOptions distance;
};

struct ConvergenceRow {
  Vec2 tau;
  Complex z;
  double eps = 0;
  double distance = 0;
};

struct SlopeRow {
  Vec2 tau;
  Complex z;
  double slope = 0;
  double r2 = 0;
  double floor_ratio = std::numeric_limits<double>::quiet_NaN();
};

struct ConvergenceReport {
  Model model = Model::II;
  double h = 0;
  std::vector<ConvergenceRow> rows;
  std::vector<SlopeRow> slopes;            // per (tau, z)
  std::vector<SlopeRow> sup_slopes;        // per z, sup over tau
  bool floor_checked = false;
  bool floor_passed = true;
};

ConvergenceReport convergence_study(const CellMesh& mesh, const ConvergenceConfig& config);

// ----- band comparison ---------------------------------------------------------

struct HausdorffReport {
  double points_to_bands = 0;
  double bands_to_points = 0;
  double symmetric = 0;
  bool degenerate = false;  // empty input, distance 0 by convention
};

HausdorffReport band_compare(const std::vector<double>& direct_points,
                             const BandStructure& bands);

}  // namespace homog
