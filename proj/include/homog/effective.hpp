#pragma once

#include <Eigen/SparseLU>
#include <memory>
#include <optional>

#include "homog/boundary.hpp"
#include "homog/steklov.hpp"
#include "homog/types.hpp"

namespace homog {

// ----- homogenised fibre operator -------------------------------------------

enum class HomVariant { asymptotic, exact };

struct HomInputs {
  std::optional<SteklovData> steklov;  // exact variant / Model II
  std::optional<Mat2> mu_star;         // Model I asymptotic variant
  double kappa = 0;                    // ||Pi_stiff psi||_Mass
};

// Hermitian pencil on (interior soft dofs, beta) with constrained trace
// u|_Gamma = (beta/kappa) psi. theta carries the eps^{-2} mu-term of the
// second operator component (0 for Model II).
struct HomFibreOperator {
  Model model = Model::I;
  HomVariant variant = HomVariant::asymptotic;
  Vec2 tau = Vec2::Zero();
  double eps = 1.0;
  double kappa = 0;
  double theta = 0;
  Vec psi;  // B_gamma-normalized boundary mode
  std::shared_ptr<const RegionForms> soft;
  SpMat K, M;  // (n_i + 1) x (n_i + 1), beta coordinate last
  int n() const { return static_cast<int>(K.rows()); }

  // embed reduced coordinates (interior, beta) into a full soft-region vector
  Vec full_from_reduced(const Vec& x) const;
};

double kappa_model1(const CellMesh& mesh);
double kappa_from_lift(const RegionForms& stiff, const Vec& psi);

HomFibreOperator assemble_hom_fibre(std::shared_ptr<const RegionForms> soft,
                                    const HomInputs& inputs, double eps, Model model,
                                    HomVariant variant = HomVariant::asymptotic);

// Resolvent of the hom pencil at z: input (f over full soft dofs, f_beta),
// output (u over full soft dofs incl. constrained trace, beta).
class HomSolver {
 public:
  HomSolver(const HomFibreOperator& op, Complex z);
  std::pair<Vec, Complex> apply(const Vec& f_full, Complex f_beta) const;

 private:
  const HomFibreOperator& op_;
  Complex z_;
  Eigen::SparseLU<SpMat> lu_;
};

// ----- dispersion functions --------------------------------------------------

enum class KRoute { series, dn_form };

// Meromorphic dispersion function data; series route carries soft Dirichlet
// eigen-data truncated at J, dn_form evaluates the boundary quadratic form
// exactly (full-truncation limit).
struct DispersionEvaluator {
  Model model = Model::I;
  Vec2 tau = Vec2::Zero();
  double ratio = 0;       // |Gamma| / |Q_stiff| = kappa^{-2}
  double theta = 0;       // eps^{-2} mu_* tau.tau (Model I) or 0
  double tau2 = 0;
  RVec poles;             // lambda_j
  RVec weights;           // route-specific coupling weights
  double const_term = 0;  // Model II series: <Lambda_soft psi, psi>
  double total_weight = 0;  // ||source||^2_Mass bound for tails

  Complex eval(Complex z) const;       // series form, PoleError near poles
  double deriv(double z) const;        // real-axis derivative of the series
  double tail_bound(Complex z) const;
  std::vector<double> active_poles(double wmin_rel = 1e-10) const;
};

DispersionEvaluator make_dispersion_series(Model model, const RegionForms& soft,
                                           const EigenData& eigen, const Vec& psi,
                                           double kappa, double theta, double gamma_len);

// Exact DN-form value K(tau,z) = -kappa^{-2} (<M_soft(z) psi, psi> + theta).
Complex dispersion_dn(const RegionForms& soft, const Vec& psi, double kappa, double theta,
                      Complex z);

// Newton polish of a real root of K(tau,z) = z against the exact DN form,
// seeded by a series root (series derivative drives the updates). Returns the
// input unchanged when it sits inside the pole guard.
double polish_root_dn(const RegionForms& soft, const Vec& psi, double kappa, double theta,
                      const DispersionEvaluator& ev, double z0, int max_iter = 10);


// ----- Zhikov function --------------------------------------------------------

struct ZhikovFunction {
  int J = 0;
  RVec poles;    // soft Dirichlet eigenvalues at tau = 0
  RVec weights;  // |<Psi~_0, phi_j>|^2
  double ratio = 0;       // |Gamma| / |Q_stiff|
  double total_weight = 0;

  Complex operator()(Complex z) const;
  double deriv(double z) const;
  double tail_bound(Complex z) const;
  std::vector<double> active_poles(double wmin_rel = 1e-8) const;
};

ZhikovFunction zhikov_B(const EigenData& eigen0, double gamma_len, double area_stiff);

// K~_I: the tau-frozen Model I dispersion function sharing the Zhikov data;
// realized as a Model I evaluator with the |tau|^2 terms dropped.
DispersionEvaluator make_ktilde(const ZhikovFunction& B, const Mat2& mu_star, double eps,
                                const Vec2& tau);

// ----- limiting spectrum ------------------------------------------------------

struct BandInterval {
  double lo = 0, hi = 0;
  Vec2 tau_lo = Vec2::Zero(), tau_hi = Vec2::Zero();  // extremal tau per edge
};

struct BandStructure {
  Model model = Model::I;
  double win_lo = 0, win_hi = 0;
  std::vector<Vec2> taus;
  std::vector<std::vector<double>> roots;  // per tau, ascending
  std::vector<BandInterval> bands;         // merged, ascending
};

// Real roots of K(tau,z) = z per tau by inter-pole bisection (abs tol 1e-8,
// one Newton polish), banded by branch continuity over the tau grid.
BandStructure limiting_spectrum(
    const std::function<DispersionEvaluator(const Vec2&)>& evaluator_at,
    const std::vector<Vec2>& taus, double win_lo, double win_hi);

// roots of a single evaluator (exposed for tests)
std::vector<double> dispersion_roots(const DispersionEvaluator& ev, double win_lo,
                                     double win_hi);

// ----- whole-space effective multiplier --------------------------------------

// A_hom = -(|Gamma|/|Q_stiff|) mu_*
Mat2 hom_symbol(const Mat2& mu_star, double ratio);

// F_hat(t) -> F_hat(t) / (A_hom t.t - B(z)) pointwise on the grid.
Vec wholespace_apply(const Vec& F_hat, const std::vector<Vec2>& t_grid, Complex z,
                     const Mat2& A_hom, const ZhikovFunction& B);

}  // namespace homog
