#include "homog/effective.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "homog/util.hpp"

namespace homog {

namespace {

constexpr double kPoleGuard = 1e-6;  // relative distance pre-condition

void check_pole_distance(Complex z, const RVec& poles, const RVec& weights, double wmin) {
  for (int j = 0; j < poles.size(); ++j) {
    if (weights[j] <= wmin) continue;
    if (std::abs(z - Complex(poles[j], 0)) < kPoleGuard * (1.0 + std::abs(poles[j])))
      throw PoleError("z within relative distance 1e-6 of a dispersion pole");
  }
}

}  // namespace

// ----- homogenised fibre operator -------------------------------------------

double kappa_model1(const CellMesh& mesh) {
  return std::sqrt(mesh.area(Region::stiff) / mesh.gamma_length());
}

double kappa_from_lift(const RegionForms& stiff, const Vec& psi) {
  Vec lift = harmonic_lift(stiff, psi).values;
  return std::sqrt(std::abs(std::real(stiff.mass_inner(lift, lift))));
}

Vec HomFibreOperator::full_from_reduced(const Vec& x) const {
  const int ni = soft->n_i(), ng = soft->n_g();
  Vec full(ni + ng);
  full.head(ni) = x.head(ni);
  full.tail(ng) = (x[ni] / kappa) * psi;
  return full;
}

HomFibreOperator assemble_hom_fibre(std::shared_ptr<const RegionForms> soft,
                                    const HomInputs& inputs, double eps, Model model,
                                    HomVariant variant) {
  if (!(eps > 0.0 && eps <= 1.0)) throw ContrastError("eps must lie in (0, 1]");
  HomFibreOperator op;
  op.model = model;
  op.variant = variant;
  op.tau = soft->tau;
  op.eps = eps;
  op.kappa = inputs.kappa;
  if (!(op.kappa > 0)) throw ModelMismatchError("hom operator needs kappa > 0");

  if (model == Model::I && variant == HomVariant::asymptotic) {
    if (!inputs.mu_star) throw ModelMismatchError("Model I asymptotic setup needs mu_*");
    const int ng = soft->n_g();
    // psi_0: B_gamma-normalized constant
    Vec ones = Vec::Ones(ng);
    double nrm = std::sqrt(std::abs(std::real(ones.dot(Vec(soft->B_gamma.cast<Complex>() * ones)))));
    op.psi = ones / nrm;
    op.theta = ((*inputs.mu_star) * op.tau).dot(op.tau) / (eps * eps);
  } else {
    if (!inputs.steklov) throw ModelMismatchError("exact setup needs Steklov data");
    op.psi = inputs.steklov->psi;
    if (model == Model::II) {
      op.theta = 0.0;  // mu_tau vanishes identically for the stiff inclusion
    } else {
      op.theta = inputs.steklov->mu / (eps * eps);
    }
  }

  const int ni = soft->n_i();
  const double k2 = op.kappa * op.kappa;
  Vec kib_psi = soft->K_ib * op.psi;       // interior coupling column
  Vec mib_psi = soft->M_ib.cast<Complex>() * op.psi;
  Complex kbb = op.psi.dot(Vec(soft->K_bb * op.psi));
  Complex mbb = op.psi.dot(Vec(soft->M_bb.cast<Complex>() * op.psi));

  std::vector<Eigen::Triplet<Complex>> kt, mt;
  for (int c = 0; c < soft->K_ii.outerSize(); ++c)
    for (SpMat::InnerIterator it(soft->K_ii, c); it; ++it)
      kt.emplace_back(it.row(), it.col(), it.value());
  for (int c = 0; c < soft->M_ii.outerSize(); ++c)
    for (RSpMat::InnerIterator it(soft->M_ii, c); it; ++it)
      mt.emplace_back(it.row(), it.col(), Complex(it.value(), 0));
  for (int i = 0; i < ni; ++i) {
    if (kib_psi[i] != Complex(0, 0)) {
      kt.emplace_back(i, ni, kib_psi[i] / op.kappa);
      kt.emplace_back(ni, i, std::conj(kib_psi[i]) / op.kappa);
    }
    if (mib_psi[i] != Complex(0, 0)) {
      mt.emplace_back(i, ni, mib_psi[i] / op.kappa);
      mt.emplace_back(ni, i, std::conj(mib_psi[i]) / op.kappa);
    }
  }
  kt.emplace_back(ni, ni, Complex(std::real(kbb) / k2 - op.theta / k2, 0));
  mt.emplace_back(ni, ni, Complex(std::real(mbb) / k2 + 1.0, 0));

  op.K.resize(ni + 1, ni + 1);
  op.K.setFromTriplets(kt.begin(), kt.end());
  op.K.makeCompressed();
  op.M.resize(ni + 1, ni + 1);
  op.M.setFromTriplets(mt.begin(), mt.end());
  op.M.makeCompressed();
  op.soft = std::move(soft);
  return op;
}

HomSolver::HomSolver(const HomFibreOperator& op, Complex z) : op_(op), z_(z) {
  SpMat A = op.K - z * op.M;
  lu_.compute(A);
  if (lu_.info() != Eigen::Success)
    throw ResonanceError("hom pencil is singular at z");
}

std::pair<Vec, Complex> HomSolver::apply(const Vec& f_full, Complex f_beta) const {
  const int ni = op_.soft->n_i(), ng = op_.soft->n_g();
  if (f_full.size() != ni + ng) throw Error("HomSolver: rhs size mismatch");
  Vec mf = op_.soft->mass_apply(f_full);
  Vec rhs(ni + 1);
  rhs.head(ni) = mf.head(ni);
  rhs[ni] = op_.psi.dot(mf.tail(ng)) / op_.kappa + f_beta;
  Vec x = lu_.solve(rhs);
  if (!x.allFinite()) throw SingularError("hom pencil solve failed");
  return {op_.full_from_reduced(x), x[ni]};
}

// ----- dispersion functions --------------------------------------------------

// The truncated sums carry the Parseval defect of the interior eigenbasis
// (the lift has a trace component the Dirichlet modes cannot represent):
// delta = ||source||^2_Mass - sum_j w_j enters as an affine term, making the
// full-truncation series coincide with the DN quadratic form exactly.
Complex DispersionEvaluator::eval(Complex z) const {
  check_pole_distance(z, poles, weights, 1e-10 * (weights.size() ? weights.maxCoeff() : 0.0));
  double delta = std::max(0.0, total_weight - weights.sum());
  Complex acc(0, 0);
  if (model == Model::I) {
    for (int j = 0; j < poles.size(); ++j)
      acc += weights[j] * (poles[j] - tau2) / (Complex(poles[j], 0) - z);
    return ratio * ((Complex(tau2, 0) - z) * (acc + delta) - theta);
  }
  for (int j = 0; j < poles.size(); ++j)
    acc += weights[j] * poles[j] / (Complex(poles[j], 0) - z);
  return -ratio * (z * (acc + delta) + const_term);
}

double DispersionEvaluator::deriv(double z) const {
  double delta = std::max(0.0, total_weight - weights.sum());
  double acc = delta;
  if (model == Model::I) {
    for (int j = 0; j < poles.size(); ++j) {
      double d = poles[j] - z;
      acc += weights[j] * (poles[j] - tau2) * (poles[j] - tau2) / (d * d);
    }
    return -ratio * acc;
  }
  for (int j = 0; j < poles.size(); ++j) {
    double d = poles[j] - z;
    acc += weights[j] * poles[j] * poles[j] / (d * d);
  }
  return -ratio * acc;
}

double DispersionEvaluator::tail_bound(Complex z) const {
  if (poles.size() == 0) return 0;
  // neglected tail after folding its Parseval mass into the affine term:
  // |amp|^2 * w_tail / dist(lambda_J, z)
  double w_tail = std::max(0.0, total_weight - weights.sum());
  double lamJ = poles[poles.size() - 1];
  double dist = std::abs(z - Complex(lamJ, 0));
  double amp = model == Model::I ? std::abs(Complex(tau2, 0) - z) : std::abs(z);
  if (dist <= 0) return std::numeric_limits<double>::infinity();
  return ratio * amp * amp * w_tail / dist;
}

std::vector<double> DispersionEvaluator::active_poles(double wmin_rel) const {
  std::vector<double> out;
  double wmax = weights.size() ? weights.maxCoeff() : 0.0;
  for (int j = 0; j < poles.size(); ++j)
    if (weights[j] > wmin_rel * wmax) out.push_back(poles[j]);
  return out;
}

DispersionEvaluator make_dispersion_series(Model model, const RegionForms& soft,
                                           const EigenData& eigen, const Vec& psi,
                                           double kappa, double theta, double gamma_len) {
  DispersionEvaluator ev;
  ev.model = model;
  ev.tau = soft.tau;
  ev.tau2 = soft.tau.squaredNorm();
  ev.ratio = 1.0 / (kappa * kappa);
  ev.theta = theta;
  ev.poles = eigen.lambda;
  ev.weights.resize(eigen.J);
  if (model == Model::I) {
    // weights |<Psi~_0, phi_j>|^2 with Psi~_0 = |Gamma|^{-1/2} 1
    for (int j = 0; j < eigen.J; ++j)
      ev.weights[j] = std::norm(eigen.means[j]) / gamma_len;
    ev.total_weight = soft.area / gamma_len;  // ||Psi~_0||^2
  } else {
    // weights |<Psi~_tau, phi_j>|^2 with Psi~_tau = Pi_soft psi_tau
    Vec lift = harmonic_lift(soft, psi).values;
    Vec w = soft.M_ii * lift.head(soft.n_i()) + soft.M_ib.cast<Complex>() * lift.tail(soft.n_g());
    for (int j = 0; j < eigen.J; ++j)
      ev.weights[j] = std::norm(eigen.phi.col(j).dot(w));
    ev.total_weight = std::abs(std::real(soft.mass_inner(lift, lift)));
    // <Lambda_soft psi, psi> = -(energy of the harmonic lift)
    const int ni = soft.n_i(), ng = soft.n_g();
    Vec ki = soft.K_ii * lift.head(ni) + soft.K_ib * psi;
    Vec kb = SpMat(soft.K_ib.adjoint()) * lift.head(ni) + soft.K_bb * psi;
    ev.const_term = -std::real(lift.head(ni).dot(ki) + psi.dot(kb));
  }
  return ev;
}

Complex dispersion_dn(const RegionForms& soft, const Vec& psi, double kappa, double theta,
                      Complex z) {
  // <M_soft(z) psi, psi> as the pencil form evaluated on the z-lift of psi:
  // one interior solve instead of a full Gamma-column Schur build
  LiftField lift = solution_operator(soft, z, psi);
  const int ni = soft.n_i(), ng = soft.n_g();
  const Vec& xi = lift.values;
  Vec ki = soft.K_ii * xi.head(ni) + soft.K_ib * psi;
  Vec kb = SpMat(soft.K_ib.adjoint()) * xi.head(ni) + soft.K_bb * psi;
  Vec mi = soft.M_ii * xi.head(ni) + soft.M_ib.cast<Complex>() * psi;
  Vec mb = soft.M_ib.cast<Complex>().transpose() * xi.head(ni) +
           soft.M_bb.cast<Complex>() * psi;
  Complex form = xi.head(ni).dot(ki - z * mi) + psi.dot(kb - z * mb);
  Complex quad = -form;
  return -(quad + theta) / (kappa * kappa);
}

double polish_root_dn(const RegionForms& soft, const Vec& psi, double kappa, double theta,
                      const DispersionEvaluator& ev, double z0, int max_iter) {
  for (double p : ev.active_poles())
    if (std::abs(z0 - p) < 2 * kPoleGuard * (1.0 + std::abs(p))) return z0;
  double z = z0;
  for (int it = 0; it < max_iter; ++it) {
    double g = std::real(dispersion_dn(soft, psi, kappa, theta, Complex(z, 0))) - z;
    double gp = ev.deriv(z) - 1.0;
    if (!(gp < 0)) break;
    double step = g / gp;
    z -= step;
    if (std::abs(step) <= 1e-12 * (1.0 + std::abs(z))) break;
  }
  return z;
}

DispersionEvaluator make_ktilde(const ZhikovFunction& B, const Mat2& mu_star, double eps,
                                const Vec2& tau) {
  DispersionEvaluator ev;
  ev.model = Model::I;
  ev.tau = tau;
  ev.tau2 = 0.0;  // frozen: only the mu_* term keeps the tau dependence
  ev.ratio = B.ratio;
  ev.theta = (mu_star * tau).dot(tau) / (eps * eps);
  ev.poles = B.poles;
  ev.weights = B.weights;
  ev.total_weight = B.total_weight;
  return ev;
}

// ----- Zhikov function --------------------------------------------------------

Complex ZhikovFunction::operator()(Complex z) const {
  check_pole_distance(z, poles, weights, 1e-8 * (weights.size() ? weights.maxCoeff() : 0.0));
  double delta = std::max(0.0, total_weight - weights.sum());
  Complex acc(delta, 0);
  for (int j = 0; j < poles.size(); ++j)
    acc += weights[j] * poles[j] / (Complex(poles[j], 0) - z);
  return z + z * ratio * acc;
}

double ZhikovFunction::deriv(double z) const {
  double acc = std::max(0.0, total_weight - weights.sum());
  for (int j = 0; j < poles.size(); ++j) {
    double d = poles[j] - z;
    acc += weights[j] * poles[j] * poles[j] / (d * d);
  }
  return 1.0 + ratio * acc;
}

double ZhikovFunction::tail_bound(Complex z) const {
  if (poles.size() == 0) return 0;
  double w_tail = std::max(0.0, total_weight - weights.sum());
  double lamJ = poles[poles.size() - 1];
  double dist = std::abs(z - Complex(lamJ, 0));
  if (dist <= 0) return std::numeric_limits<double>::infinity();
  return std::abs(z) * std::abs(z) * ratio * w_tail / dist;
}

std::vector<double> ZhikovFunction::active_poles(double wmin_rel) const {
  std::vector<double> out;
  double wmax = weights.size() ? weights.maxCoeff() : 0.0;
  for (int j = 0; j < poles.size(); ++j)
    if (weights[j] > wmin_rel * wmax) out.push_back(poles[j]);
  return out;
}

ZhikovFunction zhikov_B(const EigenData& eigen0, double gamma_len, double area_stiff) {
  ZhikovFunction B;
  B.J = eigen0.J;
  B.poles = eigen0.lambda;
  B.ratio = gamma_len / area_stiff;
  B.weights.resize(eigen0.J);
  for (int j = 0; j < eigen0.J; ++j) B.weights[j] = std::norm(eigen0.means[j]) / gamma_len;
  B.total_weight = (1.0 - area_stiff) / gamma_len;  // ||Psi~_0||^2 on the unit cell
  return B;
}

// ----- roots and bands --------------------------------------------------------

namespace {

// root of g(z) = K(z) - z on (a, b), K strictly decreasing; returns nullopt
// when no sign change
std::optional<double> bracket_root(const DispersionEvaluator& ev, double a, double b) {
  double za = a + 1.5 * kPoleGuard * (1.0 + std::abs(a));
  double zb = b - 1.5 * kPoleGuard * (1.0 + std::abs(b));
  if (!(za < zb)) return std::nullopt;
  auto g = [&](double z) { return std::real(ev.eval(Complex(z, 0))) - z; };
  double ga = g(za), gb = g(zb);
  if (!(ga > 0 && gb < 0)) return std::nullopt;
  for (int it = 0; it < 80 && (zb - za) > 1e-8; ++it) {
    double zm = 0.5 * (za + zb);
    double gm = g(zm);
    (gm > 0 ? za : zb) = zm;
  }
  double root = 0.5 * (za + zb);
  // one Newton polish with the analytic series derivative
  double gp = ev.deriv(root) - 1.0;
  if (gp < 0) {
    double step = (std::real(ev.eval(Complex(root, 0))) - root) / gp;
    double polished = root - step;
    if (polished > za - 1e-8 && polished < zb + 1e-8) root = polished;
  }
  return root;
}

}  // namespace

std::vector<double> dispersion_roots(const DispersionEvaluator& ev, double win_lo,
                                     double win_hi) {
  if (!(win_lo >= 0 && win_hi > win_lo)) throw Error("dispersion_roots: bad window");
  std::vector<double> cuts{win_lo};
  for (double p : ev.active_poles())
    if (p > win_lo && p < win_hi) cuts.push_back(p);
  cuts.push_back(win_hi);
  std::vector<double> roots;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
    if (auto r = bracket_root(ev, cuts[k], cuts[k + 1])) roots.push_back(*r);
  return roots;
}

BandStructure limiting_spectrum(
    const std::function<DispersionEvaluator(const Vec2&)>& evaluator_at,
    const std::vector<Vec2>& taus, double win_lo, double win_hi) {
  if (!(win_lo >= 0 && win_hi > win_lo)) throw Error("limiting_spectrum: window must lie in (0, inf)");
  if (taus.empty()) throw Error("limiting_spectrum: empty tau grid");
  BandStructure bs;
  bs.win_lo = win_lo;
  bs.win_hi = win_hi;
  bs.taus = taus;
  bs.roots.resize(taus.size());

  // branch id = number of active poles below the root; stable across tau
  struct Tagged {
    double z;
    int branch;
    std::size_t tau_idx;
  };
  std::vector<Tagged> all;
  for (std::size_t k = 0; k < taus.size(); ++k) {
    DispersionEvaluator ev = evaluator_at(taus[k]);
    bs.model = ev.model;
    auto roots = dispersion_roots(ev, win_lo, win_hi);
    bs.roots[k] = roots;
    auto poles = ev.active_poles();
    for (double r : roots) {
      int branch = static_cast<int>(
          std::lower_bound(poles.begin(), poles.end(), r) - poles.begin());
      all.push_back({r, branch, k});
    }
  }

  std::map<int, BandInterval> by_branch;
  for (const auto& t : all) {
    auto it = by_branch.find(t.branch);
    if (it == by_branch.end()) {
      BandInterval bi;
      bi.lo = bi.hi = t.z;
      bi.tau_lo = bi.tau_hi = taus[t.tau_idx];
      by_branch.emplace(t.branch, bi);
    } else {
      if (t.z < it->second.lo) {
        it->second.lo = t.z;
        it->second.tau_lo = taus[t.tau_idx];
      }
      if (t.z > it->second.hi) {
        it->second.hi = t.z;
        it->second.tau_hi = taus[t.tau_idx];
      }
    }
  }
  for (auto& [branch, bi] : by_branch) bs.bands.push_back(bi);
  std::sort(bs.bands.begin(), bs.bands.end(),
            [](const BandInterval& a, const BandInterval& b) { return a.lo < b.lo; });
  // merge overlaps
  std::vector<BandInterval> merged;
  for (const auto& bi : bs.bands) {
    if (!merged.empty() && bi.lo <= merged.back().hi) {
      if (bi.hi > merged.back().hi) {
        merged.back().hi = bi.hi;
        merged.back().tau_hi = bi.tau_hi;
      }
    } else {
      merged.push_back(bi);
    }
  }
  bs.bands = std::move(merged);
  return bs;
}

// ----- whole-space multiplier -------------------------------------------------

Mat2 hom_symbol(const Mat2& mu_star, double ratio) { return -ratio * mu_star; }

Vec wholespace_apply(const Vec& F_hat, const std::vector<Vec2>& t_grid, Complex z,
                     const Mat2& A_hom, const ZhikovFunction& B) {
  if (F_hat.size() != static_cast<int>(t_grid.size()))
    throw Error("wholespace_apply: grid size mismatch");
  Complex Bz = B(z);
  Vec out(F_hat.size());
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const Vec2& t = t_grid[k];
    Complex denom = Complex((A_hom * t).dot(t), 0) - Bz;
    if (std::abs(denom) < 1e-8)
      throw MultiplierSingularError("effective symbol vanishes on the grid");
    out[static_cast<int>(k)] = F_hat[static_cast<int>(k)] / denom;
  }
  return out;
}

}  // namespace homog
