#include <doctest.h>

#include <cmath>

#include "homog/mesh.hpp"
#include "homog/steklov.hpp"
#include "homog/util.hpp"

using namespace homog;

namespace {
CellMesh make_mesh(Model m, double h) {
  CellGeometry g;
  g.model = m;
  return build_cell(g, h);
}
}  // namespace

TEST_CASE("mu_0 = 0 and psi_0 constant for both models") {
  for (Model model : {Model::I, Model::II}) {
    auto mesh = make_mesh(model, 0.05);
    auto rf = assemble_region(mesh, Region::stiff, Vec2::Zero());
    auto sd = steklov_solve(rf);
    CHECK(std::abs(sd.mu) < 1e-10);
    CHECK(sd.gap > 1e-6);
    // B-normalized constant: |Gamma_d|^{-1/2} 1
    double amp = 1.0 / std::sqrt(mesh.gamma_length());
    CHECK((sd.psi - Vec::Constant(sd.psi.size(), amp)).lpNorm<Eigen::Infinity>() < 1e-8);
    // projection idempotent and B-Hermitian
    Mat B = Mat(rf.B_gamma.cast<Complex>());
    CHECK((sd.projection * sd.projection - sd.projection).norm() < 1e-10);
    CHECK((Mat(B * sd.projection) - Mat(B * sd.projection).adjoint()).norm() < 1e-10);
  }
}

TEST_CASE("Model II: mu vanishes under refinement, psi approaches the plane wave") {
  Vec2 tau(1.0, 0.5);
  auto mesh = make_mesh(Model::II, 0.04);
  std::vector<double> hs, mus, psi_errs;
  for (int k = 0; k < 2; ++k) {
    auto rf = assemble_region(mesh, Region::stiff, tau);
    auto sd = steklov_solve(rf);
    hs.push_back(mesh.h);
    mus.push_back(std::abs(sd.mu));
    double amp = 1.0 / std::sqrt(mesh.gamma_length());
    Vec exact(rf.n_g());
    for (int g = 0; g < rf.n_g(); ++g)
      exact[g] = amp * std::exp(Complex(0, -tau.dot(mesh.dof_position[rf.gamma_dofs[g]])));
    // align the free eigenvector phase before comparing
    Complex overlap = exact.dot(Vec(rf.B_gamma.cast<Complex>() * sd.psi));
    Vec aligned = sd.psi * (std::conj(overlap) / std::abs(overlap));
    psi_errs.push_back((aligned - exact).lpNorm<Eigen::Infinity>() / amp);
    if (k < 1) mesh = refine(mesh);
  }
  CHECK(mus[1] < mus[0] / 3.2);  // slope >= 1.7 per halving
  CHECK(psi_errs[1] < psi_errs[0]);
  CHECK(psi_errs[1] < 2e-3);
}

TEST_CASE("Model I: mu negative, quadratic in tau, even under tau -> -tau") {
  auto mesh = make_mesh(Model::I, 0.04);
  auto solve_mu = [&](const Vec2& t) {
    return steklov_solve(assemble_region(mesh, Region::stiff, t)).mu;
  };
  double m1 = solve_mu(Vec2(0.1, 0.0));
  CHECK(m1 < 0);
  CHECK(solve_mu(Vec2(-0.1, 0.0)) == doctest::Approx(m1).epsilon(1e-9));
  // |mu| ~ s^2: ratios of mu/s^2 stay within 2%
  double r1 = solve_mu(Vec2(0.2, 0)) / 0.04;
  double r2 = solve_mu(Vec2(0.1, 0)) / 0.01;
  double r3 = solve_mu(Vec2(0.05, 0)) / 0.0025;
  CHECK(std::abs(r1 / r2 - 1.0) < 0.02);
  CHECK(std::abs(r3 / r2 - 1.0) < 0.02);
}

TEST_CASE("projection continuity: P(tau) -> P(0) linearly in |tau|") {
  auto mesh = make_mesh(Model::I, 0.05);
  auto p_of = [&](const Vec2& t) {
    return steklov_solve(assemble_region(mesh, Region::stiff, t)).projection;
  };
  Mat p0 = p_of(Vec2::Zero());
  std::vector<double> ss{0.4, 0.2, 0.1}, defects;
  for (double s : ss) defects.push_back((p_of(Vec2(s, 0)) - p0).norm());
  CHECK(defects[1] < 0.7 * defects[0]);
  CHECK(defects[2] < 0.7 * defects[1]);
  // bounded ratio defect/|tau|
  for (std::size_t i = 0; i < ss.size(); ++i) CHECK(defects[i] / ss[i] < 1.0);
}

TEST_CASE("effective tensor: Model I negative definite and isotropic; Model II zero") {
  auto mesh = make_mesh(Model::I, 0.04);
  auto et = effective_tensor(mesh, Model::I, 0.1);
  Eigen::SelfAdjointEigenSolver<Mat2> es(et.mu_star);
  CHECK(es.eigenvalues().maxCoeff() < 0);
  CHECK(std::abs(et.mu_star(0, 1)) < 0.01 * std::abs(et.mu_star(0, 0)));
  CHECK(std::abs(et.mu_star(0, 0) - et.mu_star(1, 1)) < 0.01 * std::abs(et.mu_star(0, 0)));

  auto mesh2 = make_mesh(Model::II, 0.04);
  auto et2 = effective_tensor(mesh2, Model::II, 0.1);
  CHECK(et2.mu_star.norm() == 0.0);
  CHECK(et2.fit_residual <= 10.0 * mesh2.h * mesh2.h);

  CHECK_THROWS_AS(effective_tensor(mesh, Model::I, 0.5), FitError);
}

TEST_CASE("effective tensor fit is stable under halving the stencil step") {
  auto mesh = make_mesh(Model::I, 0.05);
  auto m1 = effective_tensor(mesh, Model::I, 0.2).mu_star;
  auto m2 = effective_tensor(mesh, Model::I, 0.1).mu_star;
  auto m3 = effective_tensor(mesh, Model::I, 0.05).mu_star;
  double d1 = (m2 - m1).norm(), d2 = (m3 - m2).norm();
  CHECK(d2 <= 0.35 * d1);  // quartic stencil error quarters per halving
}

TEST_CASE("germ oracle: positive definite, isotropic, matches mu_*") {
  auto mesh = make_mesh(Model::I, 0.04);
  Mat2 q = germ_oracle(mesh);
  Eigen::SelfAdjointEigenSolver<Mat2> es(q);
  CHECK(es.eigenvalues().minCoeff() > 0);
  CHECK(std::abs(q(0, 1)) < 0.01 * q(0, 0));
  CHECK(std::abs(q(0, 0) - q(1, 1)) < 0.01 * q(0, 0));

  auto et = effective_tensor(mesh, Model::I, 0.1);
  double ratio = mesh.area(Region::stiff) / mesh.gamma_length();
  CHECK((et.mu_star + ratio * q).norm() / q.norm() <= 0.02);

  auto mesh2 = make_mesh(Model::II, 0.05);
  CHECK_THROWS_AS(germ_oracle(mesh2), ModelMismatchError);
}

TEST_CASE("lambda_delta: Hermitian, vanishes at tau=0, consistent with mu_*") {
  auto mesh = make_mesh(Model::I, 0.04);
  double eps = 0.3;

  auto ld0 = lambda_delta(mesh, Vec2::Zero(), eps, 0.02);
  CHECK(ld0.matrix.norm() == 0.0);

  auto et = effective_tensor(mesh, Model::I, 0.1);
  Vec2 dir = Vec2(1.0, 0.4).normalized();
  std::vector<double> ss{0.2, 0.1, 0.05}, resids;
  for (double s : ss) {
    Vec2 tau = s * dir;
    auto ld = lambda_delta(mesh, tau, eps, 0.02);
    CHECK((ld.matrix - ld.matrix.adjoint()).norm() <=
          1e-6 * std::max(1e-300, ld.matrix.norm()));
    auto rft = assemble_region(mesh, Region::stiff, tau);
    Mat lam = dtn_matrix(rft, std::nullopt, 1.0);
    double total = std::real(ld.psi0.dot(Vec(lam * ld.psi0))) + eps * eps * ld.scalar;
    resids.push_back(std::abs(total - (et.mu_star * tau).dot(tau)));
  }
  auto [slope, r2] = loglog_slope(ss, resids);
  CHECK(slope >= 2.5);

  CHECK_THROWS_AS(lambda_delta(mesh, Vec2(0.1, 0), eps, 0.2), FitError);
  auto mesh2 = make_mesh(Model::II, 0.05);
  CHECK_THROWS_AS(lambda_delta(mesh2, Vec2(0.1, 0), eps, 0.02), ModelMismatchError);
}
