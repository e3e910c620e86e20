#include <doctest.h>

#include <cmath>
#include <Eigen/SparseLU>

#include "homog/assembly.hpp"
#include "homog/mesh.hpp"
#include "homog/util.hpp"

using namespace homog;

namespace {
CellMesh make_mesh(Model m, double h) {
  CellGeometry g;
  g.model = m;
  return build_cell(g, h);
}

// full magnetic stiffness over the whole torus, both regions at unit weight
SpMat whole_torus_stiffness(const CellMesh& mesh, const Vec2& tau) {
  auto soft = std::make_shared<RegionForms>(assemble_region(mesh, Region::soft, tau));
  auto stiff = std::make_shared<RegionForms>(assemble_region(mesh, Region::stiff, tau));
  return assemble_fibre(soft, stiff, mesh, 1.0).K;
}
}  // namespace

TEST_CASE("constants are 0-harmonic at tau=0 on interior rows") {
  auto mesh = make_mesh(Model::I, 0.06);
  for (Region r : {Region::soft, Region::stiff}) {
    auto rf = assemble_region(mesh, r, Vec2::Zero());
    Vec ones_i = Vec::Ones(rf.n_i()), ones_g = Vec::Ones(rf.n_g());
    Vec res = rf.K_ii * ones_i + rf.K_ib * ones_g;
    CHECK(res.lpNorm<Eigen::Infinity>() < 1e-13);
  }
}

TEST_CASE("assembly is exactly Hermitian and conjugate under tau -> -tau") {
  auto mesh = make_mesh(Model::II, 0.06);
  Vec2 tau(0.9, -1.7);
  auto rf = assemble_region(mesh, Region::soft, tau);
  SpMat d_ii = SpMat(rf.K_ii - SpMat(rf.K_ii.adjoint()));
  CHECK(Mat(d_ii).cwiseAbs().maxCoeff() == 0.0);
  SpMat d_bb = SpMat(rf.K_bb - SpMat(rf.K_bb.adjoint()));
  CHECK(Mat(d_bb).cwiseAbs().maxCoeff() == 0.0);

  auto rf_neg = assemble_region(mesh, Region::soft, -tau);
  CHECK((Mat(rf.K_ii) - Mat(rf_neg.K_ii).conjugate()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((Mat(rf.K_ib) - Mat(rf_neg.K_ib).conjugate()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("plane wave e^{-i tau x} is tau-harmonic at rate >= 2") {
  // (grad + i tau) e^{-i tau x} = 0 analytically, so the interior-row residual
  // of K applied to the sampled wave vanishes under refinement.
  Vec2 tau(1.3, 0.6);
  std::vector<double> hs, errs;
  auto mesh = make_mesh(Model::I, 0.0625);
  for (int k = 0; k < 3; ++k) {
    // soft disk region: no periodic wrap, sampling is single-valued
    auto rf = assemble_region(mesh, Region::soft, tau);
    Vec v(rf.n_i() + rf.n_g());
    auto sample = [&](int dof) {
      const Vec2& p = mesh.dof_position[dof];
      return std::exp(Complex(0, -tau.dot(p)));
    };
    for (int i = 0; i < rf.n_i(); ++i) v[i] = sample(rf.interior_dofs[i]);
    for (int g = 0; g < rf.n_g(); ++g) v[rf.n_i() + g] = sample(rf.gamma_dofs[g]);
    Vec res = rf.K_ii * v.head(rf.n_i()) + rf.K_ib * v.tail(rf.n_g());
    hs.push_back(mesh.h);
    errs.push_back(res.norm());
    if (k < 2) mesh = refine(mesh);
  }
  auto [slope, r2] = loglog_slope(hs, errs);
  CHECK(slope >= 1.95);
  CHECK(r2 > 0.99);
}

TEST_CASE("fibre operator: weights, PSD, contrast guard") {
  auto mesh = make_mesh(Model::I, 0.06);
  Vec2 tau(1.0, 1.0);
  auto soft = std::make_shared<RegionForms>(assemble_region(mesh, Region::soft, tau));
  auto stiff = std::make_shared<RegionForms>(assemble_region(mesh, Region::stiff, tau));

  // eps = 1: equals the plain magnetic Laplacian of the whole torus
  auto fib1 = assemble_fibre(soft, stiff, mesh, 1.0);
  SpMat whole = whole_torus_stiffness(mesh, tau);
  CHECK((Mat(fib1.K) - Mat(whole)).cwiseAbs().maxCoeff() < 1e-15);

  CHECK_THROWS_AS(assemble_fibre(soft, stiff, mesh, 0.0), ContrastError);
  CHECK_THROWS_AS(assemble_fibre(soft, stiff, mesh, 1.5), ContrastError);

  auto fib = assemble_fibre(soft, stiff, mesh, 0.1);
  SpMat dk = SpMat(fib.K - SpMat(fib.K.adjoint()));
  CHECK(Mat(dk).cwiseAbs().maxCoeff() == 0.0);
  EigResult low = smallest_eigenpairs(fib.K, SpMat(fib.M.cast<Complex>()), 1, -1.0);
  CHECK(low.values[0] >= -1e-9);
}

TEST_CASE("lowest nonzero fibre eigenvalue grows as eps shrinks at tau=0") {
  auto mesh = make_mesh(Model::I, 0.06);
  auto ev = [&](double eps) {
    auto fib = assemble_fibre(mesh, Vec2::Zero(), eps);
    EigResult r = smallest_eigenpairs(fib.K, SpMat(fib.M.cast<Complex>()), 2, -1.0);
    return r.values[1];  // values[0] ~ 0 (constants)
  };
  CHECK(ev(0.1) > ev(0.2));
}

TEST_CASE("disk Dirichlet eigenvalues match the Bessel oracle under refinement") {
  const double j01 = 2.404825557695773;
  const double lam1_exact = (j01 / 0.25) * (j01 / 0.25);
  auto mesh = make_mesh(Model::I, 0.0625);
  std::vector<double> hs, errs, lam1s;
  for (int k = 0; k < 3; ++k) {
    auto rf = assemble_region(mesh, Region::soft, Vec2::Zero());
    auto ed = dirichlet_eigenpairs(rf, 3);
    hs.push_back(mesh.h);
    lam1s.push_back(ed.lambda[0]);
    errs.push_back(std::abs(ed.lambda[0] - lam1_exact));
    if (k < 2) mesh = refine(mesh);
  }
  CHECK(std::abs(lam1s.back() - lam1_exact) / lam1_exact < 0.01);
  auto [slope, r2] = loglog_slope(hs, errs);
  CHECK(slope >= 1.8);
  // conforming elements approach from above
  CHECK(lam1s[0] > lam1s[1]);
  CHECK(lam1s[1] > lam1s[2]);
  CHECK(lam1s[2] > lam1_exact);
}

TEST_CASE("soft-disk Dirichlet spectrum is tau-independent (gauge)") {
  auto mesh = make_mesh(Model::I, 0.04);
  Vec2 tau(0.8, -0.5);
  auto rf0 = assemble_region(mesh, Region::soft, Vec2::Zero());
  auto rft = assemble_region(mesh, Region::soft, tau);
  auto e0 = dirichlet_eigenpairs(rf0, 4);
  auto et = dirichlet_eigenpairs(rft, 4);
  // discrete congruence with the mesh-sampled gauge leaves the spectrum
  // exactly invariant
  {
    Vec gauge(rf0.n_i());
    for (int i = 0; i < rf0.n_i(); ++i)
      gauge[i] = std::exp(Complex(0, -tau.dot(mesh.dof_position[rf0.interior_dofs[i]])));
    Mat Kg = gauge.asDiagonal().inverse() * Mat(rf0.K_ii) * gauge.asDiagonal();
    Mat Mg = gauge.asDiagonal().inverse() * Mat(rf0.M_ii.cast<Complex>()) * gauge.asDiagonal();
    EigResult gauged = dense_generalized(Kg, Mg);
    for (int j = 0; j < 4; ++j)
      CHECK(std::abs(gauged.values[j] - e0.lambda[j]) / e0.lambda[j] < 1e-8);
  }
  // ungauged agreement improves under refinement at rate >= 2
  std::vector<double> hs, errs;
  auto m2 = mesh;
  for (int k = 0; k < 2; ++k) {
    auto a = dirichlet_eigenpairs(assemble_region(m2, Region::soft, Vec2::Zero()), 1);
    auto b = dirichlet_eigenpairs(assemble_region(m2, Region::soft, tau), 1);
    hs.push_back(m2.h);
    errs.push_back(std::abs(a.lambda[0] - b.lambda[0]));
    if (k < 1) m2 = refine(m2);
  }
  CHECK(errs[1] < errs[0] / 3.0);

  // orthonormality invariant
  Mat gram = et.phi.adjoint() * Mat(rft.M_ii.cast<Complex>()) * et.phi;
  CHECK((gram - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("window eigensolver agrees with smallest-block solver") {
  auto mesh = make_mesh(Model::I, 0.05);
  auto rf = assemble_region(mesh, Region::soft, Vec2(0.3, 0.2));
  auto ed = dirichlet_eigenpairs(rf, 8);
  double hi = ed.lambda[6] + 0.5 * (ed.lambda[7] - ed.lambda[6]);
  EigOptions opts;
  opts.dense_threshold = 10;  // force the sparse multi-shift path
  EigResult win = eigenpairs_in_window(rf.K_ii, SpMat(rf.M_ii.cast<Complex>()),
                                       ed.lambda[0] - 1.0, hi, opts);
  REQUIRE(win.values.size() == 7);
  for (int j = 0; j < 7; ++j)
    CHECK(std::abs(win.values[j] - ed.lambda[j]) < 1e-8 * (1 + std::abs(ed.lambda[j])));
}
