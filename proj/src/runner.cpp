#include "homog/runner.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "homog/util.hpp"
#include "homog/validation.hpp"

namespace homog {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Vec random_cvec(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = Complex(d(rng), d(rng));
  return v;
}

double op_norm(const Mat& A) {
  Eigen::JacobiSVD<Mat> svd(A);
  return svd.singularValues().maxCoeff();
}

std::string fmt_tau(const Vec2& t) {
  // semicolon separator keeps CSV cells comma-free
  return "(" + fmt_double(t.x()) + ";" + fmt_double(t.y()) + ")";
}

struct FileSink {
  fs::path dir;
  std::vector<std::pair<std::string, std::string>>* files;
  void write(const std::string& name, const std::string& content) const {
    fs::path p = dir / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write " + p.string());
    f << content;
    f.close();
    files->emplace_back(name, hash_hex(fnv1a64(content)));
  }
};

}  // namespace

bool RunManifest::all_checks_passed() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return errors.empty();
}

std::string RunManifest::digest() const {
  std::ostringstream os;
  os << version << "\n" << config_echo << "\n";
  for (const auto& c : checks)
    os << c.name << "," << (c.passed ? 1 : 0) << "," << fmt_double(c.value) << ","
       << fmt_double(c.threshold) << "\n";
  for (const auto& [name, hash] : files) os << name << "," << hash << "\n";
  for (const auto& e : errors) os << e << "\n";
  return hash_hex(fnv1a64(os.str()));
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["version"] = version;
  j["config"] = nlohmann::ordered_json::parse(config_echo);
  nlohmann::ordered_json checks_j = nlohmann::ordered_json::array();
  for (const auto& c : checks)
    checks_j.push_back({{"name", c.name},
                        {"passed", c.passed},
                        {"value", c.value},
                        {"threshold", c.threshold}});
  j["checks"] = checks_j;
  nlohmann::ordered_json files_j = nlohmann::ordered_json::array();
  for (const auto& [name, hash] : files) files_j.push_back({{"name", name}, {"hash", hash}});
  j["files"] = files_j;
  j["errors"] = errors;
  j["manifest_digest"] = digest();
  // non-normative timing block, excluded from the digest
  nlohmann::ordered_json times_j = nlohmann::ordered_json::array();
  for (const auto& [task, ms] : wall_times_ms)
    times_j.push_back({{"task", task}, {"wall_ms", ms}});
  j["wall_times_ms"] = times_j;
  return j.dump(2);
}

std::vector<CheckResult> identity_suite(const ExperimentConfig& config) {
  std::vector<CheckResult> out;
  CellGeometry geom{config.model, config.center, config.radius};
  CellMesh mesh = build_cell(geom, config.h);

  const std::vector<double> eps_sweep{0.5, 0.2, 0.1};
  const std::vector<Complex> z_sweep{Complex(1, 1), Complex(-1, 0.5)};
  const auto taus = tau_grid(3);

  double worst_krein = 0, worst_add = 0, worst_scale = 0, worst_diff = 0;
  double worst_herglotz = 0, worst_sign = 0;

  for (const Vec2& tau : taus) {
    auto soft = std::make_shared<RegionForms>(assemble_region(mesh, Region::soft, tau));
    auto stiff = std::make_shared<RegionForms>(assemble_region(mesh, Region::stiff, tau));

    // DN sign convention: Lambda kinds non-positive
    for (const RegionForms* rf : {soft.get(), stiff.get()}) {
      Mat lam = dtn_matrix(*rf, std::nullopt, 1.0);
      Mat lh = 0.5 * (lam + lam.adjoint());
      Eigen::SelfAdjointEigenSolver<Mat> es(lh);
      worst_sign = std::max(worst_sign, es.eigenvalues().maxCoeff() / op_norm(lam));
    }
    // Herglotz at z = 1 + 2i
    {
      Complex z(1, 2);
      Mat M = m_total_matrix(*soft, *stiff, z, 0.2);
      Mat ImM = (M - M.adjoint()) / Complex(0, 2);
      Eigen::SelfAdjointEigenSolver<Mat> es(ImM);
      worst_herglotz = std::max(worst_herglotz, -es.eigenvalues().minCoeff() / op_norm(M));
    }
    // difference identity via lift grams at (1+i, 2-i)
    {
      Complex z(1, 1), zeta(2, -1);
      double eps = 0.2, w = 1.0 / (eps * eps);
      Mat D1 = m_total_matrix(*soft, *stiff, z, eps) - m_total_matrix(*soft, *stiff, zeta, eps);
      const int ng = soft->n_g();
      Mat D2 = Mat::Zero(ng, ng);
      for (auto [rf, weight] : {std::pair<const RegionForms*, double>{soft.get(), 1.0},
                                {stiff.get(), w}}) {
        Eigen::SparseLU<SpMat> lu_zeta(
            SpMat(weight * rf->K_ii - zeta * rf->M_ii.cast<Complex>()));
        Eigen::SparseLU<SpMat> lu_zb(
            SpMat(weight * rf->K_ii - std::conj(z) * rf->M_ii.cast<Complex>()));
        Mat Lz(rf->n_i() + ng, ng), Lzeta(rf->n_i() + ng, ng);
        for (int b = 0; b < ng; ++b) {
          Vec e = Vec::Zero(ng);
          e[b] = 1;
          Vec rz = weight * (rf->K_ib * e) - zeta * (rf->M_ib.cast<Complex>() * e);
          Vec rb = weight * (rf->K_ib * e) - std::conj(z) * (rf->M_ib.cast<Complex>() * e);
          Lzeta.col(b).head(rf->n_i()) = -lu_zeta.solve(rz);
          Lzeta.col(b).tail(ng) = e;
          Lz.col(b).head(rf->n_i()) = -lu_zb.solve(rb);
          Lz.col(b).tail(ng) = e;
        }
        D2 += (z - zeta) * mass_gram(*rf, Lz, Lzeta);
      }
      worst_diff = std::max(worst_diff,
                            op_norm(D1 - D2) / op_norm(m_total_matrix(*soft, *stiff, z, 0.2)));
    }

    for (double eps : eps_sweep) {
      double w = 1.0 / (eps * eps);
      auto fibre = assemble_fibre(soft, stiff, mesh, eps);
      for (Complex z : z_sweep) {
        // Krein residual
        Vec f = random_cvec(fibre.n(), config.seed);
        Vec u = krein_resolvent(fibre, z, f);
        Vec mf = fibre.M.cast<Complex>() * f;
        Vec res = (fibre.K - z * fibre.M.cast<Complex>()) * u - mf;
        worst_krein = std::max(worst_krein, res.norm() / mf.norm());
        // additivity against the monolithic Schur complement
        Mat M_sum = m_total_matrix(*soft, *stiff, z, eps);
        const int ng = soft->n_g();
        {
          SpMat A = fibre.K - z * fibre.M.cast<Complex>();
          // order: all interiors then gamma
          std::vector<int> pos(fibre.n(), -1);
          int ni = 0;
          for (int d : soft->interior_dofs) pos[d] = ni++;
          for (int d : stiff->interior_dofs) pos[d] = ni++;
          for (int k = 0; k < ng; ++k) pos[soft->gamma_dofs[k]] = ni + k;
          std::vector<Eigen::Triplet<Complex>> pt;
          Mat Q = Mat::Zero(ni, ng), Qp = Mat::Zero(ng, ni), R = Mat::Zero(ng, ng);
          for (int c = 0; c < A.outerSize(); ++c)
            for (SpMat::InnerIterator it(A, c); it; ++it) {
              int r = pos[it.row()], cc = pos[it.col()];
              if (r < ni && cc < ni)
                pt.emplace_back(r, cc, it.value());
              else if (r < ni)
                Q(r, cc - ni) = it.value();
              else if (cc < ni)
                Qp(r - ni, cc) = it.value();
              else
                R(r - ni, cc - ni) = it.value();
            }
          SpMat P(ni, ni);
          P.setFromTriplets(pt.begin(), pt.end());
          Eigen::SparseLU<SpMat> lu(P);
          Mat S_full = R - Qp * lu.solve(Q);
          worst_add = std::max(worst_add, op_norm(M_sum + S_full) / op_norm(M_sum));
        }
        // stiff scaling identity
        {
          Mat lhs = dtn_matrix(*stiff, z, w);
          Mat rhs = w * dtn_matrix(*stiff, eps * eps * z, 1.0);
          worst_scale = std::max(worst_scale, op_norm(lhs - rhs) / op_norm(lhs));
        }
      }
    }
  }

  out.push_back({"krein_residual", worst_krein <= 1e-9, worst_krein, 1e-9});
  out.push_back({"m_additivity", worst_add <= 1e-12, worst_add, 1e-12});
  out.push_back({"m_stiff_scaling", worst_scale <= 1e-12, worst_scale, 1e-12});
  out.push_back({"m_difference_identity", worst_diff <= 1e-9, worst_diff, 1e-9});
  out.push_back({"herglotz_positivity", worst_herglotz <= 1e-10, worst_herglotz, 1e-10});
  out.push_back({"dn_nonpositivity", worst_sign <= 1e-10, worst_sign, 1e-10});
  return out;
}

RunManifest run_experiment(const ExperimentConfig& config) {
  RunManifest man;
  man.version = kToolkitVersion;
  man.config_echo = config.echo_json();

  fs::create_directories(config.output_dir);
  FileSink sink{fs::path(config.output_dir), &man.files};

  auto timed = [&](const std::string& name, auto&& fn) {
    auto t0 = Clock::now();
    try {
      fn();
    } catch (const Error& e) {
      man.errors.push_back(name + ": " + e.what());
    }
    man.wall_times_ms.emplace_back(name, ms_since(t0));
  };

  CellGeometry geom{config.model, config.center, config.radius};
  CellMesh mesh = build_cell(geom, config.h);
  for (int r = 0; r < config.refinements; ++r) mesh = refine(mesh);

  timed("mesh", [&] {
    std::ostringstream os;
    export_text(mesh, os);
    sink.write("mesh.txt", os.str());
  });

  std::optional<Mat2> mu_star;
  auto need_mu_star = [&]() -> const Mat2& {
    if (!mu_star) mu_star = effective_tensor(mesh, config.model, 0.1).mu_star;
    return *mu_star;
  };

  if (config.has_task("steklov")) {
    timed("steklov", [&] {
      CsvWriter csv({"tau1", "tau2", "mu", "gap"});
      const int nt = static_cast<int>(config.taus.size());
      std::vector<SteklovData> rows(nt);
      parallel_for(nt, config.threads, [&](int i) {
        rows[i] = steklov_solve(assemble_region(mesh, Region::stiff, config.taus[i]));
      });
      for (int i = 0; i < nt; ++i)
        csv.add_row({fmt_double(config.taus[i].x()), fmt_double(config.taus[i].y()),
                     fmt_double(rows[i].mu), fmt_double(rows[i].gap)});
      sink.write("steklov.csv", csv.str());
    });
  }

  if (config.has_task("dispersion")) {
    timed("dispersion", [&] {
      CsvWriter csv({"model", "tau1", "tau2", "re_z", "im_z", "re_K", "im_K", "tail_bound"});
      double eps_ref = config.eps_list.back();  // Model I theta needs an eps
      const int nt = static_cast<int>(config.taus.size());
      std::vector<std::vector<std::array<double, 3>>> vals(nt);
      parallel_for(nt, config.threads, [&](int i) {
        const Vec2& tau = config.taus[i];
        auto soft = assemble_region(mesh, Region::soft, tau);
        int J = std::min(config.truncation_J, soft.n_i());
        auto ed = dirichlet_eigenpairs(soft, J);
        DispersionEvaluator ev;
        if (config.model == Model::I) {
          double theta = (need_mu_star() * tau).dot(tau) / (eps_ref * eps_ref);
          ev = make_dispersion_series(Model::I, soft, ed, Vec(), kappa_model1(mesh), theta,
                                      mesh.gamma_length());
        } else {
          auto stiff = assemble_region(mesh, Region::stiff, tau);
          auto sd = steklov_solve(stiff);
          double kappa = kappa_from_lift(stiff, sd.psi);
          ev = make_dispersion_series(Model::II, soft, ed, sd.psi, kappa, 0.0,
                                      mesh.gamma_length());
        }
        for (const Complex& z : config.zs) {
          Complex K = ev.eval(z);
          vals[i].push_back({K.real(), K.imag(), ev.tail_bound(z)});
        }
      });
      for (int i = 0; i < nt; ++i)
        for (std::size_t kz = 0; kz < config.zs.size(); ++kz)
          csv.add_row({to_string(config.model), fmt_double(config.taus[i].x()),
                       fmt_double(config.taus[i].y()), fmt_double(config.zs[kz].real()),
                       fmt_double(config.zs[kz].imag()), fmt_double(vals[i][kz][0]),
                       fmt_double(vals[i][kz][1]), fmt_double(vals[i][kz][2])});
      sink.write("dispersion.csv", csv.str());
    });
  }

  if (config.has_task("bands")) {
    timed("bands", [&] {
      auto emit = [&](const std::string& name, double eps_for_theta) {
        auto evaluator_at = [&](const Vec2& tau) {
          auto soft = assemble_region(mesh, Region::soft, tau);
          auto ed = dirichlet_eigenpairs_upto(soft, 2 * config.win_hi + 60.0);
          if (config.model == Model::I) {
            double theta =
                (need_mu_star() * tau).dot(tau) / (eps_for_theta * eps_for_theta);
            return make_dispersion_series(Model::I, soft, ed, Vec(), kappa_model1(mesh),
                                          theta, mesh.gamma_length());
          }
          auto stiff = assemble_region(mesh, Region::stiff, tau);
          auto sd = steklov_solve(stiff);
          return make_dispersion_series(Model::II, soft, ed, sd.psi,
                                        kappa_from_lift(stiff, sd.psi), 0.0,
                                        mesh.gamma_length());
        };
        auto bs = limiting_spectrum(evaluator_at, config.taus,
                                    std::max(config.win_lo, 1e-6), config.win_hi);
        CsvWriter csv({"band_index", "lower", "upper", "extremal_tau_lower", "extremal_tau_upper"});
        for (std::size_t b = 0; b < bs.bands.size(); ++b)
          csv.add_row({std::to_string(b), fmt_double(bs.bands[b].lo),
                       fmt_double(bs.bands[b].hi),
                       fmt_tau(bs.bands[b].tau_lo), fmt_tau(bs.bands[b].tau_hi)});
        sink.write(name, csv.str());
      };
      if (config.model == Model::II) {
        emit("bands.csv", 1.0);  // K_II carries no eps
      } else {
        for (double eps : config.eps_list)
          emit("bands_eps" + fmt_double(eps) + ".csv", eps);
      }
    });
  }

  if (config.has_task("convergence")) {
    timed("convergence", [&] {
      ConvergenceConfig cc;
      cc.model = config.model;
      cc.taus = config.taus;
      cc.zs = config.zs;
      cc.eps_list = config.eps_list;
      cc.threads = config.threads;
      cc.distance.seed = config.seed;
      auto rep = convergence_study(mesh, cc);
      CsvWriter csv({"model", "tau1", "tau2", "re_z", "im_z", "eps", "distance", "slope",
                     "floor_ratio"});
      const int nz = static_cast<int>(config.zs.size());
      const int ne = static_cast<int>(config.eps_list.size());
      for (std::size_t r = 0; r < rep.rows.size(); ++r) {
        const auto& row = rep.rows[r];
        const auto& srow = rep.slopes[r / ne / nz * nz + (r / ne) % nz];
        csv.add_row({to_string(config.model), fmt_double(row.tau.x()), fmt_double(row.tau.y()),
                     fmt_double(row.z.real()), fmt_double(row.z.imag()), fmt_double(row.eps),
                     fmt_double(row.distance), fmt_double(srow.slope),
                     std::isnan(srow.floor_ratio) ? "" : fmt_double(srow.floor_ratio)});
      }
      sink.write("convergence.csv", csv.str());
    });
  }

  if (config.has_task("identities")) {
    timed("identities", [&] {
      auto checks = identity_suite(config);
      man.checks.insert(man.checks.end(), checks.begin(), checks.end());
    });
  }

  std::string manifest_json = man.to_json();
  {
    fs::path p = fs::path(config.output_dir) / "manifest.json";
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write " + p.string());
    f << manifest_json;
  }
  return man;
}

}  // namespace homog
