#include "homog/config.hpp"

#include <algorithm>
#include <json.hpp>
#include <set>

#include "homog/util.hpp"

namespace homog {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& reason) {
  throw ConfigError(path + ": " + reason);
}

double get_number(const Json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

}  // namespace

bool ExperimentConfig::has_task(const std::string& name) const {
  return std::find(tasks.begin(), tasks.end(), name) != tasks.end();
}

std::string ExperimentConfig::echo_json() const {
  Json j;
  j["model"] = to_string(model);
  j["center"] = {center.x(), center.y()};
  j["radius"] = radius;
  j["mesh"] = {{"h", h}, {"refinements", refinements}};
  Json sweep;
  sweep["eps"] = eps_list;
  if (tau_grid_n > 0) {
    sweep["tau_grid"] = tau_grid_n;
  } else {
    Json pts = Json::array();
    for (const auto& t : taus) pts.push_back({t.x(), t.y()});
    sweep["tau_grid"] = pts;
  }
  Json zlist = Json::array();
  for (const auto& z : zs) zlist.push_back({z.real(), z.imag()});
  sweep["z"] = zlist;
  sweep["window"] = {win_lo, win_hi};
  j["sweep"] = sweep;
  j["truncation_J"] = truncation_J;
  j["tasks"] = tasks;
  j["output_dir"] = output_dir;
  j["seed"] = seed;
  j["threads"] = threads;
  return j.dump(2);
}

ExperimentConfig validate_config(const std::string& raw) {
  Json j;
  try {
    j = Json::parse(raw);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config is not well-formed JSON: ") + e.what());
  }
  if (!j.is_object()) fail("$", "expected a JSON object");

  static const std::set<std::string> known{"model",  "center", "radius",     "mesh",
                                           "sweep",  "truncation_J", "tasks",
                                           "output_dir", "seed", "threads"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) fail(it.key(), "unknown field");

  ExperimentConfig cfg;
  if (!j.contains("model")) fail("model", "required field missing");
  std::string ms = j["model"].is_string() ? j["model"].get<std::string>() : "";
  if (ms == "I")
    cfg.model = Model::I;
  else if (ms == "II")
    cfg.model = Model::II;
  else
    fail("model", "must be \"I\" or \"II\"");

  if (j.contains("center")) {
    const auto& c = j["center"];
    if (!c.is_array() || c.size() != 2) fail("center", "expected [x, y]");
    cfg.center = Vec2(get_number(c[0], "center[0]"), get_number(c[1], "center[1]"));
  }
  if (j.contains("radius")) cfg.radius = get_number(j["radius"], "radius");
  if (cfg.radius <= 0) fail("radius", "must be positive");
  for (int k = 0; k < 2; ++k)
    if (!(cfg.center[k] - cfg.radius > 0 && cfg.center[k] + cfg.radius < 1))
      fail("radius", "inclusion exits cell");

  if (j.contains("mesh")) {
    const auto& m = j["mesh"];
    if (!m.is_object()) fail("mesh", "expected an object");
    if (m.contains("h")) cfg.h = get_number(m["h"], "mesh.h");
    if (m.contains("refinements")) {
      cfg.refinements = m["refinements"].get<int>();
      if (cfg.refinements < 0 || cfg.refinements > 6) fail("mesh.refinements", "out of range");
    }
  }
  if (!(cfg.h > 0 && cfg.h <= cfg.radius / 4)) fail("mesh.h", "must lie in (0, radius/4]");

  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    if (!s.is_object()) fail("sweep", "expected an object");
    if (s.contains("eps")) {
      cfg.eps_list.clear();
      for (std::size_t k = 0; k < s["eps"].size(); ++k)
        cfg.eps_list.push_back(get_number(s["eps"][k], "sweep.eps"));
    }
    if (s.contains("tau_grid")) {
      const auto& tg = s["tau_grid"];
      if (tg.is_number_integer()) {
        cfg.tau_grid_n = tg.get<int>();
        if (cfg.tau_grid_n < 1 || cfg.tau_grid_n > 64) fail("sweep.tau_grid", "out of range");
      } else if (tg.is_array()) {
        cfg.tau_grid_n = 0;
        for (std::size_t k = 0; k < tg.size(); ++k) {
          const auto& p = tg[k];
          if (!p.is_array() || p.size() != 2) fail("sweep.tau_grid", "expected [t1, t2] pairs");
          cfg.taus.emplace_back(get_number(p[0], "sweep.tau_grid"),
                                get_number(p[1], "sweep.tau_grid"));
        }
      } else {
        fail("sweep.tau_grid", "expected an integer or a list of pairs");
      }
    }
    if (s.contains("z")) {
      cfg.zs.clear();
      for (std::size_t k = 0; k < s["z"].size(); ++k) {
        const auto& p = s["z"][k];
        if (!p.is_array() || p.size() != 2) fail("sweep.z", "expected [re, im] pairs");
        cfg.zs.emplace_back(get_number(p[0], "sweep.z"), get_number(p[1], "sweep.z"));
      }
    }
    if (s.contains("window")) {
      const auto& w = s["window"];
      if (!w.is_array() || w.size() != 2) fail("sweep.window", "expected [lo, hi]");
      cfg.win_lo = get_number(w[0], "sweep.window");
      cfg.win_hi = get_number(w[1], "sweep.window");
    }
  }
  if (cfg.eps_list.empty()) fail("sweep.eps", "must not be empty");
  {
    std::set<double> seen;
    for (double e : cfg.eps_list) {
      if (!(e > 0 && e <= 1)) fail("sweep.eps", "values must lie in (0, 1]");
      if (!seen.insert(e).second) fail("sweep.eps", "duplicate eps");
    }
    std::vector<double> sorted = cfg.eps_list;
    std::sort(sorted.rbegin(), sorted.rend());
    cfg.eps_list = sorted;
  }
  if (cfg.tau_grid_n > 0) cfg.taus = tau_grid(cfg.tau_grid_n);
  for (const auto& t : cfg.taus)
    if (!(t.x() >= -kPi && t.x() < kPi && t.y() >= -kPi && t.y() < kPi))
      fail("sweep.tau_grid", "points must lie in Q' = [-pi, pi)^2");
  if (cfg.zs.empty()) fail("sweep.z", "must not be empty");
  if (!(cfg.win_lo >= 0 && cfg.win_hi > cfg.win_lo)) fail("sweep.window", "must be (0, inf) bounded");

  if (j.contains("truncation_J")) {
    cfg.truncation_J = j["truncation_J"].get<int>();
    if (cfg.truncation_J < 1) fail("truncation_J", "must be >= 1");
  }
  if (j.contains("tasks")) {
    cfg.tasks.clear();
    static const std::set<std::string> valid{"steklov", "dispersion", "bands",
                                             "convergence", "identities"};
    for (std::size_t k = 0; k < j["tasks"].size(); ++k) {
      std::string t = j["tasks"][k].get<std::string>();
      if (!valid.count(t)) fail("tasks", "unknown task \"" + t + "\"");
      cfg.tasks.push_back(t);
    }
    if (cfg.tasks.empty()) fail("tasks", "must not be empty");
  }
  if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("threads")) {
    cfg.threads = j["threads"].get<int>();
    if (cfg.threads < 1 || cfg.threads > 256) fail("threads", "out of range");
  }
  return cfg;
}

}  // namespace homog
