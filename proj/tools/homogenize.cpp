// Batch front-end: parses an experiment config, orchestrates the sweep tasks,
// and emits CSV artifacts plus a run manifest.
//
//   homogenize run <config.json> [--out DIR] [--threads N] [--tasks LIST]
//   homogenize check <config.json>
//
// Exit codes: 0 = all checks pass, 2 = checks failed, 1 = infrastructure error.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "homog/runner.hpp"
#include "homog/util.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw homog::Error("cannot read config file: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int report(const homog::RunManifest& man) {
  for (const auto& c : man.checks)
    std::cout << (c.passed ? "[pass] " : "[FAIL] ") << c.name << "  value=" << c.value
              << "  threshold=" << c.threshold << "\n";
  for (const auto& e : man.errors) std::cout << "[error] " << e << "\n";
  std::cout << "manifest digest: " << man.digest() << "\n";
  return man.all_checks_passed() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"critical-contrast cell toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, tasks_csv;
  int threads = 0;

  auto* run = app.add_subcommand("run", "run the configured experiment tasks");
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "output directory override");
  run->add_option("--threads", threads, "worker thread count override");
  run->add_option("--tasks", tasks_csv, "comma-separated task list override");

  auto* check = app.add_subcommand("check", "run only the identity suite");
  check->add_option("config", config_path, "experiment config (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    homog::ExperimentConfig cfg = homog::validate_config(read_file(config_path));
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (threads > 0) cfg.threads = threads;
    if (!tasks_csv.empty()) {
      cfg.tasks = split_list(tasks_csv);
      if (cfg.tasks.empty()) throw homog::ConfigError("tasks: must not be empty");
    }
    if (check->parsed()) cfg.tasks = {"identities"};
    homog::log_info("running tasks in " + cfg.output_dir);
    homog::RunManifest man = homog::run_experiment(cfg);
    return report(man);
  } catch (const homog::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
