#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "homog/runner.hpp"
#include "homog/util.hpp"

using namespace homog;
namespace fs = std::filesystem;

TEST_CASE("minimal config is fully defaulted") {
  auto cfg = validate_config(R"({"model": "II", "radius": 0.25})");
  CHECK(cfg.model == Model::II);
  CHECK(cfg.h == 0.02);
  CHECK(cfg.truncation_J == 80);
  CHECK(cfg.zs.size() == 1);
  CHECK(cfg.zs[0] == Complex(1, 1));
  CHECK(cfg.taus.size() == 25);  // 5x5 uniform over Q'
  CHECK(cfg.tasks.size() == 5);
  CHECK(cfg.threads == 1);
  // echo is valid JSON and re-validates to the same normalized form
  auto cfg2 = validate_config(cfg.echo_json());
  CHECK(cfg2.echo_json() == cfg.echo_json());
}

TEST_CASE("config validation errors carry field paths") {
  CHECK_THROWS_WITH_AS(validate_config(R"({"model": "I", "radius": 0.6})"),
                       "radius: inclusion exits cell", ConfigError);
  CHECK_THROWS_AS(validate_config(R"({"model": "I", "sweep": {"eps": [0.2, 0.2]}})"),
                  ConfigError);
  CHECK_THROWS_AS(validate_config(R"({"model": "X"})"), ConfigError);
  CHECK_THROWS_AS(validate_config(R"({"model": "I", "mesh": {"h": 0.1}})"), ConfigError);
  CHECK_THROWS_AS(validate_config(R"({"model": "I", "tasks": ["nope"]})"), ConfigError);
  CHECK_THROWS_AS(validate_config("not json"), ConfigError);
  CHECK_THROWS_AS(validate_config(R"({"model": "I", "bogus_field": 3})"), ConfigError);
}

TEST_CASE("identities task on a small Model II config: all checks pass") {
  auto cfg = validate_config(R"({
    "model": "II", "mesh": {"h": 0.0625},
    "tasks": ["identities"], "output_dir": "/tmp/homog_test_ident"})");
  auto man = run_experiment(cfg);
  REQUIRE(man.errors.empty());
  REQUIRE(man.checks.size() == 6);
  for (const auto& c : man.checks) {
    INFO(c.name, " value=", c.value, " thr=", c.threshold);
    CHECK(c.passed);
  }
  CHECK(man.all_checks_passed());
}

TEST_CASE("rerun determinism: identical digests and file hashes") {
  const char* raw = R"({
    "model": "I", "mesh": {"h": 0.05},
    "sweep": {"eps": [0.4, 0.2, 0.1], "tau_grid": 2, "z": [[1.0, 1.0]], "window": [0, 150]},
    "tasks": ["steklov", "bands"], "seed": 71, "threads": 1,
    "output_dir": "/tmp/homog_test_det_a"})";
  auto cfg_a = validate_config(raw);
  auto man_a = run_experiment(cfg_a);
  auto man_b = run_experiment(cfg_a);  // identical config, same directory
  REQUIRE(man_a.errors.empty());
  REQUIRE(man_b.errors.empty());
  REQUIRE(man_a.files.size() == man_b.files.size());
  for (std::size_t k = 0; k < man_a.files.size(); ++k) {
    CHECK(man_a.files[k].first == man_b.files[k].first);
    CHECK(man_a.files[k].second == man_b.files[k].second);
  }
  // digests cover config + checks + files, not wall times
  CHECK(man_a.digest() == man_b.digest());
  // emitted files exist and match their recorded hashes
  for (const auto& [name, hash] : man_a.files) {
    std::ifstream f(fs::path(cfg_a.output_dir) / name, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream os;
    os << f.rdbuf();
    CHECK(hash_hex(fnv1a64(os.str())) == hash);
  }
}

TEST_CASE("bands task reports a gap for the Model I default geometry") {
  auto cfg = validate_config(R"({
    "model": "I", "mesh": {"h": 0.05},
    "sweep": {"eps": [0.05], "tau_grid": 3, "window": [0, 150]},
    "tasks": ["bands"], "output_dir": "/tmp/homog_test_bands"})");
  auto man = run_experiment(cfg);
  REQUIRE(man.errors.empty());
  std::string bands_file;
  for (const auto& [name, hash] : man.files)
    if (name.rfind("bands_eps", 0) == 0) bands_file = name;
  REQUIRE(!bands_file.empty());
  std::ifstream f(fs::path(cfg.output_dir) / bands_file);
  REQUIRE(f.good());
  std::string header;
  std::getline(f, header);
  CHECK(header == "band_index,lower,upper,extremal_tau_lower,extremal_tau_upper");
  // parse intervals; a gap requires >= 2 disjoint bands
  std::vector<std::pair<double, double>> bands;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    int idx;
    double lo, hi;
    is >> idx >> lo >> hi;
    bands.emplace_back(lo, hi);
  }
  REQUIRE(bands.size() >= 2);
  bool gap = false;
  for (std::size_t b = 0; b + 1 < bands.size(); ++b)
    if (bands[b + 1].first - bands[b].second > 1.0) gap = true;
  CHECK(gap);
}
