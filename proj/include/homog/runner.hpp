#pragma once

#include <string>
#include <vector>

#include "homog/config.hpp"

namespace homog {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0;
  double threshold = 0;
};

// Deterministic run record. Wall times are non-normative; the digest covers
// everything else, so reruns with identical config and code produce identical
// digests (thread count 1).
struct RunManifest {
  std::string version;
  std::string config_echo;
  std::vector<std::pair<std::string, double>> wall_times_ms;
  std::vector<CheckResult> checks;
  std::vector<std::pair<std::string, std::string>> files;  // path -> fnv1a64
  std::vector<std::string> errors;                         // per-task failures

  bool all_checks_passed() const;
  std::string digest() const;
  std::string to_json() const;
};

RunManifest run_experiment(const ExperimentConfig& config);

// The identity suite alone (Krein, additivity, scaling, Herglotz, difference
// identity, DN sign), used by `homogenize check` and the identities task.
std::vector<CheckResult> identity_suite(const ExperimentConfig& config);

}  // namespace homog
