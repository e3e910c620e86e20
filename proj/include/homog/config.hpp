#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "homog/types.hpp"

namespace homog {

inline constexpr const char* kToolkitVersion = "0.1.0";

// Normalized experiment description. validate_config fills defaults
// (h = 0.02, J = 80, z = {1+i}, 5x5 tau grid over Q') and rejects invalid
// ranges with a field path in the error message.
struct ExperimentConfig {
  Model model = Model::II;
  Vec2 center{0.5, 0.5};
  double radius = 0.25;

  double h = 0.02;
  int refinements = 0;

  std::vector<double> eps_list{0.4, 0.2, 0.1, 0.05};
  int tau_grid_n = 5;                  // 0 when explicit points are given
  std::vector<Vec2> taus;              // resolved sweep points
  std::vector<Complex> zs{Complex(1.0, 1.0)};
  double win_lo = 0.0, win_hi = 150.0;

  int truncation_J = 80;
  std::vector<std::string> tasks{"steklov", "dispersion", "bands", "convergence",
                                 "identities"};
  std::string output_dir = "out";
  std::uint64_t seed = 12345;
  int threads = 1;

  bool has_task(const std::string& name) const;
  std::string echo_json() const;  // normalized, deterministic field order
};

ExperimentConfig validate_config(const std::string& raw_json_text);

}  // namespace homog
