#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "homog/types.hpp"

namespace homog {

// ----- logging (HOMOGENIZE_LOG in {quiet, info, debug}, default quiet) -----

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

LogLevel log_level();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

// ----- deterministic number formatting for emitted files -----

// Shortest round-trip-safe decimal form of x.
std::string fmt_double(double x);

// ----- CSV writer: fixed column set, one file, deterministic formatting -----

class CsvWriter {
 public:
  CsvWriter(std::vector<std::string> columns);
  void add_row(const std::vector<std::string>& cells);
  std::string str() const;
  void write_file(const std::string& path) const;
  int rows() const { return static_cast<int>(rows_.size()); }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

// ----- FNV-1a 64-bit content hash (manifest file hashes) -----

std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64(const std::string& s);
std::string hash_hex(std::uint64_t h);

// ----- bounded worker pool over an index range; deterministic result slots ---

// Runs fn(0..n-1). threads<=1 executes serially in order. With threads>1 the
// iteration order is unspecified but callers write into pre-sized slots, so
// merged results do not depend on scheduling.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

// ----- small numeric helpers -----

// Least-squares slope of log(y) against log(x). Returns {slope, r_squared}.
std::pair<double, double> loglog_slope(const std::vector<double>& x,
                                       const std::vector<double>& y);

// Symmetric midpoint grid over Q' = [-pi, pi)^2: n x n points
// tau_k = -pi + (k + 1/2) * 2pi / n in each coordinate.
std::vector<Vec2> tau_grid(int n);

}  // namespace homog
