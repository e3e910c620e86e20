#include "homog/util.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

namespace homog {

LogLevel log_level() {
  static LogLevel lvl = [] {
    const char* v = std::getenv("HOMOGENIZE_LOG");
    if (!v) return LogLevel::quiet;
    std::string s(v);
    if (s == "debug") return LogLevel::debug;
    if (s == "info") return LogLevel::info;
    return LogLevel::quiet;
  }();
  return lvl;
}

namespace {
std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) {
    std::lock_guard<std::mutex> lock(log_mutex());
    std::cerr << "[homogenize] " << msg << "\n";
  }
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug) {
    std::lock_guard<std::mutex> lock(log_mutex());
    std::cerr << "[homogenize:debug] " << msg << "\n";
  }
}

std::string fmt_double(double x) {
  char buf[40];
  // %.17g round-trips doubles; try shorter forms first for readability.
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

CsvWriter::CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {}

void CsvWriter::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_.size())
    throw Error("CsvWriter: row width mismatch");
  rows_.push_back(cells);
}

std::string CsvWriter::str() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < columns_.size(); ++i)
    os << (i ? "," : "") << columns_[i];
  os << "\n";
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << "\n";
  }
  return os.str();
}

void CsvWriter::write_file(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open for writing: " + path);
  f << str();
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  int workers = std::min(threads, n);
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto body = [&] {
    while (true) {
      int i = next.fetch_add(1);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::pair<double, double> loglog_slope(const std::vector<double>& x,
                                       const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("loglog_slope: need >= 2 points");
  const int n = static_cast<int>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> lx(n), ly(n);
  for (int i = 0; i < n; ++i) {
    if (x[i] <= 0 || y[i] <= 0) throw Error("loglog_slope: nonpositive data");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
    sx += lx[i]; sy += ly[i]; sxx += lx[i] * lx[i]; sxy += lx[i] * ly[i];
  }
  double denom = n * sxx - sx * sx;
  double slope = (n * sxy - sx * sy) / denom;
  double intercept = (sy - slope * sx) / n;
  double ss_res = 0, ss_tot = 0, mean = sy / n;
  for (int i = 0; i < n; ++i) {
    double fit = slope * lx[i] + intercept;
    ss_res += (ly[i] - fit) * (ly[i] - fit);
    ss_tot += (ly[i] - mean) * (ly[i] - mean);
  }
  double r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return {slope, r2};
}

std::vector<Vec2> tau_grid(int n) {
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double t1 = -kPi + (i + 0.5) * 2.0 * kPi / n;
      double t2 = -kPi + (j + 0.5) * 2.0 * kPi / n;
      out.emplace_back(t1, t2);
    }
  return out;
}

}  // namespace homog
