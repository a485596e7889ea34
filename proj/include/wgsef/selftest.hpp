#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace wgsef {

struct SuiteResult {
  std::string name;
  std::size_t passed = 0;
  std::size_t failed = 0;
  double worst = 0.0;  // largest violation seen
};

/// Property suites on random instances: randomized root search against the
/// bisection oracle, prox optimality (no random perturbation lowers the prox
/// objective), envelope equality at k-group-sparse points, and Fenchel-Young
/// equality at envelope-gradient pairs.
std::vector<SuiteResult> prox_selftest(std::size_t trials, std::uint64_t seed);

struct BenchPoint {
  std::size_t n = 0;
  std::size_t m = 0;
  double seconds = 0.0;  // median over repeats of one prox call
};

/// Times prox on random instances of each size (m = n / group_size groups).
std::vector<BenchPoint> bench_prox(const std::vector<std::size_t>& sizes, std::size_t group_size,
                                   std::uint64_t seed, double min_seconds = 0.2);

/// Least-squares slope of log(seconds) against log(n).
double loglog_slope(const std::vector<BenchPoint>& points);

/// Renders group sparsity and validation error against epoch from a
/// metrics.csv stream as a standalone SVG document.
std::string metrics_svg(std::istream& metrics_csv, const std::string& title);

}  // namespace wgsef
