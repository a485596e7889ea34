#include "wgsef/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <numeric>
#include <random>
#include <sstream>

#include "wgsef/envelope.hpp"
#include "wgsef/errors.hpp"
#include "wgsef/groups.hpp"

namespace wgsef {

namespace {

GroupPartition random_partition(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<std::size_t>> groups(m);
  for (std::size_t j = 0; j < m; ++j) groups[j].push_back(perm[j]);
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  for (std::size_t i = m; i < n; ++i) groups[pick(rng)].push_back(perm[i]);
  std::uniform_real_distribution<double> w(0.1, 10.0);
  std::vector<double> weights(m);
  for (double& d : weights) d = w(rng);
  return GroupPartition::make(n, std::move(groups), std::move(weights));
}

std::vector<double> normal(std::mt19937_64& rng, std::size_t n, double sd) {
  std::normal_distribution<double> nd(0.0, sd);
  std::vector<double> x(n);
  for (double& v : x) v = nd(rng);
  return x;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct Instance {
  GroupPartition p;
  EnvelopeParams params;
  std::vector<double> t;
};

Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> mdist(1, 8);
  const std::size_t m = mdist(rng);
  std::uniform_int_distribution<std::size_t> ndist(m, 64);
  const std::size_t n = ndist(rng);
  std::uniform_int_distribution<std::size_t> kdist(1, m);
  std::uniform_real_distribution<double> loglam(std::log(1e-3), std::log(10.0));
  Instance in{random_partition(rng, n, m), {kdist(rng), std::exp(loglam(rng))}, normal(rng, n, 3.0)};
  return in;
}

void record(SuiteResult& s, double violation, double tol) {
  s.worst = std::max(s.worst, violation);
  if (violation <= tol) {
    ++s.passed;
  } else {
    ++s.failed;
  }
}

}  // namespace

std::vector<SuiteResult> prox_selftest(std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SuiteResult oracle{"root search vs bisection oracle"};
  SuiteResult optimal{"prox optimality"};
  SuiteResult equality{"envelope equals ridge at k-sparse points"};
  SuiteResult fenchel{"Fenchel-Young equality at gradient pairs"};

  for (std::size_t trial = 0; trial < trials; ++trial) {
    const Instance in = random_instance(rng);
    const auto& p = in.p;

    const auto fast = prox(p, in.params, 1.0, in.t, rng());
    const auto slow = prox(p, in.params, 1.0, in.t, 0, RootMethod::Bisection);
    double diff = 0.0;
    for (std::size_t i = 0; i < fast.v.size(); ++i) diff = std::max(diff, std::abs(fast.v[i] - slow.v[i]));
    record(oracle, diff, 1e-8);

    auto objective = [&](const std::vector<double>& v) {
      double q = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) q += (v[i] - in.t[i]) * (v[i] - in.t[i]);
      return in.params.lambda * value(p, in.params, v).value + 0.5 * q;
    };
    const double base = objective(fast.v);
    double worst_gain = 0.0;
    for (double scale : {1e-3, 1e-5}) {
      for (int rep = 0; rep < 4; ++rep) {
        auto v = fast.v;
        const auto d = normal(rng, v.size(), scale);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += d[i];
        worst_gain = std::max(worst_gain, base - objective(v));
      }
    }
    record(optimal, worst_gain / (1.0 + std::abs(base)), 1e-9);

    // Zero all but k groups, then the envelope is the weighted ridge term.
    auto x = normal(rng, p.dim(), 1.0);
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t r = in.params.k; r < order.size(); ++r) {
      for (std::size_t i : p.group(order[r])) x[i] = 0.0;
    }
    double ridge = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      double s = 0.0;
      for (std::size_t i : p.group(j)) s += x[i] * x[i];
      ridge += 0.5 * p.weight(j) * s;
    }
    record(equality, std::abs(value(p, in.params, x).value - ridge) / std::max(1.0, ridge), 1e-10);

    const auto y = normal(rng, p.dim(), 1.0);
    const auto g = envelope_gradient(p, in.params, y);
    const double lhs = value(p, in.params, y).value + conjugate(p, in.params, g);
    const double rhs = dot(y, g);
    record(fenchel, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)), 1e-8);
  }
  return {oracle, optimal, equality, fenchel};
}

std::vector<BenchPoint> bench_prox(const std::vector<std::size_t>& sizes, std::size_t group_size,
                                   std::uint64_t seed, double min_seconds) {
  if (group_size == 0) throw Error(Errc::InvalidSpec, "group size must be positive");
  std::mt19937_64 rng(seed);
  std::vector<BenchPoint> out;
  for (std::size_t n : sizes) {
    if (n < group_size) throw Error(Errc::InvalidSpec, "size below the group size");
    const auto p = GroupPartition::contiguous(n, group_size);
    const EnvelopeParams params{std::max<std::size_t>(1, p.size() / 4), 0.5};
    const auto t = normal(rng, n, 1.0);
    std::vector<double> times;
    double total = 0.0;
    while (total < min_seconds || times.size() < 5) {
      const auto start = std::chrono::steady_clock::now();
      const auto r = prox(p, params, 1.0, t, rng());
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (r.v.size() != n) throw Error(Errc::DimensionMismatch, "prox returned the wrong size");
      times.push_back(s);
      total += s;
    }
    std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2), times.end());
    out.push_back({n, p.size(), times[times.size() / 2]});
  }
  return out;
}

double loglog_slope(const std::vector<BenchPoint>& points) {
  if (points.size() < 2) throw Error(Errc::InvalidSpec, "slope needs at least two sizes");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& pt : points) {
    const double x = std::log(static_cast<double>(pt.n)), y = std::log(pt.seconds);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double k = static_cast<double>(points.size());
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

std::string metrics_svg(std::istream& in, const std::string& title) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::Io, "metrics file is empty");
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  auto col = [&](const std::string& name) {
    const auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end()) throw Error(Errc::Io, "metrics file has no column " + name);
    return static_cast<std::size_t>(it - cols.begin());
  };
  const std::size_t ce = col("epoch"), cs = col("group_sparsity"), cv = col("val_error");
  std::vector<double> epoch, sparsity, error;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) {
      try {
        v.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw Error(Errc::Io, "bad metrics row: " + line);
      }
    }
    if (v.size() != cols.size()) throw Error(Errc::Io, "bad metrics row: " + line);
    epoch.push_back(v[ce]);
    sparsity.push_back(v[cs]);
    error.push_back(v[cv]);
  }

  const double W = 640, H = 400, L = 60, R = 20, T = 40, B = 50;
  const double emax = epoch.empty() ? 1.0 : std::max(1.0, epoch.back());
  auto px = [&](double e) { return L + (W - L - R) * e / emax; };
  auto py = [&](double pct) { return H - B - (H - T - B) * std::clamp(pct, 0.0, 100.0) / 100.0; };
  std::ostringstream s;
  s.precision(2);
  s << std::fixed;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
    << title << "</text>\n";
  s << "<g stroke=\"#888\" stroke-width=\"1\">\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\"/>\n";
  s << "</g>\n<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (int pct = 0; pct <= 100; pct += 25) {
    s << "<text x=\"" << L - 6 << "\" y=\"" << py(pct) + 4 << "\" text-anchor=\"end\">" << pct << "%</text>\n";
  }
  const int step = std::max(1, static_cast<int>(emax / 10));
  for (int e = 0; e <= static_cast<int>(emax); e += step) {
    s << "<text x=\"" << px(e) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << e << "</text>\n";
  }
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">epoch</text>\n";
  s << "</g>\n";
  auto series = [&](const std::vector<double>& ys, const char* color, const char* name, double ly) {
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) s << px(epoch[i]) << ',' << py(ys[i]) << ' ';
    s << "\"/>\n";
    s << "<line x1=\"" << W - R - 150 << "\" y1=\"" << ly << "\" x2=\"" << W - R - 130 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << W - R - 124 << "\" y=\"" << ly + 4
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << name << "</text>\n";
  };
  series(sparsity, "#1f77b4", "group sparsity %", T + 10);
  series(error, "#d62728", "validation error %", T + 26);
  s << "</svg>\n";
  return s.str();
}

}  // namespace wgsef
