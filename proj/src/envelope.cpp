#include "wgsef/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "wgsef/errors.hpp"
#include "wgsef/pwl_root.hpp"

namespace wgsef {

namespace {

constexpr std::uint64_t kValueSeed = 0x5EF5EF5EFULL;

void check_dim(const GroupPartition& p, std::span<const double> x) {
  if (x.size() != p.dim()) {
    throw Error(Errc::DimensionMismatch, "vector has length " + std::to_string(x.size()) +
                                             ", partition covers " + std::to_string(p.dim()));
  }
}

std::size_t count_positive(const std::vector<double>& b) {
  return static_cast<std::size_t>(std::count_if(b.begin(), b.end(), [](double x) { return x > 0.0; }));
}

}  // namespace

void EnvelopeParams::validate(std::size_t m) const {
  if (k < 1 || k > m) {
    throw Error(Errc::InvalidSpec, "k = " + std::to_string(k) + " outside [1, " + std::to_string(m) + "]");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(Errc::InvalidSpec, "lambda must be a finite nonnegative number");
  }
}

double DualVariables::mass() const noexcept { return std::accumulate(u.begin(), u.end(), 0.0); }

double conjugate(const GroupPartition& partition, const EnvelopeParams& params,
                 std::span<const double> theta_tilde) {
  check_dim(partition, theta_tilde);
  params.validate(partition.size());

  std::vector<double> sq(partition.size());
  for (std::size_t j = 0; j < partition.size(); ++j) {
    double s = 0.0;
    for (std::size_t i : partition.group(j)) s += theta_tilde[i] * theta_tilde[i];
    sq[j] = s / partition.weight(j);
  }
  const auto kth = sq.begin() + static_cast<std::ptrdiff_t>(params.k);
  std::nth_element(sq.begin(), kth - 1, sq.end(), std::greater<>());
  return 0.5 * std::accumulate(sq.begin(), kth, 0.0);
}

EnvelopeValue value(const GroupPartition& partition, const EnvelopeParams& params,
                    std::span<const double> theta) {
  check_dim(partition, theta);
  params.validate(partition.size());

  const auto b = group_norms(partition, theta).values;
  const std::size_t m = b.size();
  EnvelopeValue out;
  out.dual.u.assign(m, 0.0);

  if (count_positive(b) <= params.k) {
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (b[j] > 0.0) {
        out.dual.u[j] = 1.0;
        total += b[j] * b[j];
      }
    }
    out.value = 0.5 * total;
    return out;
  }

  const std::vector<double> zero_alpha(m, 0.0);
  const auto terms = make_terms(b, zero_alpha);
  const double eta = find_root(terms, params.k, kValueSeed);

  double total = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    if (b[j] <= 0.0) continue;
    const double u = std::min(1.0, eta * b[j]);
    out.dual.u[j] = u;
    total += b[j] * b[j] / u;
  }
  out.value = 0.5 * total;
  out.dual.mu = 1.0 / (eta * eta);
  out.dual.active = true;
  return out;
}

ProxResult prox(const GroupPartition& partition, const EnvelopeParams& params, double step,
                std::span<const double> t, std::uint64_t seed, RootMethod method) {
  check_dim(partition, t);
  params.validate(partition.size());
  if (!(step > 0.0)) throw Error(Errc::NonpositiveStep, "step = " + std::to_string(step));

  const std::size_t m = partition.size();
  const double lambda_eff = step * params.lambda;
  const auto b = group_norms(partition, t).values;

  ProxResult out;
  out.dual.u.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) out.dual.u[j] = b[j] > 0.0 ? 1.0 : 0.0;

  if (lambda_eff == 0.0) {
    out.v.assign(t.begin(), t.end());
    return out;
  }

  std::vector<double> scale(m, 0.0);
  if (count_positive(b) <= params.k) {
    for (std::size_t j = 0; j < m; ++j) {
      if (b[j] > 0.0) scale[j] = 1.0 / (1.0 + lambda_eff * partition.weight(j));
    }
  } else {
    std::vector<double> alpha(m);
    for (std::size_t j = 0; j < m; ++j) alpha[j] = lambda_eff * partition.weight(j);
    const auto terms = make_terms(b, alpha);
    double eta = 0.0;
    if (method == RootMethod::Randomized) {
      eta = find_root(terms, params.k, seed);
    } else {
      const auto br = root_bracket(terms, params.k);
      eta = find_root_bisection(terms, params.k, 1e-13 * br.hi);
    }
    for (std::size_t j = 0; j < m; ++j) {
      const double u = b[j] > 0.0 ? std::clamp(eta * b[j] - alpha[j], 0.0, 1.0) : 0.0;
      out.dual.u[j] = u;
      scale[j] = u > 0.0 ? u / (alpha[j] + u) : 0.0;
    }
    out.dual.mu = 1.0 / (eta * eta);
    out.dual.active = true;
  }

  out.v.assign(t.size(), 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    if (scale[j] == 0.0) continue;
    for (std::size_t i : partition.group(j)) out.v[i] = scale[j] * t[i];
  }
  return out;
}

std::vector<double> envelope_gradient(const GroupPartition& partition, const EnvelopeParams& params,
                                      std::span<const double> theta) {
  const auto env = value(partition, params, theta);
  std::vector<double> g(theta.size(), 0.0);
  for (std::size_t j = 0; j < partition.size(); ++j) {
    const double u = env.dual.u[j];
    if (u <= 0.0) continue;
    const double c = partition.weight(j) / u;
    for (std::size_t i : partition.group(j)) g[i] = c * theta[i];
  }
  return g;
}

}  // namespace wgsef
