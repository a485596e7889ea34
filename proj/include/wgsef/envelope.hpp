#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "wgsef/groups.hpp"

namespace wgsef {

/// Sparsity budget k (1 <= k <= m) and regularization magnitude lambda >= 0.
struct EnvelopeParams {
  std::size_t k = 1;
  double lambda = 0.0;

  /// Throws InvalidSpec unless 1 <= k <= m and lambda >= 0.
  void validate(std::size_t m) const;
};

/// Solution u of the dual problem over {0 <= u <= 1, sum u <= k}.
struct DualVariables {
  std::vector<double> u;
  double mu = 0.0;      // multiplier of sum u <= k; 0 when the constraint is slack
  bool active = false;  // whether sum u == k was binding

  [[nodiscard]] double mass() const noexcept;
};

struct EnvelopeValue {
  double value = 0.0;
  DualVariables dual;
};

struct ProxResult {
  std::vector<double> v;
  DualVariables dual;
};

enum class RootMethod { Randomized, Bisection };

/// Half the sum of the k largest squared norms ||theta~_{s_j}||^2 / d_j.
double conjugate(const GroupPartition& partition, const EnvelopeParams& params,
                 std::span<const double> theta_tilde);

/// The weighted group sparse envelope at theta (lambda is not used).
///
/// With b_j = sqrt(d_j) ||theta_{s_j}||: if at most k groups are nonzero the
/// value is sum b_j^2 / 2 with u = 1 on the support; otherwise sum_j min(1, eta b_j) = k
/// is solved for eta = 1 / sqrt(mu) and the value is sum b_j^2 / (2 u_j).
EnvelopeValue value(const GroupPartition& partition, const EnvelopeParams& params,
                    std::span<const double> theta);

/// prox of (step * lambda) times the envelope at t.
///
/// Each group is scaled by u_j / (step * lambda * d_j + u_j), where
/// u_j = clamp(eta b_j - step * lambda * d_j, 0, 1) and eta is the root of
/// sum_j u_j(eta) = k. Groups with u_j == 0 are written as exact zeros. The
/// root search is skipped when at most k groups of t are nonzero.
ProxResult prox(const GroupPartition& partition, const EnvelopeParams& params, double step,
                std::span<const double> t, std::uint64_t seed,
                RootMethod method = RootMethod::Randomized);

/// Gradient of the envelope on nonzero groups: d_j theta_{s_j} / u_j, with u
/// from value(). Zero on groups whose norm is zero.
std::vector<double> envelope_gradient(const GroupPartition& partition, const EnvelopeParams& params,
                                      std::span<const double> theta);

}  // namespace wgsef
