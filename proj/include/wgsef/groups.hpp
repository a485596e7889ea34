#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

namespace wgsef {

/// Group norms at or below this value count as zero in sparsity metrics.
inline constexpr double kDefaultZeroTol = 1e-12;

/// Disjoint groups s_1..s_m covering [0, n), each with a positive weight d_j.
///
/// Indices are held in one flat array with per-group offsets so that a pass
/// over all groups touches every coordinate exactly once. Immutable after
/// construction.
class GroupPartition {
 public:
  GroupPartition() = default;

  /// Validates and builds a partition. Weights default to 1/|s_j|.
  /// Throws OverlappingGroups, IncompleteCover, NonpositiveWeight,
  /// IndexOutOfRange or InvalidSpec (empty group, weight count mismatch).
  static GroupPartition make(std::size_t n, std::vector<std::vector<std::size_t>> groups,
                             std::optional<std::vector<double>> weights = std::nullopt);

  /// Consecutive blocks of `group_size` coordinates; the last block takes the
  /// remainder when group_size does not divide n.
  static GroupPartition contiguous(std::size_t n, std::size_t group_size,
                                   std::optional<std::vector<double>> weights = std::nullopt);

  /// One singleton group per coordinate, unit weights.
  static GroupPartition singletons(std::size_t n);

  [[nodiscard]] std::size_t dim() const noexcept { return n_; }
  [[nodiscard]] std::size_t size() const noexcept { return weights_.size(); }
  [[nodiscard]] std::span<const std::size_t> group(std::size_t j) const;
  [[nodiscard]] double weight(std::size_t j) const { return weights_.at(j); }
  [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }
  [[nodiscard]] std::vector<std::vector<std::size_t>> groups() const;

  [[nodiscard]] nlohmann::json to_json() const;
  static GroupPartition from_json(const nlohmann::json& doc);

  friend bool operator==(const GroupPartition&, const GroupPartition&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> index_;
  std::vector<std::size_t> offset_{0};
  std::vector<double> weights_;
};

/// Entry j is sqrt(d_j) * ||theta restricted to s_j||_2.
struct GroupNorms {
  std::vector<double> values;
};

/// theta with every coordinate outside s_j set to zero.
std::vector<double> project(const GroupPartition& partition, std::span<const double> theta,
                            std::size_t j);

GroupNorms group_norms(const GroupPartition& partition, std::span<const double> theta);

/// Plain ||theta_{s_j}||_2 without the weight, used for pruning order.
std::vector<double> raw_group_norms(const GroupPartition& partition, std::span<const double> theta);

/// Fraction of groups whose (unweighted) norm is <= tol.
double group_sparsity_ratio(const GroupPartition& partition, std::span<const double> theta,
                            double tol = kDefaultZeroTol);

std::size_t count_zero_groups(const GroupPartition& partition, std::span<const double> theta,
                              double tol = kDefaultZeroTol);

}  // namespace wgsef
