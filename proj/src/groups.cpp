#include "wgsef/groups.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wgsef/errors.hpp"

namespace wgsef {

namespace {

void check_dim(const GroupPartition& p, std::span<const double> theta) {
  if (theta.size() != p.dim()) {
    throw Error(Errc::DimensionMismatch, "vector has length " + std::to_string(theta.size()) +
                                             ", partition covers " + std::to_string(p.dim()));
  }
}

}  // namespace

GroupPartition GroupPartition::make(std::size_t n, std::vector<std::vector<std::size_t>> groups,
                                    std::optional<std::vector<double>> weights) {
  if (n == 0) throw Error(Errc::InvalidSpec, "partition dimension must be positive");
  if (groups.size() > n) throw Error(Errc::InvalidSpec, "more groups than coordinates");
  if (weights && weights->size() != groups.size()) {
    throw Error(Errc::InvalidSpec, "weight count does not match group count");
  }

  GroupPartition p;
  p.n_ = n;
  p.index_.reserve(n);
  p.offset_.reserve(groups.size() + 1);
  p.weights_.reserve(groups.size());

  std::vector<char> seen(n, 0);
  for (std::size_t j = 0; j < groups.size(); ++j) {
    auto& g = groups[j];
    if (g.empty()) throw Error(Errc::InvalidSpec, "group " + std::to_string(j) + " is empty");
    std::sort(g.begin(), g.end());
    for (std::size_t i : g) {
      if (i >= n) {
        throw Error(Errc::IndexOutOfRange,
                    "index " + std::to_string(i) + " not in [0, " + std::to_string(n) + ")");
      }
      if (seen[i]) {
        throw Error(Errc::OverlappingGroups, "index " + std::to_string(i) + " appears twice");
      }
      seen[i] = 1;
      p.index_.push_back(i);
    }
    p.offset_.push_back(p.index_.size());

    const double d = weights ? (*weights)[j] : 1.0 / static_cast<double>(g.size());
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw Error(Errc::NonpositiveWeight, "weight of group " + std::to_string(j) + " is not positive");
    }
    p.weights_.push_back(d);
  }
  if (p.index_.size() != n) {
    throw Error(Errc::IncompleteCover, "groups cover " + std::to_string(p.index_.size()) + " of " +
                                           std::to_string(n) + " coordinates");
  }
  return p;
}

GroupPartition GroupPartition::contiguous(std::size_t n, std::size_t group_size,
                                          std::optional<std::vector<double>> weights) {
  if (group_size == 0) throw Error(Errc::InvalidSpec, "group size must be positive");
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t start = 0; start < n; start += group_size) {
    std::vector<std::size_t> g;
    for (std::size_t i = start; i < std::min(n, start + group_size); ++i) g.push_back(i);
    groups.push_back(std::move(g));
  }
  return make(n, std::move(groups), std::move(weights));
}

GroupPartition GroupPartition::singletons(std::size_t n) {
  return contiguous(n, 1, std::vector<double>(n, 1.0));
}

std::span<const std::size_t> GroupPartition::group(std::size_t j) const {
  if (j >= size()) throw Error(Errc::IndexOutOfRange, "group index " + std::to_string(j));
  return {index_.data() + offset_[j], offset_[j + 1] - offset_[j]};
}

std::vector<std::vector<std::size_t>> GroupPartition::groups() const {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(size());
  for (std::size_t j = 0; j < size(); ++j) {
    auto g = group(j);
    out.emplace_back(g.begin(), g.end());
  }
  return out;
}

nlohmann::json GroupPartition::to_json() const {
  return {{"n", n_}, {"groups", groups()}, {"weights", weights_}};
}

GroupPartition GroupPartition::from_json(const nlohmann::json& doc) {
  try {
    std::optional<std::vector<double>> weights;
    if (doc.contains("weights")) weights = doc.at("weights").get<std::vector<double>>();
    return make(doc.at("n").get<std::size_t>(),
                doc.at("groups").get<std::vector<std::vector<std::size_t>>>(), std::move(weights));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidSpec, std::string("group layout JSON: ") + e.what());
  }
}

std::vector<double> project(const GroupPartition& partition, std::span<const double> theta,
                            std::size_t j) {
  check_dim(partition, theta);
  std::vector<double> out(theta.size(), 0.0);
  for (std::size_t i : partition.group(j)) out[i] = theta[i];
  return out;
}

std::vector<double> raw_group_norms(const GroupPartition& partition, std::span<const double> theta) {
  check_dim(partition, theta);
  std::vector<double> out(partition.size());
  for (std::size_t j = 0; j < partition.size(); ++j) {
    double sq = 0.0;
    for (std::size_t i : partition.group(j)) sq += theta[i] * theta[i];
    out[j] = std::sqrt(sq);
  }
  return out;
}

GroupNorms group_norms(const GroupPartition& partition, std::span<const double> theta) {
  check_dim(partition, theta);
  GroupNorms out{std::vector<double>(partition.size())};
  for (std::size_t j = 0; j < partition.size(); ++j) {
    double sq = 0.0;
    for (std::size_t i : partition.group(j)) sq += theta[i] * theta[i];
    out.values[j] = std::sqrt(partition.weight(j) * sq);
  }
  return out;
}

std::size_t count_zero_groups(const GroupPartition& partition, std::span<const double> theta,
                              double tol) {
  const auto norms = raw_group_norms(partition, theta);
  return static_cast<std::size_t>(
      std::count_if(norms.begin(), norms.end(), [tol](double v) { return v <= tol; }));
}

double group_sparsity_ratio(const GroupPartition& partition, std::span<const double> theta,
                            double tol) {
  if (tol < 0.0) throw Error(Errc::InvalidSpec, "tolerance must be nonnegative");
  return static_cast<double>(count_zero_groups(partition, theta, tol)) /
         static_cast<double>(partition.size());
}

}  // namespace wgsef
