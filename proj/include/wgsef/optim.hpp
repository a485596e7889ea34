#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wgsef/data.hpp"
#include "wgsef/envelope.hpp"
#include "wgsef/groups.hpp"
#include "wgsef/models.hpp"

namespace wgsef {

/// splitmix64 of (base, stream, index): independent seeds for init, epoch
/// shuffles and root searches from one run seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

enum SeedStream : std::uint64_t { kInitStream = 1, kEpochStream = 2, kRootStream = 3, kDataStream = 4 };

enum class ScheduleKind { Constant, Cosine, StepDecay };

/// Stepsize alpha_t for 0-based step t.
struct StepSchedule {
  ScheduleKind kind = ScheduleKind::Constant;
  double alpha0 = 0.01;
  std::size_t horizon = 0;   // Cosine: number of steps; t >= horizon throws ScheduleExhausted
  double alpha_min = 0.0;    // Cosine floor
  double decay = 0.1;        // StepDecay factor
  std::size_t every = 1;     // StepDecay period in steps

  [[nodiscard]] double at(std::size_t t) const;
  void validate() const;
};

/// rho_t = rho0 * mu^t for 0-based step t (constant when mu = 1).
struct MomentumSchedule {
  double rho0 = 0.9;
  double mu = 1.0;

  [[nodiscard]] double at(std::size_t t) const;
  void validate() const;
};

/// One regularized block: coordinates of the flat vector, a partition over
/// them, and its (k, lambda).
struct RegBlock {
  std::vector<std::size_t> coords;
  GroupPartition partition;
  EnvelopeParams params;
};

enum class ScopeKind { PerLayer, Global };

struct RegScope {
  ScopeKind kind = ScopeKind::Global;
  std::vector<RegBlock> blocks;

  [[nodiscard]] std::size_t group_count() const;
};

/// PerLayer: one block per entry of `layers` with its own (lambda_l, k_l).
/// Throws InvalidSpec when the lists do not match.
RegScope per_layer_scope(const std::vector<LayerGroups>& layers, const std::vector<double>& lambdas,
                         const std::vector<std::size_t>& ks);
/// Global: one block over the concatenation of `layers`.
RegScope global_scope(const std::vector<LayerGroups>& layers, double lambda, std::size_t k);

struct ProxSgdState {
  std::vector<double> theta;
  std::vector<double> m;  // momentum, starts at 0
  std::size_t t = 0;
  double last_dual_mass = 0.0;

  ProxSgdState() = default;
  explicit ProxSgdState(std::vector<double> theta0);
};

/// m <- rho_t m + (1 - rho_t) g, then theta <- prox_{alpha_t lambda GS_k}(theta - alpha_t m)
/// block by block; coordinates outside every block take the plain step.
/// Throws DimensionMismatch, ScheduleExhausted, InvalidSpec (rho outside [0,1)).
void prox_sgd_step(ProxSgdState& state, std::span<const double> grad, const RegScope& scope,
                   const StepSchedule& alpha, const MomentumSchedule& rho, std::uint64_t seed);

/// Keeps the min(k, nonzero) groups of largest norm and zeroes the rest.
/// Ranking uses plain ||theta_{s_j}|| unless weighted (then sqrt(d_j) times
/// it); ties keep the lower group index.
std::vector<double> prune(std::span<const double> theta, const GroupPartition& partition, std::size_t k,
                          bool weighted = false);
/// prune applied to every block of the scope with that block's k.
void prune_scope(std::span<double> theta, const RegScope& scope, bool weighted = false);

/// Percentage of zero groups over all blocks.
double scope_sparsity(const RegScope& scope, std::span<const double> theta, double tol = kDefaultZeroTol);
std::size_t scope_zero_groups(const RegScope& scope, std::span<const double> theta,
                              double tol = kDefaultZeroTol);

/// f on the full dataset plus sum over blocks of lambda * GS_k.
double composite_objective(const Model& model, const Dataset& data, const RegScope& scope);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;            // mean minibatch loss over the epoch
  double val_error = 0.0;       // percent
  double group_sparsity = 0.0;  // percent of zero groups
  double dual_mass = 0.0;       // sum of u from the epoch's last prox
  double flops_ratio = 0.0;     // percent of dense FLOPs
  double seconds = 0.0;
};

struct Snapshot {
  double val_error = 0.0;
  double group_sparsity = 0.0;
  double flops_ratio = 0.0;
  std::vector<std::size_t> surviving;  // nonzero groups per block
};

enum class Phase { FirstOrder, HalfSpace };

struct StepInfo {
  Phase phase = Phase::FirstOrder;
  std::size_t t = 0;
  std::span<const double> before;
  std::span<const double> after;
};

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  StepSchedule alpha;
  MomentumSchedule rho;
  std::uint64_t seed = 0;
  bool prune_at_end = false;
  bool weighted_prune = false;
  double zero_tol = kDefaultZeroTol;
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(const StepInfo&)> on_step;
  /// Called after on_epoch with the optimizer state (theta, momentum, t).
  std::function<void(std::size_t epoch, const ProxSgdState&)> on_state;
};

enum class SwitchKind { FixedIterations, SparsityStable };

struct SwitchCondition {
  SwitchKind kind = SwitchKind::FixedIterations;
  std::size_t iterations = 0;  // FixedIterations: first-order steps
  std::size_t window = 3;      // SparsityStable: epochs
  double tol_groups = 1.0;     // SparsityStable: zero-group count changes by less than this
};

struct HspgConfig {
  SwitchCondition when;
  double epsilon = 0.0;  // in [0, 1)
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> records;
  Snapshot before_prune;
  Snapshot after_prune;  // equals before_prune when no prune ran
  bool pruned = false;
  std::size_t switch_step = 0;  // hspg: first half-space step (steps run if never switched)
  bool switched = false;
};

/// Prox-SGD with the envelope regularizer over shuffled minibatches, optional
/// terminal prune. Throws DataEmpty, ConfigInvalid.
TrainResult train(Model model, const Dataset& train_data, const Dataset& val_data, const RegScope& scope,
                  const TrainConfig& config);

/// Prox-SGD until the switch condition holds, then half-space steps: a
/// gradient step on f + lambda * envelope on nonzero groups, zero groups
/// frozen, and a group is zeroed when <trial, previous> < epsilon ||previous||^2.
TrainResult hspg_train(Model model, const Dataset& train_data, const Dataset& val_data,
                       const RegScope& scope, const TrainConfig& config, const HspgConfig& hspg);

}  // namespace wgsef
