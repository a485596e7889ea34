#include "wgsef/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "wgsef/errors.hpp"

namespace wgsef {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double norm_of(std::span<const double> theta, std::span<const std::size_t> group,
               const std::vector<std::size_t>& coords) {
  double s = 0.0;
  for (std::size_t i : group) s += theta[coords[i]] * theta[coords[i]];
  return std::sqrt(s);
}

std::vector<double> gather(std::span<const double> theta, const std::vector<std::size_t>& coords) {
  std::vector<double> out(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) out[i] = theta[coords[i]];
  return out;
}

void scatter(std::span<double> theta, const std::vector<std::size_t>& coords, const std::vector<double>& v) {
  for (std::size_t i = 0; i < coords.size(); ++i) theta[coords[i]] = v[i];
}

Snapshot snapshot(const Model& model, const Dataset& val, const RegScope& scope, double tol) {
  Snapshot s;
  s.val_error = error_percent(model, val);
  s.group_sparsity = scope_sparsity(scope, model.params(), tol);
  s.flops_ratio = 100.0 * flops_estimate(model, model.params(), tol).ratio();
  for (const auto& b : scope.blocks) {
    std::size_t alive = 0;
    for (std::size_t j = 0; j < b.partition.size(); ++j) {
      if (norm_of(model.params(), b.partition.group(j), b.coords) > tol) ++alive;
    }
    s.surviving.push_back(alive);
  }
  return s;
}

void check_config(const Dataset& train_data, const Dataset& val_data, const Model& model,
                  const RegScope& scope, const TrainConfig& c) {
  if (train_data.size() == 0) throw Error(Errc::DataEmpty, "training set is empty");
  if (val_data.size() == 0) throw Error(Errc::DataEmpty, "validation set is empty");
  if (c.batch_size == 0) throw Error(Errc::ConfigInvalid, "batch size must be positive");
  try {
    c.alpha.validate();
    c.rho.validate();
  } catch (const Error& e) {
    throw Error(Errc::ConfigInvalid, e.what());
  }
  if (!(c.zero_tol >= 0.0)) throw Error(Errc::ConfigInvalid, "zero tolerance must be nonnegative");
  for (const auto& b : scope.blocks) {
    for (std::size_t i : b.coords) {
      if (i >= model.param_count()) throw Error(Errc::ConfigInvalid, "regularized coordinate outside the model");
    }
    try {
      b.params.validate(b.partition.size());
    } catch (const Error& e) {
      throw Error(Errc::ConfigInvalid, e.what());
    }
  }
}

// Drives the epoch loop shared by train and hspg_train. `step` performs one
// update given the minibatch gradient and returns nothing; `end_epoch` may
// inspect the zero-group count after each epoch.
template <class Step, class EndEpoch>
std::vector<EpochRecord> run_epochs(Model& model, const Dataset& train_data, const Dataset& val_data,
                                    const RegScope& scope, const TrainConfig& config, ProxSgdState& state,
                                    Step&& step, EndEpoch&& end_epoch) {
  std::vector<EpochRecord> records;
  std::vector<double> grad(model.param_count());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    std::size_t nb = 0;
    for (const auto& rows : batches(train_data.size(), config.batch_size,
                                    derive_seed(config.seed, kEpochStream, epoch))) {
      scatter_params(model, state.theta);
      loss_sum += model.loss_and_grad(make_batch(train_data, rows), grad);
      ++nb;
      step(grad);
    }
    scatter_params(model, state.theta);
    EpochRecord r;
    r.epoch = epoch;
    r.loss = loss_sum / static_cast<double>(nb);
    r.val_error = error_percent(model, val_data);
    r.group_sparsity = scope_sparsity(scope, state.theta, config.zero_tol);
    r.dual_mass = state.last_dual_mass;
    r.flops_ratio = 100.0 * flops_estimate(model, state.theta, config.zero_tol).ratio();
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    records.push_back(r);
    if (config.on_epoch) config.on_epoch(r);
    if (config.on_state) config.on_state(epoch, state);
    end_epoch(epoch);
  }
  return records;
}

void finish(TrainResult& result, const Dataset& val_data, const RegScope& scope, const TrainConfig& config) {
  Model& model = result.model;
  result.before_prune = snapshot(model, val_data, scope, config.zero_tol);
  if (config.prune_at_end) {
    prune_scope(model.params(), scope, config.weighted_prune);
    result.pruned = true;
    result.after_prune = snapshot(model, val_data, scope, config.zero_tol);
  } else {
    result.after_prune = result.before_prune;
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(base) ^ stream) ^ index);
}

double StepSchedule::at(std::size_t t) const {
  switch (kind) {
    case ScheduleKind::Constant:
      return alpha0;
    case ScheduleKind::Cosine: {
      if (t >= horizon) {
        throw Error(Errc::ScheduleExhausted, "cosine schedule has " + std::to_string(horizon) +
                                                 " steps, step " + std::to_string(t) + " requested");
      }
      const double c = std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(horizon));
      return alpha_min + 0.5 * (alpha0 - alpha_min) * (1.0 + c);
    }
    case ScheduleKind::StepDecay:
      return alpha0 * std::pow(decay, static_cast<double>(t / every));
  }
  return alpha0;
}

void StepSchedule::validate() const {
  if (!(alpha0 > 0.0)) throw Error(Errc::InvalidSpec, "stepsize must be positive");
  if (kind == ScheduleKind::Cosine && (horizon == 0 || !(alpha_min >= 0.0) || alpha_min > alpha0)) {
    throw Error(Errc::InvalidSpec, "cosine schedule needs a horizon and 0 <= alpha_min <= alpha0");
  }
  if (kind == ScheduleKind::StepDecay && (every == 0 || !(decay > 0.0) || decay > 1.0)) {
    throw Error(Errc::InvalidSpec, "step decay needs every >= 1 and decay in (0, 1]");
  }
}

double MomentumSchedule::at(std::size_t t) const {
  return mu == 1.0 ? rho0 : rho0 * std::pow(mu, static_cast<double>(t));
}

void MomentumSchedule::validate() const {
  if (!(rho0 >= 0.0) || !(rho0 < 1.0)) throw Error(Errc::InvalidSpec, "momentum rho0 must lie in [0, 1)");
  if (!(mu > 0.0) || mu > 1.0) throw Error(Errc::InvalidSpec, "momentum decay mu must lie in (0, 1]");
}

std::size_t RegScope::group_count() const {
  std::size_t s = 0;
  for (const auto& b : blocks) s += b.partition.size();
  return s;
}

RegScope per_layer_scope(const std::vector<LayerGroups>& layers, const std::vector<double>& lambdas,
                         const std::vector<std::size_t>& ks) {
  if (lambdas.size() != layers.size() || ks.size() != layers.size()) {
    throw Error(Errc::InvalidSpec, "per-layer scope needs one (lambda, k) per regularized layer (" +
                                       std::to_string(layers.size()) + ")");
  }
  RegScope s;
  s.kind = ScopeKind::PerLayer;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    RegBlock b{layers[l].coords, layers[l].partition, {ks[l], lambdas[l]}};
    b.params.validate(b.partition.size());
    s.blocks.push_back(std::move(b));
  }
  return s;
}

RegScope global_scope(const std::vector<LayerGroups>& layers, double lambda, std::size_t k) {
  const auto all = concat_groups(layers);
  RegScope s;
  s.kind = ScopeKind::Global;
  s.blocks.push_back({all.coords, all.partition, {k, lambda}});
  s.blocks.back().params.validate(all.partition.size());
  return s;
}

ProxSgdState::ProxSgdState(std::vector<double> theta0) : theta(std::move(theta0)), m(theta.size(), 0.0) {}

void prox_sgd_step(ProxSgdState& state, std::span<const double> grad, const RegScope& scope,
                   const StepSchedule& alpha, const MomentumSchedule& rho, std::uint64_t seed) {
  if (grad.size() != state.theta.size() || state.m.size() != state.theta.size()) {
    throw Error(Errc::DimensionMismatch, "gradient, momentum and theta lengths differ");
  }
  const double a = alpha.at(state.t);
  const double r = rho.at(state.t);
  if (!(a > 0.0)) throw Error(Errc::NonpositiveStep, "stepsize " + std::to_string(a));
  if (!(r >= 0.0) || !(r < 1.0)) throw Error(Errc::InvalidSpec, "momentum " + std::to_string(r));

  for (std::size_t i = 0; i < grad.size(); ++i) {
    state.m[i] = r * state.m[i] + (1.0 - r) * grad[i];
    state.theta[i] -= a * state.m[i];
  }
  double mass = 0.0;
  for (std::size_t bi = 0; bi < scope.blocks.size(); ++bi) {
    const auto& b = scope.blocks[bi];
    const auto t = gather(state.theta, b.coords);
    auto res = prox(b.partition, b.params, a, t, derive_seed(seed, kRootStream, state.t * 1315423911ULL + bi));
    scatter(state.theta, b.coords, res.v);
    mass += res.dual.mass();
  }
  state.last_dual_mass = mass;
  ++state.t;
}

std::vector<double> prune(std::span<const double> theta, const GroupPartition& partition, std::size_t k,
                          bool weighted) {
  if (theta.size() != partition.dim()) throw Error(Errc::DimensionMismatch, "theta does not match the partition");
  const std::size_t m = partition.size();
  if (k < 1 || k > m) throw Error(Errc::InvalidSpec, "prune needs 1 <= k <= m");
  auto norms = raw_group_norms(partition, theta);
  if (weighted) {
    for (std::size_t j = 0; j < m; ++j) norms[j] *= std::sqrt(partition.weight(j));
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });
  std::vector<double> out(theta.begin(), theta.end());
  for (std::size_t r = k; r < m; ++r) {
    for (std::size_t i : partition.group(order[r])) out[i] = 0.0;
  }
  return out;
}

void prune_scope(std::span<double> theta, const RegScope& scope, bool weighted) {
  for (const auto& b : scope.blocks) {
    const auto local = gather(theta, b.coords);
    scatter(theta, b.coords, prune(local, b.partition, b.params.k, weighted));
  }
}

std::size_t scope_zero_groups(const RegScope& scope, std::span<const double> theta, double tol) {
  std::size_t zero = 0;
  for (const auto& b : scope.blocks) {
    for (std::size_t j = 0; j < b.partition.size(); ++j) {
      if (norm_of(theta, b.partition.group(j), b.coords) <= tol) ++zero;
    }
  }
  return zero;
}

double scope_sparsity(const RegScope& scope, std::span<const double> theta, double tol) {
  const std::size_t total = scope.group_count();
  if (total == 0) return 0.0;
  return 100.0 * static_cast<double>(scope_zero_groups(scope, theta, tol)) / static_cast<double>(total);
}

double composite_objective(const Model& model, const Dataset& data, const RegScope& scope) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  double f = model.loss(make_batch(data, rows));
  for (const auto& b : scope.blocks) {
    f += b.params.lambda * value(b.partition, b.params, gather(model.params(), b.coords)).value;
  }
  return f;
}

TrainResult train(Model model, const Dataset& train_data, const Dataset& val_data, const RegScope& scope,
                  const TrainConfig& config) {
  check_config(train_data, val_data, model, scope, config);
  ProxSgdState state(flatten_params(model));
  std::vector<double> before;
  auto step = [&](const std::vector<double>& grad) {
    if (config.on_step) before = state.theta;
    const std::size_t t = state.t;
    prox_sgd_step(state, grad, scope, config.alpha, config.rho, config.seed);
    if (config.on_step) config.on_step({Phase::FirstOrder, t, before, state.theta});
  };
  TrainResult result;
  result.records = run_epochs(model, train_data, val_data, scope, config, state, step, [](std::size_t) {});
  scatter_params(model, state.theta);
  result.model = std::move(model);
  result.switch_step = state.t;
  finish(result, val_data, scope, config);
  return result;
}

TrainResult hspg_train(Model model, const Dataset& train_data, const Dataset& val_data,
                       const RegScope& scope, const TrainConfig& config, const HspgConfig& hspg) {
  check_config(train_data, val_data, model, scope, config);
  if (!(hspg.epsilon >= 0.0) || !(hspg.epsilon < 1.0)) {
    throw Error(Errc::ConfigInvalid, "half-space epsilon must lie in [0, 1)");
  }
  if (hspg.when.kind == SwitchKind::SparsityStable && hspg.when.window < 2) {
    throw Error(Errc::ConfigInvalid, "sparsity-stable switch needs a window of at least 2 epochs");
  }

  ProxSgdState state(flatten_params(model));
  bool half_space = hspg.when.kind == SwitchKind::FixedIterations && hspg.when.iterations == 0;
  std::size_t switch_step = half_space ? 0 : std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> zero_history;
  std::vector<double> before;

  // In-block position of every regularized coordinate, to find unregularized ones.
  std::vector<bool> regularized(state.theta.size(), false);
  for (const auto& b : scope.blocks) {
    for (std::size_t i : b.coords) regularized[i] = true;
  }

  auto half_space_step = [&](const std::vector<double>& grad) {
    const double a = config.alpha.at(state.t);
    std::vector<double> next = state.theta;
    for (std::size_t i = 0; i < next.size(); ++i) {
      if (!regularized[i]) next[i] -= a * grad[i];
    }
    double mass = 0.0;
    for (const auto& b : scope.blocks) {
      const auto theta_b = gather(state.theta, b.coords);
      // Groups below the zero threshold are sparse; only dense groups move.
      std::vector<bool> dense(b.partition.size());
      std::vector<double> clean = theta_b;
      for (std::size_t j = 0; j < b.partition.size(); ++j) {
        dense[j] = norm_of(state.theta, b.partition.group(j), b.coords) > kDefaultZeroTol;
        if (!dense[j]) {
          for (std::size_t i : b.partition.group(j)) clean[i] = 0.0;
        }
      }
      std::vector<double> env(theta_b.size(), 0.0);
      if (b.params.lambda > 0.0) {
        env = envelope_gradient(b.partition, b.params, clean);
        mass += value(b.partition, b.params, clean).dual.mass();
      }
      for (std::size_t j = 0; j < b.partition.size(); ++j) {
        const auto g = b.partition.group(j);
        if (!dense[j]) {
          for (std::size_t i : g) next[b.coords[i]] = 0.0;
          continue;
        }
        double inner = 0.0, sq = 0.0;
        for (std::size_t i : g) {
          const double trial = theta_b[i] - a * (grad[b.coords[i]] + b.params.lambda * env[i]);
          next[b.coords[i]] = trial;
          inner += trial * theta_b[i];
          sq += theta_b[i] * theta_b[i];
        }
        if (inner < hspg.epsilon * sq) {
          for (std::size_t i : g) next[b.coords[i]] = 0.0;
        }
      }
    }
    state.theta = std::move(next);
    state.last_dual_mass = mass;
    ++state.t;
  };

  auto step = [&](const std::vector<double>& grad) {
    if (!half_space && hspg.when.kind == SwitchKind::FixedIterations && state.t >= hspg.when.iterations) {
      half_space = true;
      switch_step = state.t;
    }
    if (config.on_step) before = state.theta;
    const std::size_t t = state.t;
    if (half_space) {
      half_space_step(grad);
    } else {
      prox_sgd_step(state, grad, scope, config.alpha, config.rho, config.seed);
    }
    if (config.on_step) {
      config.on_step({half_space ? Phase::HalfSpace : Phase::FirstOrder, t, before, state.theta});
    }
  };
  auto end_epoch = [&](std::size_t) {
    if (half_space || hspg.when.kind != SwitchKind::SparsityStable) return;
    zero_history.push_back(scope_zero_groups(scope, state.theta, config.zero_tol));
    if (zero_history.size() < hspg.when.window) return;
    const auto first = zero_history.end() - static_cast<std::ptrdiff_t>(hspg.when.window);
    const auto [lo, hi] = std::minmax_element(first, zero_history.end());
    if (static_cast<double>(*hi - *lo) < hspg.when.tol_groups) {
      half_space = true;
      switch_step = state.t;
    }
  };

  TrainResult result;
  result.records = run_epochs(model, train_data, val_data, scope, config, state, step, end_epoch);
  scatter_params(model, state.theta);
  result.model = std::move(model);
  result.switched = half_space;
  result.switch_step = half_space ? switch_step : state.t;
  finish(result, val_data, scope, config);
  return result;
}

}  // namespace wgsef
