#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "wgsef/envelope.hpp"
#include "wgsef/errors.hpp"
#include "wgsef/optim.hpp"

using namespace wgsef;

namespace {

struct Synthetic {
  SyntheticProblem problem;
  Dataset train, val;
  Model model;
  RegScope scope;
};

Synthetic synthetic(std::uint64_t seed, double lambda = 0.1, std::size_t k = 4) {
  Synthetic s;
  SyntheticGroupSpec spec;
  spec.seed = 1000 + seed;
  s.problem = gen_group_sparse(spec);
  std::tie(s.train, s.val) = split_tail(s.problem.data, 0.1);
  s.model = build(ModelSpec{Architecture::Linear, {200}, 1, {}, derive_seed(seed, kInitStream, 0)});
  const GroupingScheme g{SchemeKind::Custom, {}, GroupPartition::contiguous(200, 10)};
  s.scope = global_scope(make_groups(s.model, g), lambda, k);
  return s;
}

TrainConfig synthetic_config(std::uint64_t seed) {
  TrainConfig c;
  c.epochs = 20;
  c.batch_size = 32;
  c.alpha.alpha0 = 0.05;
  c.seed = seed;
  return c;
}

std::vector<std::size_t> support(const RegBlock& b, std::span<const double> theta) {
  std::vector<std::size_t> s;
  for (std::size_t j = 0; j < b.partition.size(); ++j) {
    double q = 0;
    for (std::size_t i : b.partition.group(j)) q += theta[b.coords[i]] * theta[b.coords[i]];
    if (q > 0) s.push_back(j);
  }
  return s;
}

}  // namespace

TEST_CASE("schedules") {
  StepSchedule cos{ScheduleKind::Cosine, 1.0, 10, 0.0};
  CHECK(cos.at(0) == 1.0);
  CHECK(cos.at(5) == doctest::Approx(0.5));
  CHECK(cos.at(9) > 0.0);
  try {
    (void)cos.at(10);
    FAIL("expected ScheduleExhausted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ScheduleExhausted);
  }
  StepSchedule step{ScheduleKind::StepDecay, 1.0, 0, 0.0, 0.5, 3};
  CHECK(step.at(2) == 1.0);
  CHECK(step.at(3) == 0.5);
  CHECK(step.at(7) == 0.25);
  MomentumSchedule rho{0.9, 0.5};
  CHECK(rho.at(0) == 0.9);
  CHECK(rho.at(2) == doctest::Approx(0.225));
  CHECK_THROWS_AS((MomentumSchedule{1.0, 1.0}.validate()), Error);
  CHECK_THROWS_AS((StepSchedule{ScheduleKind::Cosine, 1.0, 0}.validate()), Error);
}

TEST_CASE("prune") {
  const auto p = GroupPartition::contiguous(4, 2);
  CHECK(prune(std::vector<double>{3, 0, 0, 1}, p, 1) == std::vector<double>{3, 0, 0, 0});
  CHECK(prune(std::vector<double>{3, 0, 0, 1}, p, 2) == std::vector<double>{3, 0, 0, 1});
  // Equal norms: the lower group index survives.
  const auto q = GroupPartition::contiguous(6, 2);
  CHECK(prune(std::vector<double>{0, 1, 1, 0, 0, 1}, q, 1) == std::vector<double>{0, 1, 0, 0, 0, 0});
  CHECK(prune(std::vector<double>{0, 1, 1, 0, 0, 1}, q, 2) == std::vector<double>{0, 1, 1, 0, 0, 0});
  // Weighted ranking can change the survivor: sqrt(d) * norm with d = (1, 16).
  const auto w = GroupPartition::make(2, {{0}, {1}}, std::vector<double>{1, 16});
  CHECK(prune(std::vector<double>{3, 1}, w, 1) == std::vector<double>{3, 0});
  CHECK(prune(std::vector<double>{3, 1}, w, 1, true) == std::vector<double>{0, 1});
  CHECK_THROWS_AS(prune(std::vector<double>{1, 2}, w, 0), Error);

  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 40, m = 1 + rng() % n;
    const auto part = oracle::random_partition(rng, n, m);
    const std::size_t k = 1 + rng() % m;
    const auto x = oracle::normal_vector(rng, n);
    const auto y = prune(x, part, k);
    CHECK(group_sparsity_ratio(part, y) >= static_cast<double>(m - k) / static_cast<double>(m));
    CHECK(count_zero_groups(part, y) == m - k);
  }
}

TEST_CASE("prox_sgd_step unrolls to the prox") {
  std::mt19937_64 rng(8);
  const auto p = oracle::random_partition(rng, 30, 6);
  RegScope scope;
  scope.blocks.push_back({std::vector<std::size_t>(30), p, {2, 0.7}});
  std::iota(scope.blocks[0].coords.begin(), scope.blocks[0].coords.end(), 0);
  const auto t = oracle::normal_vector(rng, 30);
  ProxSgdState st(std::vector<double>(30, 0.0));
  prox_sgd_step(st, t, scope, {ScheduleKind::Constant, 1.0}, {0.0, 1.0}, 5);
  std::vector<double> neg(30);
  for (std::size_t i = 0; i < 30; ++i) neg[i] = -t[i];
  const auto expect = prox(p, {2, 0.7}, 1.0, neg, 0);
  CHECK(oracle::max_abs_diff(st.theta, expect.v) <= 1e-12);
  CHECK(st.t == 1);
  CHECK(st.last_dual_mass == doctest::Approx(expect.dual.mass()));
  CHECK_THROWS_AS(prox_sgd_step(st, std::vector<double>(3), scope, {}, {}, 0), Error);
}

TEST_CASE("ridge fixed point with k = m") {
  std::mt19937_64 rng(12);
  const auto p = oracle::random_partition(rng, 24, 5);
  const double lambda = 0.8;
  RegScope scope;
  scope.blocks.push_back({std::vector<std::size_t>(24), p, {5, lambda}});
  std::iota(scope.blocks[0].coords.begin(), scope.blocks[0].coords.end(), 0);
  const auto c = oracle::normal_vector(rng, 24);
  ProxSgdState st(std::vector<double>(24, 0.0));
  std::vector<double> g(24);
  for (int it = 0; it < 1000; ++it) {
    for (std::size_t i = 0; i < 24; ++i) g[i] = st.theta[i] - c[i];
    prox_sgd_step(st, g, scope, {ScheduleKind::Constant, 0.5}, {0.0, 1.0}, 1);
  }
  for (std::size_t j = 0; j < p.size(); ++j) {
    for (std::size_t i : p.group(j)) CHECK(std::abs(st.theta[i] - c[i] / (1 + lambda * p.weight(j))) <= 1e-6);
  }
}

TEST_CASE("momentum buffer stays within the largest gradient norm") {
  std::mt19937_64 rng(13);
  RegScope empty;
  ProxSgdState st(std::vector<double>(10, 0.0));
  double max_g = 0.0;
  for (int it = 0; it < 300; ++it) {
    auto g = oracle::normal_vector(rng, 10);
    for (double& v : g) v *= 1.0 + (it % 7);
    max_g = std::max(max_g, oracle::norm(g));
    prox_sgd_step(st, g, empty, {ScheduleKind::Constant, 0.1}, {0.9, 0.99}, 0);
    CHECK(oracle::norm(st.m) <= max_g * (1 + 1e-12));
  }
}

TEST_CASE("lambda = 0 reproduces plain momentum SGD bitwise") {
  auto s = synthetic(3, 0.0);
  TrainConfig c = synthetic_config(3);
  c.epochs = 4;
  const auto res = train(s.model, s.train, s.val, s.scope, c);

  Model ref = s.model;
  std::vector<double> theta = flatten_params(ref), m(theta.size(), 0.0), g(theta.size());
  for (std::size_t epoch = 1; epoch <= c.epochs; ++epoch) {
    for (const auto& rows : batches(s.train.size(), c.batch_size, derive_seed(c.seed, kEpochStream, epoch))) {
      scatter_params(ref, theta);
      ref.loss_and_grad(make_batch(s.train, rows), g);
      for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = 0.9 * m[i] + (1.0 - 0.9) * g[i];
        theta[i] -= 0.05 * m[i];
      }
    }
  }
  CHECK(flatten_params(res.model) == theta);
}

TEST_CASE("training on the synthetic task") {
  SUBCASE("epochs = 0 returns the initial model") {
    auto s = synthetic(1);
    auto c = synthetic_config(1);
    c.epochs = 0;
    const auto r = train(s.model, s.train, s.val, s.scope, c);
    CHECK(r.records.empty());
    CHECK(flatten_params(r.model) == flatten_params(s.model));
  }
  SUBCASE("prune leaves exactly k groups on the planted support") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      auto s = synthetic(seed);
      auto c = synthetic_config(seed);
      c.prune_at_end = true;
      const auto r = train(s.model, s.train, s.val, s.scope, c);
      REQUIRE(r.records.size() == 20);
      CHECK(r.pruned);
      CHECK(r.after_prune.surviving == std::vector<std::size_t>{4});
      CHECK(support(s.scope.blocks[0], r.model.params()) == s.problem.planted);
      CHECK(r.after_prune.group_sparsity >= 80.0);
    }
  }
  SUBCASE("k = m with small lambda tracks plain SGD") {
    auto s = synthetic(4, 1e-3, 20);
    auto plain = synthetic(4, 0.0, 20);
    const auto c = synthetic_config(4);
    const auto r = train(s.model, s.train, s.val, s.scope, c);
    const auto b = train(plain.model, plain.train, plain.val, plain.scope, c);
    CHECK(std::abs(r.records.back().val_error - b.records.back().val_error) <= 0.5);
  }
  SUBCASE("composite objective trends down") {
    auto s = synthetic(5);
    auto c = synthetic_config(5);
    c.alpha.alpha0 = 0.01;
    c.epochs = 20;
    std::vector<double> F;
    Model probe = s.model;
    F.push_back(composite_objective(probe, s.train, s.scope));
    for (std::size_t e = 1; e <= c.epochs; ++e) {
      c.epochs = e;
      const auto r = train(s.model, s.train, s.val, s.scope, c);
      F.push_back(composite_objective(r.model, s.train, s.scope));
    }
    std::size_t down = 0;
    for (std::size_t i = 1; i < F.size(); ++i) down += F[i] <= F[i - 1] ? 1 : 0;
    CHECK(static_cast<double>(down) >= 0.95 * static_cast<double>(F.size() - 1));
  }
  SUBCASE("errors") {
    auto s = synthetic(1);
    auto c = synthetic_config(1);
    Dataset empty;
    try {
      train(s.model, empty, s.val, s.scope, c);
      FAIL("expected DataEmpty");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::DataEmpty);
    }
    c.batch_size = 0;
    try {
      train(s.model, s.train, s.val, s.scope, c);
      FAIL("expected ConfigInvalid");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ConfigInvalid);
    }
  }
}

TEST_CASE("half-space projection") {
  SUBCASE("epsilon = 0 zeroes a group only on a negative inner product") {
    // One coordinate per group, theta = (1, -1), gradient pushes group 0 past zero.
    Model lin({LayerDesc{LayerKind::Dense, 2, 1}}, {2}, LossKind::Mse);
    lin.params()[0] = 1.0;
    lin.params()[1] = -1.0;
    Dataset d;
    d.inputs = Tensor({1, 2}, {1, 0});
    d.targets = Tensor({1, 1}, {-5});
    const GroupingScheme g{SchemeKind::Unstructured};
    const auto scope = global_scope(make_groups(lin, g), 0.0, 2);
    TrainConfig c;
    c.epochs = 1;
    c.batch_size = 1;
    c.alpha.alpha0 = 0.5;
    HspgConfig h{{SwitchKind::FixedIterations, 0}, 0.0};
    // residual 1 - (-5) = 6, trial w0 = 1 - 0.5 * 6 = -2: negative inner product, zeroed.
    const auto r = hspg_train(lin, d, d, scope, c, h);
    CHECK(r.model.params()[0] == 0.0);
    CHECK(r.model.params()[1] == -1.0);
    d.targets.data[0] = 0.5;  // trial w0 = 1 - 0.5 * 0.5 = 0.75 > 0: kept
    const auto r2 = hspg_train(lin, d, d, scope, c, h);
    CHECK(r2.model.params()[0] == doctest::Approx(0.75));
  }
  SUBCASE("zero groups stay frozen and HSPG is at least as sparse") {
    for (std::uint64_t seed = 0; seed < 2; ++seed) {
      auto s = synthetic(seed);
      auto c = synthetic_config(seed);
      std::size_t half_steps = 0, violations = 0;
      const auto& blk = s.scope.blocks[0];
      c.on_step = [&](const StepInfo& info) {
        if (info.phase != Phase::HalfSpace) return;
        ++half_steps;
        for (std::size_t j = 0; j < blk.partition.size(); ++j) {
          bool was_zero = true;
          for (std::size_t i : blk.partition.group(j)) was_zero &= info.before[blk.coords[i]] == 0.0;
          if (!was_zero) continue;
          for (std::size_t i : blk.partition.group(j)) violations += info.after[blk.coords[i]] != 0.0;
        }
      };
      const std::size_t steps = c.epochs * ((s.train.size() + c.batch_size - 1) / c.batch_size);
      const auto h = hspg_train(s.model, s.train, s.val, s.scope, c,
                                {{SwitchKind::FixedIterations, steps / 2}, 0.0});
      c.on_step = nullptr;
      const auto a = train(s.model, s.train, s.val, s.scope, c);
      CHECK(h.switched);
      CHECK(h.switch_step == steps / 2);
      CHECK(half_steps == steps - steps / 2);
      CHECK(violations == 0);
      CHECK(h.records.back().group_sparsity >= a.records.back().group_sparsity);
      CHECK(std::abs(h.records.back().val_error - a.records.back().val_error) <= 1.0);
    }
  }
  SUBCASE("sparsity-stable switch") {
    auto s = synthetic(2);
    auto c = synthetic_config(2);
    const auto h = hspg_train(s.model, s.train, s.val, s.scope, c, {{SwitchKind::SparsityStable, 0, 3, 1.0}, 0.2});
    CHECK(h.switched);
    CHECK(h.switch_step > 0);
    CHECK(h.switch_step < 20 * 29);
    CHECK_THROWS_AS(hspg_train(s.model, s.train, s.val, s.scope, c, {{}, 1.0}), Error);
  }
}
