// Acceptance checks 1-10. Prints one PASS/FAIL line per criterion; exits
// nonzero if any fails. Optional arguments select criteria, e.g. `acceptance 1 2 9`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <string>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "wgsef/envelope.hpp"
#include "wgsef/models.hpp"
#include "wgsef/optim.hpp"
#include "wgsef/run.hpp"
#include "wgsef/selftest.hpp"

using namespace wgsef;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double group_norm(const GroupPartition& p, std::size_t j, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t i : p.group(j)) s += x[i] * x[i];
  return std::sqrt(s);
}

// Prox of lam * envelope by plain bisection on the dual multiplier. With
// b_j = sqrt(d_j) ||t_j|| and a_j = lam d_j, the prox value per group is
// (1/2)||t_j||^2 a_j / (u_j + a_j) minimised over 0 <= u <= 1, sum u <= k; its
// KKT conditions give u_j = clamp(eta b_j - a_j, 0, 1) with sum u = k, and
// then v_j = t_j u_j / (u_j + a_j).
std::vector<double> prox_bisection_oracle(const GroupPartition& p, std::size_t k, double lam,
                                          const std::vector<double>& t) {
  const std::size_t m = p.size();
  std::vector<long double> b(m), a(m);
  std::size_t nonzero = 0;
  long double hi = 0.0L;
  for (std::size_t j = 0; j < m; ++j) {
    b[j] = std::sqrt(static_cast<long double>(p.weight(j))) * group_norm(p, j, t);
    a[j] = static_cast<long double>(lam) * p.weight(j);
    if (b[j] > 0) {
      ++nonzero;
      hi = std::max(hi, (a[j] + 1.0L) / b[j]);
    }
  }
  auto u_at = [&](long double eta, std::size_t j) {
    return b[j] > 0 ? std::clamp(eta * b[j] - a[j], 0.0L, 1.0L) : 0.0L;
  };
  long double eta = hi;
  if (nonzero > k) {
    long double lo = 0.0L;
    for (int it = 0; it < 300; ++it) {
      const long double mid = 0.5L * (lo + hi);
      long double g = -static_cast<long double>(k);
      for (std::size_t j = 0; j < m; ++j) g += u_at(mid, j);
      (g >= 0 ? hi : lo) = mid;
    }
    eta = hi;
  }
  std::vector<double> v(t.size(), 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const long double u = nonzero > k ? u_at(eta, j) : (b[j] > 0 ? 1.0L : 0.0L);
    for (std::size_t i : p.group(j)) v[i] = static_cast<double>(t[i] * u / (u + a[j]));
  }
  return v;
}

// Half the sum of the k largest ||y_j||^2 / d_j.
double conjugate_oracle(const GroupPartition& p, std::size_t k, const std::vector<double>& y) {
  std::vector<double> q;
  for (std::size_t j = 0; j < p.size(); ++j) q.push_back(std::pow(group_norm(p, j, y), 2) / p.weight(j));
  std::sort(q.rbegin(), q.rend());
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) s += q[j];
  return 0.5 * s;
}

double ridge(const GroupPartition& p, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) s += 0.5 * p.weight(j) * std::pow(group_norm(p, j, x), 2);
  return s;
}

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  std::size_t bad = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t m = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(m, 64)(rng);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, m)(rng);
    const double lam = std::exp(std::uniform_real_distribution<double>(std::log(1e-3), std::log(10.0))(rng));
    const auto p = oracle::random_partition(rng, n, m, 0.1, 10.0);
    const auto t = oracle::normal_vector(rng, n, 3.0);
    const auto fast = prox(p, {k, lam}, 1.0, t, rng());
    const double d = oracle::max_abs_diff(fast.v, prox_bisection_oracle(p, k, lam, t));
    worst = std::max(worst, d);
    if (d > 1e-8) ++bad;
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 30.0,
          fmt("10000 instances, %zu above 1e-8, worst inf-norm %.2e, %.2f s", bad, worst, secs)};
}

Outcome criterion2() {
  // Singletons, d = 1, k = 1, lambda = 1, t = (3, 1).
  // prox: u_j = clamp(eta |t_j| - 1, 0, 1) with u_1 + u_2 = 1. eta = 2/3 gives
  // u = (1, 0) (since 3 * 2/3 - 1 = 1 and 2/3 - 1 < 0), so v = (3 * 1/2, 0) = (1.5, 0).
  // value: min(1, 3 eta) + min(1, eta) = 1 at eta = 1/4, u = (3/4, 1/4),
  // value = (9 / (3/4) + 1 / (1/4)) / 2 = (12 + 4) / 2 = 8.
  const auto p = GroupPartition::singletons(2);
  const std::vector<double> t{3.0, 1.0};
  const auto pr = prox(p, {1, 1.0}, 1.0, t, 1);
  const auto val = value(p, {1, 1.0}, t);
  const double e1 = std::max(std::abs(pr.v[0] - 1.5), std::abs(pr.v[1]));
  const double e2 = std::abs(val.value - 8.0);
  const double e3 = std::max(std::abs(val.dual.u[0] - 0.75), std::abs(val.dual.u[1] - 0.25));
  const double worst = std::max({e1, e2, e3});
  return {worst <= 1e-10, fmt("prox (%.12g, %.12g), value %.12g, u (%.12g, %.12g); worst error %.1e", pr.v[0],
                              pr.v[1], val.value, val.dual.u[0], val.dual.u[1], worst)};
}

Outcome criterion3() {
  std::mt19937_64 rng(303);
  std::size_t fail_eq = 0, fail_strict = 0, fail_convex = 0, fail_nonexp = 0, fail_fy = 0, fail_fy_eq = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = std::uniform_int_distribution<std::size_t>(2, 8)(rng);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(m, 40)(rng);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, m - 1)(rng);
    const double lam = std::exp(std::uniform_real_distribution<double>(std::log(1e-2), std::log(10.0))(rng));
    const auto p = oracle::random_partition(rng, n, m, 0.1, 10.0);
    const EnvelopeParams params{k, lam};

    const auto sparse = oracle::keep_groups(rng, p, oracle::normal_vector(rng, n), k);
    const double rs = ridge(p, sparse);
    if (std::abs(value(p, params, sparse).value - rs) > 1e-10 * std::max(1.0, rs)) ++fail_eq;

    const auto dense = oracle::normal_vector(rng, n);
    const double rd = ridge(p, dense), vd = value(p, params, dense).value;
    const double cap = std::ceil(static_cast<double>(m) / static_cast<double>(k)) * rd;
    if (!(vd > rd && vd < cap)) ++fail_strict;

    const auto y = oracle::normal_vector(rng, n, 2.0);
    std::vector<double> mid(n);
    for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (dense[i] + y[i]);
    const double vy = value(p, params, y).value, vm = value(p, params, mid).value;
    if (vm > 0.5 * (vd + vy) + 1e-9 * std::max(1.0, vd + vy)) ++fail_convex;

    const auto pa = prox(p, params, 1.0, dense, rng()).v, pb = prox(p, params, 1.0, y, rng()).v;
    std::vector<double> dv(n), dt(n);
    for (std::size_t i = 0; i < n; ++i) {
      dv[i] = pa[i] - pb[i];
      dt[i] = dense[i] - y[i];
    }
    if (oracle::norm(dv) > oracle::norm(dt) * (1.0 + 1e-12) + 1e-12) ++fail_nonexp;

    if (vd + conjugate_oracle(p, k, y) < oracle::dot(dense, y) - 1e-8 * std::max(1.0, std::abs(oracle::dot(dense, y)))) {
      ++fail_fy;
    }
    const auto g = envelope_gradient(p, params, dense);
    const double lhs = vd + conjugate_oracle(p, k, g), rhs = oracle::dot(dense, g);
    if (std::abs(lhs - rhs) > 1e-8 * std::max(1.0, std::abs(rhs))) ++fail_fy_eq;
  }
  const std::size_t total = fail_eq + fail_strict + fail_convex + fail_nonexp + fail_fy + fail_fy_eq;
  return {total == 0,
          fmt("1000 points; failures: sparse equality %zu, strict bounds %zu, midpoint convexity %zu, "
              "nonexpansive %zu, Fenchel-Young %zu, FY equality %zu",
              fail_eq, fail_strict, fail_convex, fail_nonexp, fail_fy, fail_fy_eq)};
}

Outcome criterion4() {
  std::mt19937_64 rng(404);
  double worst_v = 0.0, worst_p = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 30)(rng);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, n)(rng);
    const double lam = std::exp(std::uniform_real_distribution<double>(std::log(1e-3), std::log(10.0))(rng));
    const auto p = GroupPartition::singletons(n);
    const auto x = oracle::normal_vector(rng, n, 2.0);
    const double ref = oracle::sef_value(x, k);
    worst_v = std::max(worst_v, std::abs(value(p, {k, lam}, x).value - ref) / std::max(1.0, std::abs(ref)));
    worst_p = std::max(worst_p, oracle::max_abs_diff(prox(p, {k, lam}, 1.0, x, rng()).v, oracle::sef_prox(x, k, lam)));
  }
  return {worst_v <= 1e-10 && worst_p <= 1e-10,
          fmt("1000 instances; worst value error %.2e, worst prox error %.2e", worst_v, worst_p)};
}

Outcome criterion5() {
  std::mt19937_64 rng(505);
  std::size_t checked = 0, failed = 0;
  double worst = 0.0;
  auto tally = [&](const gradcheck::Report& r) {
    checked += r.checked;
    failed += r.failed;
    worst = std::max(worst, r.worst);
  };
  using gradcheck::random_tensor;
  for (std::size_t variant = 0; variant < 6; ++variant) {
    const std::size_t stride = 1 + variant % 2, pad = variant % 3;
    const std::size_t side = (7 + 2 * pad - 3) / stride + 1;
    const auto t2 = random_tensor(rng, {3, 4});
    const auto t4 = random_tensor(rng, {2, 3, 3, 3});
    const auto tc = random_tensor(rng, {2, 3, side, side});
    tally(gradcheck::check([&](Tape& t, const std::vector<Var>& v) { return mse(t, matmul(t, v[0], v[1]), t2); },
                           {random_tensor(rng, {3, 5}), random_tensor(rng, {5, 4})}, rng));
    tally(gradcheck::check(
        [&](Tape& t, const std::vector<Var>& v) { return mse(t, matmul(t, v[0], v[1], true), t2); },
        {random_tensor(rng, {3, 5}), random_tensor(rng, {4, 5})}, rng));
    tally(gradcheck::check(
        [&](Tape& t, const std::vector<Var>& v) { return mse(t, conv2d(t, v[0], v[1], stride, pad), tc); },
        {random_tensor(rng, {2, 2, 7, 7}), random_tensor(rng, {3, 2, 3, 3})}, rng));
    tally(gradcheck::check([&](Tape& t, const std::vector<Var>& v) { return mse(t, max_pool2d(t, v[0]), t4); },
                           {random_tensor(rng, {2, 3, 6, 7})}, rng));
    tally(gradcheck::check([&](Tape& t, const std::vector<Var>& v) { return mse(t, relu(t, v[0]), t2); },
                           {random_tensor(rng, {3, 4})}, rng));
    tally(gradcheck::check([&](Tape& t, const std::vector<Var>& v) { return mse(t, add_bias(t, v[0], v[1]), t4); },
                           {random_tensor(rng, {2, 3, 3, 3}), random_tensor(rng, {3})}, rng));
    tally(gradcheck::check(
        [&](Tape& t, const std::vector<Var>& v) { return mse(t, flatten(t, v[0]), Tensor({3, 4}, t2.data)); },
        {random_tensor(rng, {3, 2, 2})}, rng));
    tally(gradcheck::check(
        [&](Tape& t, const std::vector<Var>& v) { return softmax_cross_entropy(t, v[0], {0, 3, 1}); },
        {random_tensor(rng, {3, 4}, 2.0)}, rng));
    tally(gradcheck::check(
        [&](Tape& t, const std::vector<Var>& v) { return mse(t, add(t, scale(t, v[0], -1.5), v[1]), t2); },
        {random_tensor(rng, {3, 4}), random_tensor(rng, {3, 4})}, rng));
  }

  // Full LeNet-5 on a two-image batch, randomized parameter coordinates.
  Model m = build(ModelSpec{Architecture::LeNet5, {1, 32, 32}, 10, {}, 55});
  for (const auto& l : m.layers()) {
    for (double& b : m.params().subspan(l.bias_offset, l.out)) b = std::uniform_real_distribution<double>(-0.1, 0.1)(rng);
  }
  Batch batch;
  batch.inputs = random_tensor(rng, {2, 1, 32, 32});
  batch.labels = {7, 2};
  std::vector<double> grad(m.param_count());
  m.loss_and_grad(batch, grad);
  const double h = 1e-5;
  std::size_t lenet_failed = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t i = rng() % m.param_count();
    const double keep = m.params()[i];
    m.params()[i] = keep + h;
    const double up = m.loss(batch);
    m.params()[i] = keep - h;
    const double down = m.loss(batch);
    m.params()[i] = keep;
    const double fd = (up - down) / (2 * h);
    const double err = std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
    worst = std::max(worst, err);
    ++checked;
    if (err > 1e-4) ++lenet_failed;
  }
  failed += lenet_failed;
  return {failed == 0, fmt("%zu coordinates (9 primitives x 6 variants + 200 LeNet-5), %zu failed, worst rel %.2e",
                           checked, failed, worst)};
}

RunConfig shipped(const std::string& name) { return load_run_config(std::string(WGSEF_CONFIG_DIR) + "/" + name); }

Outcome criterion6() {
  const RunConfig base = shipped("synthetic.json");
  std::size_t recovered = 0;
  double slowest = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig c = base;
    c.seed = seed;
    const Experiment e = prepare(c);
    TrainConfig tc;
    tc.epochs = c.epochs;
    tc.batch_size = c.batch_size;
    tc.alpha = c.alpha;
    tc.rho = c.rho;
    tc.seed = seed;
    tc.prune_at_end = true;
    const auto r = train(e.model, e.train, e.val, e.scope, tc);
    if (nonzero_groups(concat_groups(e.groups), r.model.params()) == e.planted->planted) ++recovered;
    slowest = std::max(slowest, seconds_since(t0));
  }
  return {recovered >= 18 && slowest < 30.0,
          fmt("planted support recovered in %zu/20 runs (need 18), slowest run %.2f s", recovered, slowest)};
}

struct LenetRuns {
  TrainResult reg, base;
  double seconds = 0.0;
};

const LenetRuns& lenet_runs() {
  static const LenetRuns runs = [] {
    LenetRuns out;
    const auto t0 = std::chrono::steady_clock::now();
    for (const char* name : {"lenet_mnist.json", "lenet_mnist_baseline.json"}) {
      const RunConfig c = shipped(name);
      const Experiment e = prepare(c);
      TrainConfig tc;
      tc.epochs = c.epochs;
      tc.batch_size = c.batch_size;
      tc.alpha = c.alpha;
      tc.rho = c.rho;
      tc.seed = c.seed;
      tc.prune_at_end = c.prune_at_end;
      tc.on_epoch = [name](const EpochRecord& r) {
        std::fprintf(stderr, "  [%s] epoch %zu loss %.4f val_error %.2f%% sparsity %.1f%%\n", name, r.epoch, r.loss,
                     r.val_error, r.group_sparsity);
      };
      (c.reg.lambda[0] > 0.0 ? out.reg : out.base) = train(e.model, e.train, e.val, e.scope, tc);
    }
    out.seconds = seconds_since(t0);
    return out;
  }();
  return runs;
}

Outcome criterion7() {
  const auto& r = lenet_runs();
  const auto& s = r.reg.after_prune.surviving;
  const bool counts = s.size() == 2 && s[0] <= 3 && s[1] <= 8;
  const double gap = r.reg.after_prune.val_error - r.base.after_prune.val_error;
  return {counts && std::abs(gap) <= 1.5 && r.seconds <= 1800.0,
          fmt("lambda 1e-5: surviving filters (%zu, %zu); test error %.2f%% vs baseline %.2f%% (gap %.2f, limit 1.5); "
              "before prune %.2f%% at %.1f%% sparsity; both runs %.0f s",
              s.size() > 0 ? s[0] : 0, s.size() > 1 ? s[1] : 0, r.reg.after_prune.val_error,
              r.base.after_prune.val_error, gap, r.reg.before_prune.val_error, r.reg.before_prune.group_sparsity,
              r.seconds)};
}

Outcome criterion8() {
  const auto& recs = lenet_runs().reg.records;
  const double groups = 22.0, target_zero = 11.0;
  std::size_t reached = 0;
  std::string traj;
  for (const auto& e : recs) {
    const double zero = std::round(e.group_sparsity * groups / 100.0);
    if (reached == 0 && zero >= target_zero) reached = e.epoch;
    traj += fmt("%s%.0f", traj.empty() ? "" : ",", zero);
  }
  const std::size_t third = (recs.size() + 2) / 3;
  bool held = reached > 0;
  for (const auto& e : recs) {
    if (reached > 0 && e.epoch > reached && std::round(e.group_sparsity * groups / 100.0) < target_zero - 1.0) {
      held = false;
    }
  }
  const bool pass = reached > 0 && reached <= third && held;
  return {pass, fmt("target 11/22 zero filters; reached at epoch %s (need <= %zu); zero filters per epoch [%s]",
                    reached ? std::to_string(reached).c_str() : "never", third, traj.c_str())};
}

Outcome criterion9() {
  const auto pts = bench_prox({1000, 10000, 100000, 1000000}, 100, 909, 0.3);
  const double slope = loglog_slope(pts);
  std::string times;
  for (const auto& p : pts) times += fmt(" n=%zu:%.2e s", p.n, p.seconds);
  return {std::abs(slope - 1.0) <= 0.15, fmt("log-log slope %.3f (1.0 +- 0.15);%s", slope, times.c_str())};
}

Outcome criterion10() {
  const RunConfig base = shipped("synthetic.json");
  std::size_t ok = 0, reactivated = 0, half_steps = 0;
  std::string detail;
  const std::uint64_t seeds = 5;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    RunConfig c = base;
    c.seed = seed;
    const Experiment e = prepare(c);
    TrainConfig tc;
    tc.epochs = c.epochs;
    tc.batch_size = c.batch_size;
    tc.alpha = c.alpha;
    tc.rho = c.rho;
    tc.seed = seed;
    const auto plain = train(e.model, e.train, e.val, e.scope, tc);

    const std::size_t budget = c.epochs * ((e.train.size() + c.batch_size - 1) / c.batch_size);
    HspgConfig h;
    h.when.kind = SwitchKind::FixedIterations;
    h.when.iterations = budget / 2;
    const auto all = concat_groups(e.groups);
    tc.on_step = [&](const StepInfo& info) {
      if (info.phase != Phase::HalfSpace) return;
      ++half_steps;
      for (std::size_t j = 0; j < all.partition.size(); ++j) {
        bool was_zero = true, is_zero = true;
        for (std::size_t i : all.partition.group(j)) {
          was_zero = was_zero && info.before[all.coords[i]] == 0.0;
          is_zero = is_zero && info.after[all.coords[i]] == 0.0;
        }
        if (was_zero && !is_zero) ++reactivated;
      }
    };
    const auto hs = hspg_train(e.model, e.train, e.val, e.scope, tc, h);
    const double sp_plain = plain.records.back().group_sparsity, sp_h = hs.records.back().group_sparsity;
    const double err_gap = hs.records.back().val_error - plain.records.back().val_error;
    if (sp_h >= sp_plain && std::abs(err_gap) <= 1.0) ++ok;
    detail += fmt(" [seed %llu: sparsity %.0f%% vs %.0f%%, error gap %+.3f]", static_cast<unsigned long long>(seed),
                  sp_h, sp_plain, err_gap);
  }
  return {ok == seeds && reactivated == 0 && half_steps > 0,
          fmt("%zu/%llu paired seeds ok, %zu half-space steps, %zu reactivations;", ok,
              static_cast<unsigned long long>(seeds), half_steps, reactivated) +
              detail};
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* root = std::getenv("WGSEF_DATA_DIR"); !root || !*root) ::setenv("WGSEF_DATA_DIR", WGSEF_DATA_ROOT, 1);
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9, criterion10};
  std::set<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    const int id = static_cast<int>(c + 1);
    if (!chosen.empty() && !chosen.count(id)) continue;
    Outcome o;
    try {
      o = criteria[c]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %2d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
