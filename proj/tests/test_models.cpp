#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "wgsef/errors.hpp"
#include "wgsef/models.hpp"
#include "wgsef/param_io.hpp"

using namespace wgsef;

namespace {

Model lenet(std::uint64_t seed = 1) { return build(ModelSpec{Architecture::LeNet5, {1, 32, 32}, 10, {}, seed}); }

Tensor random_inputs(std::mt19937_64& rng, std::vector<std::size_t> shape) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.data) v = nd(rng);
  return t;
}

void zero_group(Model& m, const LayerGroups& lg, std::size_t j) {
  for (std::size_t i : lg.partition.group(j)) m.params()[lg.coords[i]] = 0.0;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("wgsef_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("build: parameter counts and determinism") {
  const Model m = lenet();
  const auto& L = m.layers();
  REQUIRE(L.size() == 5);
  CHECK(L[0].weight_count() == 150);
  CHECK(L[1].weight_count() == 2400);
  CHECK(L[2].in == 400);
  CHECK(L[2].out == 120);
  CHECK(L[3].out == 84);
  CHECK(L[4].out == 10);
  CHECK(m.weight_count() == 150 + 2400 + 48000 + 10080 + 840);
  CHECK(m.param_count() == m.weight_count() + 6 + 16 + 120 + 84 + 10);
  CHECK(L[1].weight_offset == 156);

  const Model lin = build(ModelSpec{Architecture::Linear, {10}, 1, {}, 0});
  CHECK(lin.weight_count() == 10);
  CHECK(lin.param_count() == 11);
  CHECK(lin.loss_kind() == LossKind::Mse);

  CHECK(flatten_params(lenet(7)) == flatten_params(lenet(7)));
  CHECK(flatten_params(lenet(7)) != flatten_params(lenet(8)));

  CHECK_THROWS_AS(build(ModelSpec{Architecture::MLP, {4}, 2, {}, 0}), Error);
  CHECK_THROWS_AS(build(ModelSpec{Architecture::LeNet5, {1, 8, 8}, 10, {}, 0}), Error);
  CHECK_THROWS_AS(build(ModelSpec{Architecture::Logistic, {4}, 0, {}, 0}), Error);
}

TEST_CASE("forward shapes") {
  std::mt19937_64 rng(2);
  const Model m = lenet();
  const Tensor out = m.predict(random_inputs(rng, {3, 1, 32, 32}));
  CHECK(out.shape == std::vector<std::size_t>{3, 10});
  const Model mlp = build(ModelSpec{Architecture::MLP, {1, 4, 4}, 3, {8, 5}, 0});
  CHECK(mlp.predict(random_inputs(rng, {2, 1, 4, 4})).shape == std::vector<std::size_t>{2, 3});
}

TEST_CASE("flatten / scatter") {
  Model m = lenet(3);
  const auto flat = flatten_params(m);
  Model other = lenet(4);
  scatter_params(other, flat);
  CHECK(flatten_params(other) == flat);
  CHECK_THROWS_AS(scatter_params(other, std::vector<double>(3)), Error);
  Model empty({}, {3}, LossKind::Mse);
  CHECK(flatten_params(empty).empty());
}

TEST_CASE("groups: filter layout and scheme coverage") {
  const Model m = lenet();
  const auto pf = make_groups(m, {SchemeKind::PerFilter});
  REQUIRE(pf.size() == 2);
  CHECK(pf[0].partition.size() == 6);
  CHECK(pf[1].partition.size() == 16);
  for (std::size_t o = 0; o < 6; ++o) {
    CHECK(pf[0].partition.group(o).size() == 25);
    CHECK(pf[0].coords[pf[0].partition.group(o)[0]] == 25 * o);
    CHECK(pf[0].partition.weight(o) == doctest::Approx(1.0 / 25));
  }
  for (std::size_t o = 0; o < 16; ++o) {
    CHECK(pf[1].partition.group(o).size() == 150);
    CHECK(pf[1].coords[pf[1].partition.group(o)[0]] == 156 + 150 * o);
  }
  CHECK(concat_groups(pf).partition.size() == 22);

  const Model lin = build(ModelSpec{Architecture::Linear, {10}, 1, {}, 0});
  const auto un = make_groups(lin, {SchemeKind::Unstructured});
  REQUIRE(un.size() == 1);
  CHECK(un[0].partition.size() == 10);

  try {
    make_groups(lin, {SchemeKind::PerFilter});
    FAIL("expected SchemeNotApplicable");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SchemeNotApplicable);
  }
  CHECK_THROWS_AS(make_groups(m, {SchemeKind::PerLayerFilters, {3}}), Error);
  CHECK(make_groups(m, {SchemeKind::PerLayerFilters, {3, 8}}).size() == 2);

  // Every weight of every layer a scheme covers appears in exactly one group.
  for (auto kind : {SchemeKind::PerFilter, SchemeKind::PerChannel, SchemeKind::PerNeuron,
                    SchemeKind::Unstructured}) {
    for (bool bias : {false, true}) {
      CAPTURE(to_string(kind));
      const auto blocks = make_groups(m, {kind, {}, std::nullopt, bias});
      std::multiset<std::size_t> seen;
      for (const auto& b : blocks) {
        for (std::size_t j = 0; j < b.partition.size(); ++j) {
          for (std::size_t i : b.partition.group(j)) seen.insert(b.coords[i]);
        }
        const auto& L = m.layers()[b.layer];
        for (std::size_t i = 0; i < L.weight_count(); ++i) CHECK(seen.count(L.weight_offset + i) == 1);
        for (std::size_t o = 0; o < L.out; ++o) CHECK(seen.count(L.bias_offset + o) == (bias ? 1u : 0u));
      }
      CHECK(seen.size() == std::set<std::size_t>(seen.begin(), seen.end()).size());
    }
  }

  const auto custom = GroupPartition::contiguous(m.weight_count(), 1000);
  const auto cb = make_groups(m, {SchemeKind::Custom, {}, custom});
  REQUIRE(cb.size() == 1);
  CHECK(cb[0].coords.size() == m.weight_count());
  CHECK_THROWS_AS(make_groups(m, {SchemeKind::Custom, {}, GroupPartition::singletons(5)}), Error);
}

TEST_CASE("zeroing a filter group zeroes exactly that output map") {
  std::mt19937_64 rng(9);
  LayerDesc c;
  c.kind = LayerKind::Conv;
  c.in = 2;
  c.out = 4;
  c.kernel = 3;
  c.pad = 1;
  Model m({c}, {2, 6, 6}, LossKind::Mse);
  for (double& v : m.params()) v = std::normal_distribution<double>(0, 1)(rng);
  const auto groups = make_groups(m, {SchemeKind::PerFilter, {}, std::nullopt, true});
  const Tensor x = random_inputs(rng, {3, 2, 6, 6});
  const Tensor before = m.predict(x);
  zero_group(m, groups[0], 2);
  const Tensor after = m.predict(x);
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t ch = 0; ch < 4; ++ch) {
      for (std::size_t p = 0; p < 36; ++p) {
        const std::size_t i = (n * 4 + ch) * 36 + p;
        if (ch == 2) {
          CHECK(after.data[i] == 0.0);
        } else {
          CHECK(after.data[i] == before.data[i]);
        }
      }
    }
  }
}

TEST_CASE("flops estimate") {
  Model m = lenet();
  const auto dense = flops_estimate(m, m.params());
  for (const auto& f : dense.layers) CHECK(f.ratio() == doctest::Approx(1.0));
  CHECK(dense.ratio() == doctest::Approx(1.0));
  CHECK(dense.warnings.empty());
  // conv1: 6 filters * 25 MACs * 28*28 positions, times 2.
  CHECK(dense.layers[0].dense == doctest::Approx(2.0 * 6 * 25 * 784));
  CHECK(dense.layers[1].dense == doctest::Approx(2.0 * 16 * 150 * 100));
  CHECK(dense.layers[2].dense == doctest::Approx(2.0 * 120 * 400));

  const auto pf = make_groups(m, {SchemeKind::PerFilter});
  for (std::size_t o = 3; o < 6; ++o) zero_group(m, pf[0], o);
  for (std::size_t o = 8; o < 16; ++o) zero_group(m, pf[1], o);
  const auto half = flops_estimate(m, m.params());
  CHECK(half.layers[0].ratio() == doctest::Approx(0.5));
  CHECK(half.layers[1].ratio() == doctest::Approx(0.25));
  CHECK(half.layers[2].ratio() == doctest::Approx(0.5));
  CHECK(half.layers[3].ratio() == doctest::Approx(1.0));
  for (std::size_t l = 0; l < 5; ++l) CHECK(half.layers[l].alive <= dense.layers[l].alive);

  double prev_total = half.alive;
  std::vector<double> prev_layer;
  for (const auto& f : half.layers) prev_layer.push_back(f.alive);
  for (std::size_t o = 0; o < 8; ++o) {
    zero_group(m, pf[1], o);
    const auto r = flops_estimate(m, m.params());
    CHECK(r.alive <= prev_total);
    for (std::size_t l = 0; l < 5; ++l) {
      CHECK(r.layers[l].alive <= prev_layer[l]);
      prev_layer[l] = r.layers[l].alive;
    }
    prev_total = r.alive;
  }
  const auto none = flops_estimate(m, m.params());
  CHECK(none.layers[1].ratio() == 0.0);
  CHECK(none.layers[2].ratio() == 0.0);
  CHECK(!none.warnings.empty());
}

TEST_CASE("compact export keeps predictions") {
  std::mt19937_64 rng(4);
  Model m = lenet(5);
  for (std::size_t l = 0; l < 4; ++l) {
    auto bias = m.params().subspan(m.layers()[l].bias_offset, m.layers()[l].out);
    for (double& b : bias) b = std::uniform_real_distribution<double>(-0.2, 0.3)(rng);
  }
  const auto pf = make_groups(m, {SchemeKind::PerFilter});
  const auto pn = make_groups(m, {SchemeKind::PerNeuron});
  for (std::size_t o : {0, 2, 5}) zero_group(m, pf[0], o);
  for (std::size_t o : {1, 3, 4, 9, 10, 15}) zero_group(m, pf[1], o);
  for (std::size_t o = 0; o < 120; o += 7) zero_group(m, pn[0], o);
  for (std::size_t o = 0; o < 84; o += 5) zero_group(m, pn[1], o);

  const auto c = compact(m);
  CHECK(c.model.layers()[0].out == 3);
  CHECK(c.model.layers()[1].out == 10);
  CHECK(c.model.layers()[1].in == 3);
  CHECK(c.model.layers()[2].in == 250);
  CHECK(c.model.layers()[4].out == 10);
  CHECK(c.model.param_count() < m.param_count());
  CHECK(c.removed.size() == 4);
  CHECK(c.removed[0]["units"] == nlohmann::json({0, 2, 5}));

  const Tensor x = random_inputs(rng, {100, 1, 32, 32});
  const Tensor a = m.predict(x), b = c.model.predict(x);
  REQUIRE(a.shape == b.shape);
  for (std::size_t n = 0; n < 100; ++n) {
    const auto* pa = a.data.data() + n * 10;
    const auto* pb = b.data.data() + n * 10;
    CHECK(std::max_element(pa, pa + 10) - pa == std::max_element(pb, pb + 10) - pb);
    for (std::size_t k = 0; k < 10; ++k) CHECK(std::abs(pa[k] - pb[k]) <= 1e-10 * (1 + std::abs(pa[k])));
  }
}

TEST_CASE("full LeNet gradient matches central differences") {
  std::mt19937_64 rng(21);
  Model m = lenet(11);
  for (std::size_t l = 0; l < 5; ++l) {
    auto bias = m.params().subspan(m.layers()[l].bias_offset, m.layers()[l].out);
    for (double& b : bias) b = std::uniform_real_distribution<double>(-0.1, 0.1)(rng);
  }
  Batch batch;
  batch.inputs = random_inputs(rng, {1, 1, 32, 32});
  batch.labels = {7};
  std::vector<double> grad(m.param_count());
  m.loss_and_grad(batch, grad);

  std::size_t failed = 0;
  double worst = 0.0;
  const double h = 1e-5;
  for (int trial = 0; trial < 50; ++trial) {
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
    if (err > 1e-4) ++failed;
  }
  CAPTURE(worst);
  CHECK(failed == 0);
}

TEST_CASE("parameter files") {
  const auto dir = temp_dir("params");
  const Model m = lenet(2);
  save_model(dir / "model.bin", m, {{"note", "x"}});
  const Model back = load_model(dir / "model.bin");
  CHECK(flatten_params(back) == flatten_params(m));
  CHECK(back.to_json() == m.to_json());

  std::ifstream in(dir / "model.bin", std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  CHECK(std::string(magic, 4) == "WGSF");
  CHECK(std::filesystem::file_size(dir / "model.bin") == 16 + 8 * m.param_count());

  {
    std::ofstream bad(dir / "bad.bin", std::ios::binary);
    bad << "nonsense-but-long-enough";
  }
  std::filesystem::copy_file(dir / "model.json", dir / "bad.json");
  try {
    load_model(dir / "bad.bin");
    FAIL("expected BadModelFile");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BadModelFile);
  }
  write_params(dir / "short.bin", std::vector<double>{1, 2, 3});
  std::filesystem::copy_file(dir / "model.json", dir / "short.json");
  CHECK_THROWS_AS(load_model(dir / "short.bin"), Error);
  CHECK(read_params(dir / "short.bin") == std::vector<double>{1, 2, 3});
}

TEST_CASE("error percent") {
  Model lin({LayerDesc{LayerKind::Dense, 2, 1}}, {2}, LossKind::Mse);
  lin.params()[0] = 1.0;  // y = x0
  Dataset d;
  d.inputs = Tensor({2, 2}, {1, 0, 2, 5});
  d.targets = Tensor({2, 1}, {1, 4});
  // residuals (0, -2): 100 * 4 / 17
  CHECK(error_percent(lin, d) == doctest::Approx(400.0 / 17.0));
}
