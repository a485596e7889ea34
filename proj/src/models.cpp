#include "wgsef/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "wgsef/errors.hpp"

namespace wgsef {

namespace {

std::size_t conv_size(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

double row_norm(std::span<const double> theta, std::size_t begin, std::size_t count) {
  double s = 0.0;
  for (std::size_t i = begin; i < begin + count; ++i) s += theta[i] * theta[i];
  return std::sqrt(s);
}

const char* loss_name(LossKind k) { return k == LossKind::Mse ? "mse" : "cross_entropy"; }

}  // namespace

Model::Model(std::vector<LayerDesc> layers, std::vector<std::size_t> input_shape, LossKind loss)
    : layers_(std::move(layers)), input_shape_(std::move(input_shape)), loss_(loss) {
  if (input_shape_.empty() || shape_size(input_shape_) == 0) {
    throw Error(Errc::InvalidSpec, "input shape must be nonempty");
  }
  // Current activation: channels x h x w, or features when flat.
  bool spatial = input_shape_.size() == 3;
  std::size_t ch = spatial ? input_shape_[0] : shape_size(input_shape_);
  std::size_t h = spatial ? input_shape_[1] : 1, w = spatial ? input_shape_[2] : 1;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    LayerDesc& L = layers_[l];
    const std::string where = "layer " + std::to_string(l) + ": ";
    if (L.out == 0 || L.in == 0) throw Error(Errc::InvalidSpec, where + "empty layer");
    if (L.kind == LayerKind::Conv) {
      if (!spatial) throw Error(Errc::InvalidSpec, where + "conv layer needs [C,H,W] input");
      if (L.in != ch) throw Error(Errc::InvalidSpec, where + "expects " + std::to_string(L.in) +
                                                         " channels, gets " + std::to_string(ch));
      if (L.kernel == 0 || L.stride == 0 || h + 2 * L.pad < L.kernel || w + 2 * L.pad < L.kernel) {
        throw Error(Errc::InvalidSpec, where + "kernel does not fit");
      }
      L.in_h = h;
      L.in_w = w;
      h = conv_size(h, L.kernel, L.stride, L.pad);
      w = conv_size(w, L.kernel, L.stride, L.pad);
      if (L.pool) {
        if (h < L.pool || w < L.pool) throw Error(Errc::InvalidSpec, where + "pool window too large");
        h = (h - L.pool) / L.pool + 1;
        w = (w - L.pool) / L.pool + 1;
      }
      ch = L.out;
    } else {
      const std::size_t features = ch * h * w;
      if (L.in != features) {
        throw Error(Errc::InvalidSpec, where + "expects " + std::to_string(L.in) +
                                           " inputs, gets " + std::to_string(features));
      }
      L.kernel = 1;
      L.stride = 1;
      L.pad = 0;
      L.pool = 0;
      L.in_h = L.in_w = 1;
      spatial = false;
      ch = L.out;
      h = w = 1;
    }
    L.out_h = h;
    L.out_w = w;
    L.weight_offset = offset;
    offset += L.weight_count();
    L.bias_offset = offset;
    offset += L.out;
  }
  params_.assign(offset, 0.0);
}

std::size_t Model::weight_count() const noexcept {
  std::size_t s = 0;
  for (const auto& L : layers_) s += L.weight_count();
  return s;
}

std::size_t Model::outputs() const {
  if (layers_.empty()) return shape_size(input_shape_);
  return layers_.back().out * layers_.back().out_h * layers_.back().out_w;
}

Var Model::forward(Tape& tape, Var x, std::vector<Var>* param_leaves) const {
  const bool want = param_leaves != nullptr;
  for (const auto& L : layers_) {
    const auto first = params_.begin();
    std::vector<std::size_t> wshape = L.kind == LayerKind::Conv
                                          ? std::vector<std::size_t>{L.out, L.in, L.kernel, L.kernel}
                                          : std::vector<std::size_t>{L.out, L.in};
    Var W = tape.leaf(Tensor(std::move(wshape),
                             std::vector<double>(first + static_cast<std::ptrdiff_t>(L.weight_offset),
                                                 first + static_cast<std::ptrdiff_t>(L.bias_offset))),
                      want);
    Var b = tape.leaf(Tensor({L.out}, std::vector<double>(first + static_cast<std::ptrdiff_t>(L.bias_offset),
                                                          first + static_cast<std::ptrdiff_t>(L.bias_offset + L.out))),
                      want);
    if (want) {
      param_leaves->push_back(W);
      param_leaves->push_back(b);
    }
    if (L.kind == LayerKind::Conv) {
      x = add_bias(tape, conv2d(tape, x, W, L.stride, L.pad), b);
    } else {
      if (tape.value(x).rank() != 2) x = flatten(tape, x);
      x = add_bias(tape, matmul(tape, x, W, true), b);
    }
    if (L.relu) x = relu(tape, x);
    if (L.pool) x = max_pool2d(tape, x, L.pool, L.pool);
  }
  return x;
}

Tensor Model::predict(const Tensor& inputs) const {
  Tape tape;
  Tensor x = inputs;
  if (x.rank() == 1) x.shape = {1, x.size()};
  return tape.value(forward(tape, tape.leaf(std::move(x))));
}

namespace {

Var batch_loss(Tape& tape, LossKind kind, Var out, const Batch& batch) {
  if (kind == LossKind::CrossEntropy) return softmax_cross_entropy(tape, out, batch.labels);
  return mse(tape, out, batch.targets);
}

}  // namespace

double Model::loss_and_grad(const Batch& batch, std::span<double> grad) const {
  if (grad.size() != params_.size()) {
    throw Error(Errc::DimensionMismatch, "gradient buffer has " + std::to_string(grad.size()) +
                                             " entries, model has " + std::to_string(params_.size()));
  }
  Tape tape;
  std::vector<Var> leaves;
  const Var out = forward(tape, tape.leaf(batch.inputs), &leaves);
  const Var loss = batch_loss(tape, loss_, out, batch);
  tape.backward(loss);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& gw = tape.grad(leaves[2 * l]).data;
    const auto& gb = tape.grad(leaves[2 * l + 1]).data;
    std::copy(gw.begin(), gw.end(), grad.begin() + static_cast<std::ptrdiff_t>(layers_[l].weight_offset));
    std::copy(gb.begin(), gb.end(), grad.begin() + static_cast<std::ptrdiff_t>(layers_[l].bias_offset));
  }
  return tape.value(loss).data[0];
}

double Model::loss(const Batch& batch) const {
  Tape tape;
  const Var out = forward(tape, tape.leaf(batch.inputs));
  return tape.value(batch_loss(tape, loss_, out, batch)).data[0];
}

nlohmann::json Model::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& L : layers_) {
    nlohmann::json j{{"kind", L.kind == LayerKind::Conv ? "conv" : "dense"},
                     {"in", L.in},
                     {"out", L.out},
                     {"relu", L.relu}};
    if (L.kind == LayerKind::Conv) {
      j["kernel"] = L.kernel;
      j["stride"] = L.stride;
      j["pad"] = L.pad;
      j["pool"] = L.pool;
    }
    layers.push_back(std::move(j));
  }
  return {{"input_shape", input_shape_}, {"loss", loss_name(loss_)}, {"layers", std::move(layers)}};
}

Model Model::from_json(const nlohmann::json& doc) {
  try {
    std::vector<LayerDesc> layers;
    for (const auto& j : doc.at("layers")) {
      LayerDesc L;
      const auto kind = j.at("kind").get<std::string>();
      if (kind != "conv" && kind != "dense") throw Error(Errc::InvalidSpec, "unknown layer kind " + kind);
      L.kind = kind == "conv" ? LayerKind::Conv : LayerKind::Dense;
      L.in = j.at("in").get<std::size_t>();
      L.out = j.at("out").get<std::size_t>();
      L.relu = j.at("relu").get<bool>();
      if (L.kind == LayerKind::Conv) {
        L.kernel = j.at("kernel").get<std::size_t>();
        L.stride = j.at("stride").get<std::size_t>();
        L.pad = j.at("pad").get<std::size_t>();
        L.pool = j.at("pool").get<std::size_t>();
      }
      layers.push_back(L);
    }
    const auto loss = doc.at("loss").get<std::string>();
    if (loss != "mse" && loss != "cross_entropy") throw Error(Errc::InvalidSpec, "unknown loss " + loss);
    return Model(std::move(layers), doc.at("input_shape").get<std::vector<std::size_t>>(),
                 loss == "mse" ? LossKind::Mse : LossKind::CrossEntropy);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidSpec, std::string("model description: ") + e.what());
  }
}

Model build(const ModelSpec& spec) {
  if (spec.outputs == 0) throw Error(Errc::InvalidSpec, "outputs must be positive");
  if (spec.input_shape.empty() || shape_size(spec.input_shape) == 0) {
    throw Error(Errc::InvalidSpec, "input shape must be nonempty");
  }
  const std::size_t features = shape_size(spec.input_shape);
  std::vector<LayerDesc> layers;
  LossKind loss = LossKind::CrossEntropy;
  auto dense = [](std::size_t in, std::size_t out, bool relu) {
    LayerDesc L;
    L.kind = LayerKind::Dense;
    L.in = in;
    L.out = out;
    L.relu = relu;
    return L;
  };
  switch (spec.arch) {
    case Architecture::Linear:
      loss = LossKind::Mse;
      layers.push_back(dense(features, spec.outputs, false));
      break;
    case Architecture::Logistic:
      if (spec.outputs < 2) throw Error(Errc::InvalidSpec, "logistic model needs >= 2 classes");
      layers.push_back(dense(features, spec.outputs, false));
      break;
    case Architecture::MLP: {
      if (spec.hidden.empty()) throw Error(Errc::InvalidSpec, "MLP needs at least one hidden layer");
      std::size_t in = features;
      for (std::size_t hsz : spec.hidden) {
        if (hsz == 0) throw Error(Errc::InvalidSpec, "hidden layer of size 0");
        layers.push_back(dense(in, hsz, true));
        in = hsz;
      }
      layers.push_back(dense(in, spec.outputs, false));
      break;
    }
    case Architecture::LeNet5: {
      if (spec.input_shape.size() != 3) throw Error(Errc::InvalidSpec, "LeNet5 needs [C,H,W] input");
      const std::size_t C = spec.input_shape[0], H = spec.input_shape[1], W = spec.input_shape[2];
      if (H < 16 || W < 16) throw Error(Errc::InvalidSpec, "LeNet5 input must be at least 16x16");
      LayerDesc c1;
      c1.kind = LayerKind::Conv;
      c1.in = C;
      c1.out = 6;
      c1.kernel = 5;
      c1.relu = true;
      c1.pool = 2;
      LayerDesc c2 = c1;
      c2.in = 6;
      c2.out = 16;
      const std::size_t h = ((H - 4) / 2 - 4) / 2, w = ((W - 4) / 2 - 4) / 2;
      layers = {c1, c2, dense(16 * h * w, 120, true), dense(120, 84, true),
                dense(84, spec.outputs, false)};
      break;
    }
  }
  Model model(std::move(layers), spec.input_shape, loss);

  std::mt19937_64 rng(spec.seed);
  auto theta = model.params();
  for (const auto& L : model.layers()) {
    const double fan = static_cast<double>(L.fan_in());
    if (L.relu) {
      std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / fan));
      for (std::size_t i = 0; i < L.weight_count(); ++i) theta[L.weight_offset + i] = nd(rng);
    } else {
      std::uniform_real_distribution<double> ud(-1.0 / std::sqrt(fan), 1.0 / std::sqrt(fan));
      for (std::size_t i = 0; i < L.weight_count(); ++i) theta[L.weight_offset + i] = ud(rng);
    }
  }
  return model;
}

std::vector<double> flatten_params(const Model& model) {
  return {model.params().begin(), model.params().end()};
}

void scatter_params(Model& model, std::span<const double> flat) {
  if (flat.size() != model.param_count()) {
    throw Error(Errc::DimensionMismatch, "flat vector has " + std::to_string(flat.size()) +
                                             " entries, model has " + std::to_string(model.param_count()));
  }
  std::copy(flat.begin(), flat.end(), model.params().begin());
}

std::vector<LayerGroups> make_groups(const Model& model, const GroupingScheme& scheme) {
  const auto& layers = model.layers();
  std::vector<LayerGroups> out;

  auto finish = [&](std::size_t l, std::vector<std::vector<std::size_t>> groups) {
    LayerGroups lg;
    lg.layer = l;
    std::vector<std::vector<std::size_t>> local;
    for (auto& g : groups) {
      std::vector<std::size_t> idx;
      for (std::size_t c : g) {
        idx.push_back(lg.coords.size());
        lg.coords.push_back(c);
      }
      local.push_back(std::move(idx));
    }
    lg.partition = GroupPartition::make(lg.coords.size(), std::move(local));
    out.push_back(std::move(lg));
  };
  auto bias_singletons = [&](const LayerDesc& L, std::vector<std::vector<std::size_t>>& groups) {
    if (!scheme.include_bias) return;
    for (std::size_t o = 0; o < L.out; ++o) groups.push_back({L.bias_offset + o});
  };

  switch (scheme.kind) {
    case SchemeKind::PerFilter:
    case SchemeKind::PerLayerFilters:
    case SchemeKind::PerNeuron: {
      const LayerKind want = scheme.kind == SchemeKind::PerNeuron ? LayerKind::Dense : LayerKind::Conv;
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        if (L.kind != want) continue;
        std::vector<std::vector<std::size_t>> groups(L.out);
        for (std::size_t o = 0; o < L.out; ++o) {
          for (std::size_t i = 0; i < L.fan_in(); ++i) groups[o].push_back(L.weight_offset + o * L.fan_in() + i);
          if (scheme.include_bias) groups[o].push_back(L.bias_offset + o);
        }
        finish(l, std::move(groups));
      }
      if (out.empty()) {
        throw Error(Errc::SchemeNotApplicable, to_string(scheme.kind) + " needs " +
                                                   (want == LayerKind::Conv ? "conv" : "dense") + " layers");
      }
      if (scheme.kind == SchemeKind::PerLayerFilters && scheme.layer_k.size() != out.size()) {
        throw Error(Errc::InvalidSpec, "PerLayerFilters lists " + std::to_string(scheme.layer_k.size()) +
                                           " k values for " + std::to_string(out.size()) + " conv layers");
      }
      break;
    }
    case SchemeKind::PerChannel:
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        const std::size_t kk = L.kernel * L.kernel;
        std::vector<std::vector<std::size_t>> groups(L.in);
        for (std::size_t c = 0; c < L.in; ++c) {
          for (std::size_t o = 0; o < L.out; ++o) {
            for (std::size_t r = 0; r < kk; ++r) groups[c].push_back(L.weight_offset + o * L.fan_in() + c * kk + r);
          }
        }
        bias_singletons(L, groups);
        finish(l, std::move(groups));
      }
      break;
    case SchemeKind::Unstructured:
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        std::vector<std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < L.weight_count(); ++i) groups.push_back({L.weight_offset + i});
        bias_singletons(L, groups);
        finish(l, std::move(groups));
      }
      break;
    case SchemeKind::Custom: {
      if (!scheme.custom) throw Error(Errc::InvalidSpec, "Custom scheme without a partition");
      LayerGroups lg;
      for (const auto& L : layers) {
        for (std::size_t i = 0; i < L.weight_count(); ++i) lg.coords.push_back(L.weight_offset + i);
        if (scheme.include_bias) {
          for (std::size_t o = 0; o < L.out; ++o) lg.coords.push_back(L.bias_offset + o);
        }
      }
      if (scheme.custom->dim() != lg.coords.size()) {
        throw Error(Errc::InvalidSpec, "custom partition covers " + std::to_string(scheme.custom->dim()) +
                                           " coordinates, model exposes " + std::to_string(lg.coords.size()));
      }
      lg.partition = *scheme.custom;
      out.push_back(std::move(lg));
      break;
    }
  }
  if (out.empty()) throw Error(Errc::SchemeNotApplicable, "model has no layers to group");
  return out;
}

LayerGroups concat_groups(const std::vector<LayerGroups>& blocks) {
  LayerGroups all;
  std::vector<std::vector<std::size_t>> groups;
  std::vector<double> weights;
  for (const auto& b : blocks) {
    const std::size_t base = all.coords.size();
    all.coords.insert(all.coords.end(), b.coords.begin(), b.coords.end());
    for (std::size_t j = 0; j < b.partition.size(); ++j) {
      std::vector<std::size_t> g;
      for (std::size_t i : b.partition.group(j)) g.push_back(base + i);
      groups.push_back(std::move(g));
      weights.push_back(b.partition.weight(j));
    }
  }
  all.partition = GroupPartition::make(all.coords.size(), std::move(groups), std::move(weights));
  return all;
}

FlopsReport flops_estimate(const Model& model, std::span<const double> theta, double tol) {
  if (theta.size() != model.param_count()) {
    throw Error(Errc::DimensionMismatch, "theta does not match the model");
  }
  FlopsReport rep;
  std::size_t prev_alive = 0;
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const auto& L = model.layers()[l];
    std::size_t alive_out = 0;
    for (std::size_t o = 0; o < L.out; ++o) {
      if (row_norm(theta, L.weight_offset + o * L.fan_in(), L.fan_in()) > tol) ++alive_out;
    }
    // Inputs that still carry signal, measured in the units of this layer's fan-in.
    double in_frac = 1.0;
    if (l > 0) {
      const auto& P = model.layers()[l - 1];
      in_frac = static_cast<double>(prev_alive) / static_cast<double>(P.out);
    }
    LayerFlops f;
    f.layer = l;
    f.outputs_total = L.out;
    f.outputs_alive = alive_out;
    double positions = 1.0;
    if (L.kind == LayerKind::Conv) {
      positions = static_cast<double>(conv_size(L.in_h, L.kernel, L.stride, L.pad) *
                                      conv_size(L.in_w, L.kernel, L.stride, L.pad));
    }
    f.dense = 2.0 * static_cast<double>(L.out) * static_cast<double>(L.fan_in()) * positions;
    f.alive = 2.0 * static_cast<double>(alive_out) * static_cast<double>(L.fan_in()) * in_frac * positions;
    if (alive_out == 0) {
      rep.warnings.push_back("layer " + std::to_string(l) +
                             ": every output unit is zero; later layers see a constant input");
    }
    rep.dense += f.dense;
    rep.alive += f.alive;
    rep.layers.push_back(f);
    prev_alive = alive_out;
  }
  return rep;
}

CompactModel compact(const Model& model, double tol) {
  auto layers = model.layers();
  const auto theta = model.params();
  const std::size_t nl = layers.size();

  // rows[l][o] = weights of output unit o; cols are grouped per input unit in blocks.
  std::vector<std::vector<std::vector<double>>> rows(nl);
  std::vector<std::vector<double>> bias(nl);
  std::vector<std::size_t> block(nl, 1);
  for (std::size_t l = 0; l < nl; ++l) {
    const auto& L = layers[l];
    for (std::size_t o = 0; o < L.out; ++o) {
      const auto begin = theta.begin() + static_cast<std::ptrdiff_t>(L.weight_offset + o * L.fan_in());
      rows[l].emplace_back(begin, begin + static_cast<std::ptrdiff_t>(L.fan_in()));
    }
    bias[l].assign(theta.begin() + static_cast<std::ptrdiff_t>(L.bias_offset),
                   theta.begin() + static_cast<std::ptrdiff_t>(L.bias_offset + L.out));
    if (L.kind == LayerKind::Conv) {
      block[l] = L.kernel * L.kernel;
    } else if (l > 0) {
      block[l] = L.in / layers[l - 1].out;
    }
  }

  CompactModel result;
  result.removed = nlohmann::json::array();
  for (std::size_t l = 0; l + 1 < nl; ++l) {
    auto& next = layers[l + 1];
    if (next.kind == LayerKind::Conv && next.pad > 0) continue;
    std::vector<std::size_t> dead;
    for (std::size_t o = 0; o < rows[l].size(); ++o) {
      double s = 0.0;
      for (double v : rows[l][o]) s += v * v;
      if (std::sqrt(s) <= tol) dead.push_back(o);
    }
    if (dead.size() == rows[l].size()) dead.erase(dead.begin());  // keep the layer nonempty
    if (dead.empty()) continue;

    const std::size_t bk = block[l + 1];
    for (std::size_t o : dead) {
      const double c = layers[l].relu ? std::max(bias[l][o], 0.0) : bias[l][o];
      if (c == 0.0) continue;
      for (std::size_t f = 0; f < rows[l + 1].size(); ++f) {
        double s = 0.0;
        for (std::size_t r = 0; r < bk; ++r) s += rows[l + 1][f][o * bk + r];
        bias[l + 1][f] += c * s;
      }
    }
    std::vector<bool> is_dead(rows[l].size(), false);
    for (std::size_t o : dead) is_dead[o] = true;
    std::vector<std::vector<double>> kept_rows;
    std::vector<double> kept_bias;
    for (std::size_t o = 0; o < rows[l].size(); ++o) {
      if (is_dead[o]) continue;
      kept_rows.push_back(std::move(rows[l][o]));
      kept_bias.push_back(bias[l][o]);
    }
    for (auto& r : rows[l + 1]) {
      std::vector<double> kept;
      for (std::size_t o = 0; o < is_dead.size(); ++o) {
        if (!is_dead[o]) kept.insert(kept.end(), r.begin() + static_cast<std::ptrdiff_t>(o * bk),
                                     r.begin() + static_cast<std::ptrdiff_t>((o + 1) * bk));
      }
      r = std::move(kept);
    }
    rows[l] = std::move(kept_rows);
    bias[l] = std::move(kept_bias);
    layers[l].out = rows[l].size();
    next.in = next.kind == LayerKind::Conv ? layers[l].out : layers[l].out * bk;
    result.removed.push_back({{"layer", l}, {"units", dead}});
  }

  Model out(layers, model.input_shape(), model.loss_kind());
  auto p = out.params();
  for (std::size_t l = 0; l < nl; ++l) {
    const auto& L = out.layers()[l];
    for (std::size_t o = 0; o < L.out; ++o) {
      std::copy(rows[l][o].begin(), rows[l][o].end(),
                p.begin() + static_cast<std::ptrdiff_t>(L.weight_offset + o * L.fan_in()));
    }
    std::copy(bias[l].begin(), bias[l].end(), p.begin() + static_cast<std::ptrdiff_t>(L.bias_offset));
  }
  result.model = std::move(out);
  return result;
}

double error_percent(const Model& model, const Dataset& data, std::size_t chunk) {
  const std::size_t N = data.size();
  if (N == 0) throw Error(Errc::DataEmpty, "cannot evaluate on an empty dataset");
  std::size_t wrong = 0;
  double num = 0.0, den = 0.0;
  for (std::size_t start = 0; start < N; start += chunk) {
    std::vector<std::size_t> rows;
    for (std::size_t i = start; i < std::min(N, start + chunk); ++i) rows.push_back(i);
    const Batch b = make_batch(data, rows);
    const Tensor out = model.predict(b.inputs);
    const std::size_t K = out.dim(1);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const double* o = out.data.data() + r * K;
      if (data.regression()) {
        for (std::size_t c = 0; c < K; ++c) {
          const double y = b.targets.data[r * K + c];
          num += (o[c] - y) * (o[c] - y);
          den += y * y;
        }
      } else {
        const auto pred = static_cast<int>(std::max_element(o, o + K) - o);
        if (pred != b.labels[r]) ++wrong;
      }
    }
  }
  if (data.regression()) return den > 0 ? 100.0 * num / den : 100.0 * num;
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(N);
}

std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::Linear: return "linear";
    case Architecture::Logistic: return "logistic";
    case Architecture::MLP: return "mlp";
    case Architecture::LeNet5: return "lenet5";
  }
  return "?";
}

Architecture architecture_from_string(const std::string& s) {
  for (auto a : {Architecture::Linear, Architecture::Logistic, Architecture::MLP, Architecture::LeNet5}) {
    if (to_string(a) == s) return a;
  }
  throw Error(Errc::InvalidSpec, "unknown architecture '" + s + "'");
}

std::string to_string(SchemeKind s) {
  switch (s) {
    case SchemeKind::PerFilter: return "per_filter";
    case SchemeKind::PerChannel: return "per_channel";
    case SchemeKind::PerNeuron: return "per_neuron";
    case SchemeKind::Unstructured: return "unstructured";
    case SchemeKind::PerLayerFilters: return "per_layer_filters";
    case SchemeKind::Custom: return "custom";
  }
  return "?";
}

SchemeKind scheme_from_string(const std::string& s) {
  for (auto k : {SchemeKind::PerFilter, SchemeKind::PerChannel, SchemeKind::PerNeuron,
                 SchemeKind::Unstructured, SchemeKind::PerLayerFilters, SchemeKind::Custom}) {
    if (to_string(k) == s) return k;
  }
  throw Error(Errc::InvalidSpec, "unknown grouping scheme '" + s + "'");
}

}  // namespace wgsef
