#include "wgsef/run.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>

#include "wgsef/errors.hpp"
#include "wgsef/param_io.hpp"

namespace wgsef {

namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::ConfigInvalid, what); }

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) invalid(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) invalid("unknown key \"" + key + "\" in " + where);
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    invalid(where + "." + key + " has the wrong type");
  }
}

// Numbers that must be nonnegative integers; json's get<size_t> silently wraps negatives.
void read_count(const json& obj, const char* key, std::size_t& out, const std::string& where) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) invalid(where + "." + key + " must be a nonnegative integer");
  out = v.get<std::size_t>();
}

template <class T>
std::vector<T> scalar_or_list(const json& v, const std::string& where) {
  try {
    if (v.is_array()) return v.get<std::vector<T>>();
    return {v.get<T>()};
  } catch (const json::exception&) {
    invalid(where + " has the wrong type");
  }
}

template <class Enum, class From>
Enum parse_enum(const json& obj, const char* key, Enum fallback, const std::string& where, From from) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_string()) invalid(where + "." + key + " must be a string");
  try {
    return from(obj.at(key).get<std::string>());
  } catch (const Error& e) {
    invalid(where + "." + key + ": " + e.what());
  }
}

DataKind data_kind(const std::string& s) {
  if (s == "idx") return DataKind::Idx;
  if (s == "csv") return DataKind::Csv;
  if (s == "synthetic") return DataKind::Synthetic;
  invalid("unknown data kind \"" + s + "\"");
}

ScheduleKind schedule_kind(const std::string& s) {
  if (s == "constant") return ScheduleKind::Constant;
  if (s == "cosine") return ScheduleKind::Cosine;
  if (s == "step_decay") return ScheduleKind::StepDecay;
  invalid("unknown schedule \"" + s + "\"");
}

const char* to_string(DataKind k) {
  switch (k) {
    case DataKind::Idx: return "idx";
    case DataKind::Csv: return "csv";
    case DataKind::Synthetic: return "synthetic";
  }
  return "";
}

const char* to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Constant: return "constant";
    case ScheduleKind::Cosine: return "cosine";
    case ScheduleKind::StepDecay: return "step_decay";
  }
  return "";
}

Dataset head(const Dataset& d, std::size_t limit) {
  if (limit == 0 || limit >= d.size()) return d;
  std::vector<std::size_t> rows(limit);
  for (std::size_t i = 0; i < limit; ++i) rows[i] = i;
  return d.subset(rows);
}

json snapshot_json(const Snapshot& s, const RegScope& scope) {
  json groups = json::array();
  for (const auto& b : scope.blocks) groups.push_back(b.partition.size());
  return {{"val_error", s.val_error},
          {"group_sparsity", s.group_sparsity},
          {"flops_ratio", s.flops_ratio},
          {"surviving", s.surviving},
          {"groups", groups}};
}

json flops_json(const FlopsReport& f) {
  json layers = json::array();
  for (const auto& l : f.layers) {
    layers.push_back({{"layer", l.layer},
                      {"dense", l.dense},
                      {"alive", l.alive},
                      {"ratio", l.ratio()},
                      {"outputs_alive", l.outputs_alive},
                      {"outputs_total", l.outputs_total}});
  }
  return {{"dense", f.dense}, {"alive", f.alive}, {"ratio", f.ratio()}, {"layers", layers}};
}

// Files written by a run, removed again if the run fails.
class OutputGuard {
 public:
  explicit OutputGuard(std::filesystem::path dir) : dir_(std::move(dir)) {
    created_dir_ = !std::filesystem::exists(dir_);
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(Errc::Io, "cannot create " + dir_.string() + ": " + ec.message());
  }
  std::filesystem::path add(const std::string& name) {
    files_.push_back(dir_ / name);
    return files_.back();
  }
  [[nodiscard]] std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& f : files_) out.push_back(f.filename().string());
    return out;
  }
  void commit() { committed_ = true; }
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& f : files_) std::filesystem::remove(f, ec);
    if (created_dir_ && std::filesystem::is_empty(dir_, ec)) std::filesystem::remove(dir_, ec);
  }
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> files_;
  bool created_dir_ = false;
  bool committed_ = false;
};

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw Error(Errc::Io, "short write to " + path.string());
}

}  // namespace

RunConfig RunConfig::from_json(const json& doc) {
  RunConfig c;
  check_keys(doc, "config",
             {"model", "data", "grouping", "regularization", "optimizer", "schedule", "epochs", "batch_size", "seed",
              "prune_at_end", "weighted_prune", "checkpoint_every", "output_dir"});

  c.model.input_shape.clear();
  if (doc.contains("model")) {
    const auto& m = doc["model"];
    check_keys(m, "model", {"arch", "input_shape", "outputs", "hidden"});
    c.model.arch = parse_enum(m, "arch", c.model.arch, "model", architecture_from_string);
    read(m, "input_shape", c.model.input_shape, "model");
    read_count(m, "outputs", c.model.outputs, "model");
    read(m, "hidden", c.model.hidden, "model");
  }

  if (!doc.contains("data")) invalid("config needs a \"data\" section");
  {
    const auto& d = doc["data"];
    check_keys(d, "data",
               {"kind", "train_images", "train_labels", "test_images", "test_labels", "train", "test", "classes",
                "pad_to", "normalize", "max_train", "max_val", "val_fraction", "n", "m", "support", "noise",
                "samples", "seed"});
    c.data.kind = parse_enum(d, "kind", DataKind::Idx, "data", data_kind);
    c.data.normalize = c.data.kind != DataKind::Synthetic;
    read(d, "train_images", c.data.train_images, "data");
    read(d, "train_labels", c.data.train_labels, "data");
    read(d, "test_images", c.data.test_images, "data");
    read(d, "test_labels", c.data.test_labels, "data");
    read(d, "train", c.data.train, "data");
    read(d, "test", c.data.test, "data");
    read_count(d, "classes", c.data.classes, "data");
    read_count(d, "pad_to", c.data.pad_to, "data");
    read(d, "normalize", c.data.normalize, "data");
    read_count(d, "max_train", c.data.max_train, "data");
    read_count(d, "max_val", c.data.max_val, "data");
    read(d, "val_fraction", c.data.val_fraction, "data");
    read_count(d, "n", c.data.synthetic.n, "data");
    read_count(d, "m", c.data.synthetic.m, "data");
    read_count(d, "support", c.data.synthetic.support, "data");
    read(d, "noise", c.data.synthetic.noise, "data");
    read_count(d, "samples", c.data.synthetic.samples, "data");
    if (d.contains("seed")) {
      read(d, "seed", c.data.synthetic.seed, "data");
      c.data.synthetic_seed_given = true;
    }
    if (!(c.data.val_fraction > 0.0 && c.data.val_fraction < 1.0)) invalid("data.val_fraction must lie in (0, 1)");
    if (c.data.kind == DataKind::Idx && (c.data.train_images.empty() || c.data.train_labels.empty())) {
      invalid("idx data needs train_images and train_labels");
    }
    if (c.data.kind == DataKind::Idx && (c.data.test_images.empty() != c.data.test_labels.empty())) {
      invalid("idx data needs both test_images and test_labels, or neither");
    }
    if (c.data.kind == DataKind::Csv && c.data.train.empty()) invalid("csv data needs a train file");
    if (c.data.kind == DataKind::Synthetic) {
      try {
        c.data.synthetic.validate();
      } catch (const Error& e) {
        invalid(e.what());
      }
      c.model.arch = doc.contains("model") && doc["model"].contains("arch") ? c.model.arch : Architecture::Linear;
    }
  }

  if (doc.contains("grouping")) {
    const auto& g = doc["grouping"];
    check_keys(g, "grouping", {"scheme", "include_bias", "group_size"});
    c.grouping.scheme = parse_enum(g, "scheme", c.grouping.scheme, "grouping", scheme_from_string);
    read(g, "include_bias", c.grouping.include_bias, "grouping");
    read_count(g, "group_size", c.grouping.group_size, "grouping");
  } else if (c.data.kind == DataKind::Synthetic) {
    c.grouping.scheme = SchemeKind::Custom;
  }
  if (c.grouping.scheme == SchemeKind::Custom && c.grouping.group_size == 0) {
    if (c.data.kind != DataKind::Synthetic) invalid("custom grouping needs grouping.group_size");
    c.grouping.group_size = c.data.synthetic.n / c.data.synthetic.m;
  }

  if (!doc.contains("regularization")) invalid("config needs a \"regularization\" section");
  {
    const auto& r = doc["regularization"];
    check_keys(r, "regularization", {"scope", "lambda", "k"});
    if (r.contains("scope")) {
      const auto s = r["scope"].is_string() ? r["scope"].get<std::string>() : "";
      if (s == "per_layer") {
        c.reg.scope = ScopeKind::PerLayer;
      } else if (s == "global") {
        c.reg.scope = ScopeKind::Global;
      } else {
        invalid("regularization.scope must be \"per_layer\" or \"global\"");
      }
    }
    if (!r.contains("lambda") || !r.contains("k")) invalid("regularization needs lambda and k");
    c.reg.lambda = scalar_or_list<double>(r["lambda"], "regularization.lambda");
    for (const auto& v : scalar_or_list<long long>(r["k"], "regularization.k")) {
      if (v < 1) invalid("regularization.k entries must be at least 1");
      c.reg.k.push_back(static_cast<std::size_t>(v));
    }
    for (double l : c.reg.lambda) {
      if (!(l >= 0.0) || !std::isfinite(l)) invalid("regularization.lambda entries must be finite and nonnegative");
    }
    if (c.reg.lambda.empty() || c.reg.k.empty()) invalid("regularization lambda and k must be nonempty");
    if (c.reg.scope == ScopeKind::Global && (c.reg.lambda.size() != 1 || c.reg.k.size() != 1)) {
      invalid("global regularization takes a single lambda and k");
    }
  }

  if (doc.contains("optimizer")) {
    const auto& o = doc["optimizer"];
    check_keys(o, "optimizer", {"kind", "switch", "epsilon"});
    std::string kind = "prox_sgd";
    read(o, "kind", kind, "optimizer");
    if (kind == "prox_sgd") {
      c.optimizer = OptimizerKind::ProxSgd;
    } else if (kind == "hspg") {
      c.optimizer = OptimizerKind::Hspg;
    } else {
      invalid("optimizer.kind must be \"prox_sgd\" or \"hspg\"");
    }
    read(o, "epsilon", c.hspg.epsilon, "optimizer");
    if (o.contains("switch")) {
      const auto& s = o["switch"];
      check_keys(s, "optimizer.switch", {"kind", "iterations", "window", "tol_groups"});
      std::string sk = "fixed_iterations";
      read(s, "kind", sk, "optimizer.switch");
      if (sk == "fixed_iterations") {
        c.hspg.when.kind = SwitchKind::FixedIterations;
      } else if (sk == "sparsity_stable") {
        c.hspg.when.kind = SwitchKind::SparsityStable;
      } else {
        invalid("optimizer.switch.kind must be \"fixed_iterations\" or \"sparsity_stable\"");
      }
      read_count(s, "iterations", c.hspg.when.iterations, "optimizer.switch");
      read_count(s, "window", c.hspg.when.window, "optimizer.switch");
      read(s, "tol_groups", c.hspg.when.tol_groups, "optimizer.switch");
    }
  }

  if (doc.contains("schedule")) {
    const auto& s = doc["schedule"];
    check_keys(s, "schedule", {"kind", "alpha0", "horizon", "alpha_min", "decay", "every", "rho0", "mu"});
    c.alpha.kind = parse_enum(s, "kind", c.alpha.kind, "schedule", schedule_kind);
    read(s, "alpha0", c.alpha.alpha0, "schedule");
    read_count(s, "horizon", c.alpha.horizon, "schedule");
    read(s, "alpha_min", c.alpha.alpha_min, "schedule");
    read(s, "decay", c.alpha.decay, "schedule");
    read_count(s, "every", c.alpha.every, "schedule");
    read(s, "rho0", c.rho.rho0, "schedule");
    read(s, "mu", c.rho.mu, "schedule");
  }

  read_count(doc, "epochs", c.epochs, "config");
  read_count(doc, "batch_size", c.batch_size, "config");
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_integer() || doc["seed"].get<long long>() < 0) invalid("config.seed must be a nonnegative integer");
    c.seed = doc["seed"].get<std::uint64_t>();
  }
  read(doc, "prune_at_end", c.prune_at_end, "config");
  read(doc, "weighted_prune", c.weighted_prune, "config");
  read_count(doc, "checkpoint_every", c.checkpoint_every, "config");
  std::string out;
  read(doc, "output_dir", out, "config");
  if (!out.empty()) c.output_dir = out;
  if (c.batch_size == 0) invalid("batch_size must be positive");
  return c;
}

json RunConfig::to_json() const {
  json d = {{"kind", to_string(data.kind)},
            {"normalize", data.normalize},
            {"max_train", data.max_train},
            {"max_val", data.max_val},
            {"val_fraction", data.val_fraction}};
  switch (data.kind) {
    case DataKind::Idx:
      d["train_images"] = data.train_images;
      d["train_labels"] = data.train_labels;
      if (!data.test_images.empty()) {
        d["test_images"] = data.test_images;
        d["test_labels"] = data.test_labels;
      }
      d["pad_to"] = data.pad_to;
      break;
    case DataKind::Csv:
      d["train"] = data.train;
      if (!data.test.empty()) d["test"] = data.test;
      d["classes"] = data.classes;
      break;
    case DataKind::Synthetic:
      d["n"] = data.synthetic.n;
      d["m"] = data.synthetic.m;
      d["support"] = data.synthetic.support;
      d["noise"] = data.synthetic.noise;
      d["samples"] = data.synthetic.samples;
      if (data.synthetic_seed_given) d["seed"] = data.synthetic.seed;
      break;
  }
  json g = {{"scheme", wgsef::to_string(grouping.scheme)}, {"include_bias", grouping.include_bias}};
  if (grouping.scheme == SchemeKind::Custom) g["group_size"] = grouping.group_size;
  json o = {{"kind", optimizer == OptimizerKind::Hspg ? "hspg" : "prox_sgd"}};
  if (optimizer == OptimizerKind::Hspg) {
    o["epsilon"] = hspg.epsilon;
    if (hspg.when.kind == SwitchKind::FixedIterations) {
      o["switch"] = {{"kind", "fixed_iterations"}, {"iterations", hspg.when.iterations}};
    } else {
      o["switch"] = {{"kind", "sparsity_stable"}, {"window", hspg.when.window}, {"tol_groups", hspg.when.tol_groups}};
    }
  }
  json m = {{"arch", wgsef::to_string(model.arch)}, {"outputs", model.outputs}};
  if (!model.input_shape.empty()) m["input_shape"] = model.input_shape;
  if (!model.hidden.empty()) m["hidden"] = model.hidden;
  return {{"model", m},
          {"data", d},
          {"grouping", g},
          {"regularization",
           {{"scope", reg.scope == ScopeKind::Global ? "global" : "per_layer"}, {"lambda", reg.lambda}, {"k", reg.k}}},
          {"optimizer", o},
          {"schedule",
           {{"kind", to_string(alpha.kind)},
            {"alpha0", alpha.alpha0},
            {"horizon", alpha.horizon},
            {"alpha_min", alpha.alpha_min},
            {"decay", alpha.decay},
            {"every", alpha.every},
            {"rho0", rho.rho0},
            {"mu", rho.mu}}},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"seed", seed},
          {"prune_at_end", prune_at_end},
          {"weighted_prune", weighted_prune},
          {"checkpoint_every", checkpoint_every},
          {"output_dir", output_dir.string()}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    invalid(path.string() + ": " + e.what());
  }
  RunConfig c = RunConfig::from_json(doc);
  c.base_dir = path.parent_path();
  return c;
}

std::filesystem::path resolve_data_path(const RunConfig& config, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute()) {
    if (std::filesystem::exists(p)) return p;
    throw Error(Errc::Io, "dataset file not found: " + path);
  }
  std::vector<std::filesystem::path> tried{p};
  if (!config.base_dir.empty()) tried.push_back(config.base_dir / p);
  if (const char* root = std::getenv("WGSEF_DATA_DIR"); root && *root) tried.push_back(std::filesystem::path(root) / p);
  for (const auto& t : tried) {
    if (std::filesystem::exists(t)) return t;
  }
  throw Error(Errc::Io, "dataset file not found: " + path + " (also tried the config directory and $WGSEF_DATA_DIR)");
}

Experiment prepare(const RunConfig& config) {
  Experiment e;
  const auto& dc = config.data;
  switch (dc.kind) {
    case DataKind::Idx: {
      const auto ti = resolve_data_path(config, dc.train_images), tl = resolve_data_path(config, dc.train_labels);
      if (!dc.test_images.empty()) {
        const auto vi = resolve_data_path(config, dc.test_images), vl = resolve_data_path(config, dc.test_labels);
        e.train = load_idx(ti, tl, dc.pad_to);
        e.val = load_idx(vi, vl, dc.pad_to);
      } else {
        std::tie(e.train, e.val) = split_tail(load_idx(ti, tl, dc.pad_to), dc.val_fraction);
      }
      break;
    }
    case DataKind::Csv: {
      const auto tr = resolve_data_path(config, dc.train);
      if (!dc.test.empty()) {
        const auto te = resolve_data_path(config, dc.test);
        e.train = load_csv(tr, dc.classes);
        e.val = load_csv(te, dc.classes);
      } else {
        std::tie(e.train, e.val) = split_tail(load_csv(tr, dc.classes), dc.val_fraction);
      }
      break;
    }
    case DataKind::Synthetic: {
      SyntheticGroupSpec spec = dc.synthetic;
      if (!dc.synthetic_seed_given) spec.seed = derive_seed(config.seed, kDataStream, 0);
      e.planted = gen_group_sparse(spec);
      std::tie(e.train, e.val) = split_tail(e.planted->data, dc.val_fraction);
      break;
    }
  }
  e.train = head(e.train, dc.max_train);
  e.val = head(e.val, dc.max_val);
  if (e.train.size() == 0) throw Error(Errc::DataEmpty, "training set is empty");
  if (e.val.size() == 0) throw Error(Errc::DataEmpty, "validation set is empty");
  if (dc.normalize) normalize(e.train, {&e.train, &e.val});

  ModelSpec spec = config.model;
  spec.seed = derive_seed(config.seed, kInitStream, 0);
  const auto sample = e.train.sample_shape();
  if (spec.input_shape.empty()) spec.input_shape = sample;
  if (spec.input_shape != sample) invalid("model.input_shape does not match the data's sample shape");
  if (e.train.regression()) {
    spec.outputs = e.train.targets.dim(1);
  } else if (spec.outputs != e.train.classes) {
    invalid("model.outputs must equal the number of classes (" + std::to_string(e.train.classes) + ")");
  }

  GroupingScheme scheme;
  scheme.kind = config.grouping.scheme;
  scheme.include_bias = config.grouping.include_bias;
  try {
    e.model = build(spec);
    if (scheme.kind == SchemeKind::PerLayerFilters) scheme.layer_k = config.reg.k;
    if (scheme.kind == SchemeKind::Custom) {
      scheme.custom = GroupPartition::contiguous(e.model.weight_count(), config.grouping.group_size);
    }
    e.groups = make_groups(e.model, scheme);
    if (config.reg.scope == ScopeKind::Global) {
      e.scope = global_scope(e.groups, config.reg.lambda[0], config.reg.k[0]);
    } else {
      auto lambdas = config.reg.lambda;
      auto ks = config.reg.k;
      if (lambdas.size() == 1) lambdas.assign(e.groups.size(), lambdas[0]);
      if (ks.size() == 1) ks.assign(e.groups.size(), ks[0]);
      e.scope = per_layer_scope(e.groups, lambdas, ks);
    }
  } catch (const Error& err) {
    if (err.code() == Errc::ConfigInvalid) throw;
    invalid(err.what());
  }
  return e;
}

std::string metrics_row(const EpochRecord& r, bool deterministic) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.10g,%.6f,%.6f,%.10g,%.6f,%.3f", r.epoch, r.loss, r.val_error,
                r.group_sparsity, r.dual_mass, r.flops_ratio, deterministic ? 0.0 : r.seconds);
  return buf;
}

std::vector<std::size_t> nonzero_groups(const LayerGroups& block, std::span<const double> theta, double tol) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < block.partition.size(); ++j) {
    double s = 0.0;
    for (std::size_t i : block.partition.group(j)) s += theta[block.coords[i]] * theta[block.coords[i]];
    if (std::sqrt(s) > tol) out.push_back(j);
  }
  return out;
}

RunOutcome run_train(const RunConfig& config, const RunOptions& options) {
  const auto wall_start = std::chrono::steady_clock::now();
  Experiment e = prepare(config);

  TrainConfig tc;
  tc.epochs = config.epochs;
  tc.batch_size = config.batch_size;
  tc.alpha = config.alpha;
  tc.rho = config.rho;
  tc.seed = config.seed;
  tc.prune_at_end = config.prune_at_end;
  tc.weighted_prune = config.weighted_prune;
  if (tc.alpha.kind == ScheduleKind::Cosine && tc.alpha.horizon == 0) {
    tc.alpha.horizon = config.epochs * ((e.train.size() + config.batch_size - 1) / config.batch_size);
  }

  OutputGuard guard(config.output_dir);
  const auto metrics_path = guard.add("metrics.csv");
  std::ofstream metrics(metrics_path);
  if (!metrics) throw Error(Errc::Io, "cannot write " + metrics_path.string());
  metrics << kMetricsHeader << '\n';

  std::vector<double> trained = flatten_params(e.model);
  tc.on_epoch = [&](const EpochRecord& r) {
    metrics << metrics_row(r, options.deterministic) << '\n' << std::flush;
    if (options.log) {
      *options.log << "epoch " << r.epoch << "  loss " << r.loss << "  val_error " << r.val_error << "%  sparsity "
                   << r.group_sparsity << "%  flops " << r.flops_ratio << "%\n"
                   << std::flush;
    }
  };
  tc.on_state = [&](std::size_t epoch, const ProxSgdState& s) {
    trained = s.theta;
    if (config.checkpoint_every == 0 || epoch % config.checkpoint_every != 0) return;
    const std::string stem = "checkpoint_epoch" + std::to_string(epoch);
    write_params(guard.add(stem + ".bin"), s.theta);
    write_params(guard.add(stem + ".momentum.bin"), s.m);
    write_json(guard.add(stem + ".state.json"),
               {{"epoch", epoch}, {"t", s.t}, {"last_dual_mass", s.last_dual_mass}});
  };

  RunOutcome out;
  if (config.optimizer == OptimizerKind::Hspg) {
    out.result = hspg_train(e.model, e.train, e.val, e.scope, tc, config.hspg);
  } else {
    out.result = train(e.model, e.train, e.val, e.scope, tc);
  }
  metrics.close();
  if (!metrics) throw Error(Errc::Io, "short write to " + metrics_path.string());

  Model dense = out.result.model;
  scatter_params(dense, trained);
  const auto model_bin = guard.add("model.bin");
  guard.add("model.json");
  save_model(model_bin, dense, {{"pruned", false}});

  const CompactModel exported = compact(out.result.model);
  const auto pruned_bin = guard.add("pruned.bin");
  guard.add("pruned.json");
  save_model(pruned_bin, exported.model,
             {{"pruned", out.result.pruned}, {"removed", exported.removed}, {"source", "model.bin"}});

  const auto& r = out.result;
  json summary = {{"schema_version", kSummarySchemaVersion},
                  {"optimizer", config.optimizer == OptimizerKind::Hspg ? "hspg" : "prox_sgd"},
                  {"seed", config.seed},
                  {"epochs", r.records.size()},
                  {"train_samples", e.train.size()},
                  {"val_samples", e.val.size()},
                  {"pruned", r.pruned},
                  {"before_prune", snapshot_json(r.before_prune, e.scope)},
                  {"after_prune", snapshot_json(r.after_prune, e.scope)},
                  {"final",
                   {{"val_error", r.after_prune.val_error},
                    {"group_sparsity", r.after_prune.group_sparsity},
                    {"flops_ratio", r.after_prune.flops_ratio},
                    {"loss", r.records.empty() ? json(nullptr) : json(r.records.back().loss)}}},
                  {"flops", flops_json(flops_estimate(r.model, r.model.params()))},
                  {"config", config.to_json()}};
  if (config.optimizer == OptimizerKind::Hspg) {
    summary["hspg"] = {{"switched", r.switched}, {"switch_step", r.switch_step}};
  }
  if (e.planted) {
    const auto all = concat_groups(e.groups);
    const auto found = nonzero_groups(all, r.model.params());
    const bool planted_partition =
        config.grouping.scheme == SchemeKind::Custom && all.partition.size() == config.data.synthetic.m;
    summary["support"] = {{"planted", e.planted->planted},
                          {"recovered", found},
                          {"support_recovered", planted_partition && found == e.planted->planted}};
  }
  if (!options.deterministic) {
    summary["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  }
  const auto summary_path = guard.add("summary.json");
  auto files = guard.names();
  summary["files"] = files;
  write_json(summary_path, summary);
  guard.commit();
  out.summary = std::move(summary);
  return out;
}

EvalReport run_eval(const RunConfig& config, const std::filesystem::path& model_bin) {
  const Model model = load_model(model_bin);
  const Experiment e = prepare(config);
  if (model.input_shape() != e.val.sample_shape()) {
    throw Error(Errc::ConfigInvalid, "model input shape does not match the dataset");
  }
  EvalReport rep;
  rep.error = error_percent(model, e.val);
  GroupingScheme scheme;
  scheme.kind = config.grouping.scheme;
  scheme.include_bias = config.grouping.include_bias;
  if (scheme.kind == SchemeKind::PerLayerFilters) scheme.layer_k = config.reg.k;
  if (scheme.kind == SchemeKind::Custom) {
    scheme.custom = GroupPartition::contiguous(model.weight_count(), config.grouping.group_size);
  }
  std::size_t zero = 0, total = 0;
  try {
    for (const auto& b : make_groups(model, scheme)) {
      total += b.partition.size();
      zero += b.partition.size() - nonzero_groups(b, model.params()).size();
    }
  } catch (const Error& err) {
    throw Error(Errc::ConfigInvalid, err.what());
  }
  rep.group_sparsity = total ? 100.0 * static_cast<double>(zero) / static_cast<double>(total) : 0.0;
  rep.flops = flops_estimate(model, model.params());
  return rep;
}

}  // namespace wgsef
