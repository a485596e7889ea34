#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wgsef/data.hpp"
#include "wgsef/models.hpp"
#include "wgsef/optim.hpp"

namespace wgsef {

inline constexpr int kSummarySchemaVersion = 1;

enum class DataKind { Idx, Csv, Synthetic };
enum class OptimizerKind { ProxSgd, Hspg };

struct DataConfig {
  DataKind kind = DataKind::Idx;
  // Idx: train/test image and label files. Csv: train (and optional test) files.
  std::string train_images, train_labels, test_images, test_labels;
  std::string train, test;
  std::size_t classes = 10;  // Csv; 0 = regression
  std::size_t pad_to = 32;   // Idx
  bool normalize = true;
  std::size_t max_train = 0;  // 0 = all rows
  std::size_t max_val = 0;
  double val_fraction = 0.1;  // used when there is no separate test set
  SyntheticGroupSpec synthetic;
  bool synthetic_seed_given = false;
};

struct GroupingConfig {
  SchemeKind scheme = SchemeKind::PerFilter;
  bool include_bias = false;
  std::size_t group_size = 0;  // Custom: contiguous groups over all weights
};

struct RegConfig {
  ScopeKind scope = ScopeKind::PerLayer;
  std::vector<double> lambda;  // one value, or one per block
  std::vector<std::size_t> k;
};

/// One training run. Parsed from a single JSON document; unknown keys are
/// rejected.
struct RunConfig {
  ModelSpec model;
  DataConfig data;
  GroupingConfig grouping;
  RegConfig reg;
  OptimizerKind optimizer = OptimizerKind::ProxSgd;
  HspgConfig hspg;
  StepSchedule alpha;
  MomentumSchedule rho;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  bool prune_at_end = true;
  bool weighted_prune = false;
  std::size_t checkpoint_every = 0;  // epochs; 0 = none
  std::filesystem::path output_dir = "runs/out";
  std::filesystem::path base_dir;  // directory of the config file

  /// Throws ConfigInvalid.
  static RunConfig from_json(const nlohmann::json& doc);
  [[nodiscard]] nlohmann::json to_json() const;
};

/// Reads and parses a config file. Throws Io, ConfigInvalid.
RunConfig load_run_config(const std::filesystem::path& path);

/// Relative dataset paths are tried against the working directory, the
/// config's directory and then $WGSEF_DATA_DIR. Throws Io when none exists.
std::filesystem::path resolve_data_path(const RunConfig& config, const std::string& path);

/// Everything a run needs, built from a config.
struct Experiment {
  Dataset train, val;
  Model model;
  std::vector<LayerGroups> groups;
  RegScope scope;
  std::optional<SyntheticProblem> planted;  // Synthetic data only
};

/// Loads data, builds the model, partition and scope. Throws ConfigInvalid,
/// Io, DataEmpty and the loaders' errors.
Experiment prepare(const RunConfig& config);

struct RunOptions {
  bool deterministic = false;  // metrics.csv timings written as 0
  std::ostream* log = nullptr;
};

struct RunOutcome {
  TrainResult result;
  nlohmann::json summary;
};

/// Trains per the config and writes into config.output_dir: metrics.csv,
/// model.bin (trained weights before pruning) + model.json, pruned.bin (compacted export) +
/// pruned.json, summary.json and optional checkpoints. On failure everything
/// written is removed and the error rethrown.
RunOutcome run_train(const RunConfig& config, const RunOptions& options = {});

/// metrics.csv header, fixed column order.
inline constexpr const char* kMetricsHeader = "epoch,loss,val_error,group_sparsity,dual_mass,flops_ratio,seconds";
std::string metrics_row(const EpochRecord& r, bool deterministic);

struct EvalReport {
  double error = 0.0;           // percent
  double group_sparsity = 0.0;  // percent, under the config's grouping
  FlopsReport flops;
};

/// Error on the config's validation split, sparsity and FLOPs of a saved model.
EvalReport run_eval(const RunConfig& config, const std::filesystem::path& model_bin);

/// Group indices with nonzero norm under a block partition.
std::vector<std::size_t> nonzero_groups(const LayerGroups& block, std::span<const double> theta,
                                        double tol = kDefaultZeroTol);

}  // namespace wgsef
