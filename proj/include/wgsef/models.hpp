#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wgsef/autodiff.hpp"
#include "wgsef/data.hpp"
#include "wgsef/groups.hpp"

namespace wgsef {

enum class Architecture { Linear, Logistic, MLP, LeNet5 };

struct ModelSpec {
  Architecture arch = Architecture::LeNet5;
  std::vector<std::size_t> input_shape{1, 32, 32};
  std::size_t outputs = 10;
  std::vector<std::size_t> hidden;  // MLP only
  std::uint64_t seed = 0;
};

enum class LayerKind { Conv, Dense };
enum class LossKind { CrossEntropy, Mse };

/// One layer of a sequential model. Conv weights are [out, in, kernel, kernel]
/// (filter-major), dense weights [out, in]; the bias [out] follows the weights
/// in the flat vector.
struct LayerDesc {
  LayerKind kind = LayerKind::Dense;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;
  bool relu = false;
  std::size_t pool = 0;  // max-pool window (stride = window) after relu; 0 = none

  // Filled in by Model from the input shape.
  std::size_t in_h = 1, in_w = 1;    // conv input spatial size
  std::size_t out_h = 1, out_w = 1;  // after conv and pooling
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;

  [[nodiscard]] std::size_t weight_count() const noexcept { return out * in * kernel * kernel; }
  /// Weights per output unit (one filter or one neuron row).
  [[nodiscard]] std::size_t fan_in() const noexcept { return in * kernel * kernel; }
};

/// Sequential conv / dense network holding a single flat parameter vector.
class Model {
 public:
  Model() = default;
  Model(std::vector<LayerDesc> layers, std::vector<std::size_t> input_shape, LossKind loss);

  [[nodiscard]] const std::vector<LayerDesc>& layers() const noexcept { return layers_; }
  [[nodiscard]] const std::vector<std::size_t>& input_shape() const noexcept { return input_shape_; }
  [[nodiscard]] LossKind loss_kind() const noexcept { return loss_; }
  [[nodiscard]] std::size_t param_count() const noexcept { return params_.size(); }
  [[nodiscard]] std::size_t weight_count() const noexcept;
  [[nodiscard]] std::size_t outputs() const;

  [[nodiscard]] std::span<const double> params() const noexcept { return params_; }
  [[nodiscard]] std::span<double> params() noexcept { return params_; }

  /// Output of the network for inputs [B, sample shape...].
  Var forward(Tape& tape, Var x, std::vector<Var>* param_leaves = nullptr) const;
  /// Forward pass without gradients.
  [[nodiscard]] Tensor predict(const Tensor& inputs) const;
  /// Mean loss on the batch; writes d loss / d params into grad (length param_count()).
  double loss_and_grad(const Batch& batch, std::span<double> grad) const;
  [[nodiscard]] double loss(const Batch& batch) const;

  [[nodiscard]] nlohmann::json to_json() const;
  static Model from_json(const nlohmann::json& doc);

 private:
  std::vector<LayerDesc> layers_;
  std::vector<std::size_t> input_shape_;
  LossKind loss_ = LossKind::CrossEntropy;
  std::vector<double> params_;
};

/// Builds and initializes a model: He normal weights for relu layers,
/// uniform(+-1/sqrt(fan_in)) for the output layer, zero biases. Throws InvalidSpec.
Model build(const ModelSpec& spec);

std::vector<double> flatten_params(const Model& model);
/// Throws DimensionMismatch.
void scatter_params(Model& model, std::span<const double> flat);

enum class SchemeKind { PerFilter, PerChannel, PerNeuron, Unstructured, PerLayerFilters, Custom };

struct GroupingScheme {
  SchemeKind kind = SchemeKind::PerFilter;
  std::vector<std::size_t> layer_k;           // PerLayerFilters: k per conv layer
  std::optional<GroupPartition> custom;       // Custom: partition over all weights, in layer order
  bool include_bias = false;
};

inline constexpr std::size_t kAllLayers = std::numeric_limits<std::size_t>::max();

/// A partition over a subset of the model's flat coordinates: group j of
/// `partition` refers to coords[i] for each local index i in it.
struct LayerGroups {
  std::size_t layer = kAllLayers;
  std::vector<std::size_t> coords;
  GroupPartition partition;
};

/// Per-layer partitions for the layers the scheme applies to. PerFilter and
/// PerLayerFilters use conv layers, PerNeuron dense layers, PerChannel and
/// Unstructured every layer. Custom yields a single block. Throws
/// SchemeNotApplicable.
std::vector<LayerGroups> make_groups(const Model& model, const GroupingScheme& scheme);

/// Concatenation of per-layer partitions into one (global regularization).
LayerGroups concat_groups(const std::vector<LayerGroups>& blocks);

struct LayerFlops {
  std::size_t layer = 0;
  double dense = 0.0;  // 2 * multiply-accumulates of the unpruned layer
  double alive = 0.0;
  std::size_t outputs_alive = 0;
  std::size_t outputs_total = 0;
  [[nodiscard]] double ratio() const noexcept { return dense > 0 ? alive / dense : 0.0; }
};

struct FlopsReport {
  std::vector<LayerFlops> layers;
  double dense = 0.0;
  double alive = 0.0;
  std::vector<std::string> warnings;
  [[nodiscard]] double ratio() const noexcept { return dense > 0 ? alive / dense : 0.0; }
};

/// Counts 2 * MACs of conv and dense layers with zero-norm output units
/// removed; removed outputs also shrink the next layer's inputs.
FlopsReport flops_estimate(const Model& model, std::span<const double> theta,
                           double tol = kDefaultZeroTol);

struct CompactModel {
  Model model;
  nlohmann::json removed;  // [{"layer": l, "units": [...]}, ...]
};

/// Physically removes zero-weight filters / neurons from every layer except
/// the last. Their constant post-activation output is folded into the next
/// layer's bias, so predictions are unchanged up to rounding. Channels feeding
/// a padded conv are kept (their constant would not fold exactly).
CompactModel compact(const Model& model, double tol = kDefaultZeroTol);

/// Percentage of misclassified samples (classification) or
/// 100 * ||pred - y||^2 / ||y||^2 (regression).
double error_percent(const Model& model, const Dataset& data, std::size_t chunk = 256);

std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);
std::string to_string(SchemeKind s);
SchemeKind scheme_from_string(const std::string& s);

}  // namespace wgsef
