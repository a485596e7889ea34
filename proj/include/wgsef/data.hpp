#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wgsef/tensor.hpp"

namespace wgsef {

/// Samples along dimension 0 of `inputs`. Classification sets fill `labels`,
/// regression sets fill `targets` ([N, outputs]).
struct Dataset {
  Tensor inputs;
  std::vector<int> labels;
  Tensor targets;
  std::size_t classes = 0;  // 0 for regression
  double mean = 0.0;        // normalization applied to inputs (identity: 0, 1)
  double stddev = 1.0;

  [[nodiscard]] std::size_t size() const noexcept { return inputs.rank() ? inputs.dim(0) : 0; }
  [[nodiscard]] bool regression() const noexcept { return classes == 0; }
  /// Shape of one sample (inputs.shape without the leading N).
  [[nodiscard]] std::vector<std::size_t> sample_shape() const;
  [[nodiscard]] Dataset subset(const std::vector<std::size_t>& rows) const;
};

/// A minibatch, same layout as Dataset.
struct Batch {
  Tensor inputs;
  std::vector<int> labels;
  Tensor targets;
};

Batch make_batch(const Dataset& data, const std::vector<std::size_t>& rows);

/// Reads an IDX image/label pair (magics 0x803 / 0x801). Pixels are scaled to
/// [0, 1]; images smaller than pad_to are zero-padded centrally (28 -> 32 adds
/// two pixels per side). pad_to = 0 keeps the stored size.
/// Throws BadMagic, TruncatedFile, CountMismatch, Io.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t pad_to = 32);

/// Writes raw IDX files (unsigned bytes, big-endian header).
void write_idx_images(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                      const std::vector<std::uint8_t>& pixels);
void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels);

/// CSV with a header row. The column named "label" holds the class (or the
/// regression target when classes == 0); all other columns are features.
Dataset load_csv(const std::filesystem::path& path, std::size_t classes);

struct SyntheticGroupSpec {
  std::size_t n = 200;        // features
  std::size_t m = 20;         // contiguous equal groups
  std::size_t support = 4;    // planted nonzero groups
  double noise = 0.01;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticProblem {
  Dataset data;                  // inputs [N, n], targets [N, 1]
  std::vector<double> w_star;    // length n
  std::vector<std::size_t> planted;  // sorted group indices
};

/// w* has exactly `support` nonzero groups with N(0,1) entries; rows of X are
/// N(0, I); y = X w* + noise * N(0,1).
SyntheticProblem gen_group_sparse(const SyntheticGroupSpec& spec);

/// Row order for one epoch: a shuffle by epoch_seed cut into batches of b; the
/// last batch may be short.
std::vector<std::vector<std::size_t>> batches(std::size_t count, std::size_t b,
                                              std::uint64_t epoch_seed);

/// Global mean/std normalization of inputs computed on `fit` and applied to
/// every dataset in `apply`.
void normalize(const Dataset& fit, std::vector<Dataset*> apply);

/// Deterministic split: the last `fraction` of the rows become validation.
std::pair<Dataset, Dataset> split_tail(const Dataset& data, double fraction = 0.1);

}  // namespace wgsef
