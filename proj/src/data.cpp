#include "wgsef/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>

#include "wgsef/errors.hpp"

namespace wgsef {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<std::uint8_t>& buf, std::size_t at, const std::filesystem::path& path) {
  if (buf.size() < at + 4) throw Error(Errc::TruncatedFile, path.string() + ": header cut short");
  return (std::uint32_t{buf[at]} << 24) | (std::uint32_t{buf[at + 1]} << 16) |
         (std::uint32_t{buf[at + 2]} << 8) | std::uint32_t{buf[at + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

std::vector<std::size_t> iota_rows(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> r(end - begin);
  std::iota(r.begin(), r.end(), begin);
  return r;
}

}  // namespace

std::vector<std::size_t> Dataset::sample_shape() const {
  if (inputs.rank() == 0) return {};
  return {inputs.shape.begin() + 1, inputs.shape.end()};
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Batch b = make_batch(*this, rows);
  Dataset d;
  d.inputs = std::move(b.inputs);
  d.labels = std::move(b.labels);
  d.targets = std::move(b.targets);
  d.classes = classes;
  d.mean = mean;
  d.stddev = stddev;
  return d;
}

Batch make_batch(const Dataset& data, const std::vector<std::size_t>& rows) {
  Batch b;
  auto shape = data.inputs.shape;
  const std::size_t stride = data.inputs.size() / std::max<std::size_t>(1, data.size());
  shape[0] = rows.size();
  b.inputs = Tensor(shape);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(data.inputs.data.begin() + static_cast<std::ptrdiff_t>(rows[i] * stride), stride,
                b.inputs.data.begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  if (!data.labels.empty()) {
    for (std::size_t r : rows) b.labels.push_back(data.labels[r]);
  }
  if (data.targets.rank() > 0) {
    const std::size_t tw = data.targets.size() / data.targets.dim(0);
    b.targets = Tensor({rows.size(), tw});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy_n(data.targets.data.begin() + static_cast<std::ptrdiff_t>(rows[i] * tw), tw,
                  b.targets.data.begin() + static_cast<std::ptrdiff_t>(i * tw));
    }
  }
  return b;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t pad_to) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);
  if (be32(img, 0, images) != 0x00000803) throw Error(Errc::BadMagic, images.string() + ": not an IDX image file");
  if (be32(lab, 0, labels) != 0x00000801) throw Error(Errc::BadMagic, labels.string() + ": not an IDX label file");
  const std::size_t n = be32(img, 4, images), rows = be32(img, 8, images), cols = be32(img, 12, images);
  const std::size_t nl = be32(lab, 4, labels);
  if (img.size() < 16 + n * rows * cols) throw Error(Errc::TruncatedFile, images.string() + ": pixel data cut short");
  if (lab.size() < 8 + nl) throw Error(Errc::TruncatedFile, labels.string() + ": label data cut short");
  if (n != nl) {
    throw Error(Errc::CountMismatch, std::to_string(n) + " images but " + std::to_string(nl) + " labels");
  }
  if (n == 0) throw Error(Errc::DataEmpty, images.string() + " holds no images");
  const std::size_t H = pad_to ? pad_to : rows, W = pad_to ? pad_to : cols;
  if (H < rows || W < cols) throw Error(Errc::InvalidSpec, "cannot pad images down to a smaller size");
  const std::size_t top = (H - rows) / 2, left = (W - cols) / 2;

  Dataset d;
  d.inputs = Tensor({n, 1, H, W}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        d.inputs.data[(i * H + top + r) * W + left + c] = img[16 + (i * rows + r) * cols + c] / 255.0;
      }
    }
  }
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    d.labels.push_back(lab[8 + i]);
    max_label = std::max(max_label, d.labels.back());
  }
  d.classes = std::max<std::size_t>(2, static_cast<std::size_t>(max_label) + 1);
  return d;
}

void write_idx_images(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                      const std::vector<std::uint8_t>& pixels) {
  if (rows * cols == 0 || pixels.size() % (rows * cols) != 0) {
    throw Error(Errc::DimensionMismatch, "pixel count is not a multiple of rows * cols");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  put_be32(out, 0x00000803);
  put_be32(out, static_cast<std::uint32_t>(pixels.size() / (rows * cols)));
  put_be32(out, static_cast<std::uint32_t>(rows));
  put_be32(out, static_cast<std::uint32_t>(cols));
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  put_be32(out, 0x00000801);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

Dataset load_csv(const std::filesystem::path& path, std::size_t classes) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::DataEmpty, path.string() + " is empty");
  const auto header = split(line);
  const auto it = std::find(header.begin(), header.end(), "label");
  if (it == header.end()) throw Error(Errc::InvalidSpec, path.string() + ": no 'label' column");
  const std::size_t label_col = static_cast<std::size_t>(it - header.begin());
  const std::size_t F = header.size() - 1;

  std::vector<double> x, y;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw Error(Errc::DimensionMismatch, path.string() + ":" + std::to_string(lineno) + ": expected " +
                                               std::to_string(header.size()) + " columns");
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      try {
        v = std::stod(cells[c]);
      } catch (const std::exception&) {
        throw Error(Errc::Io, path.string() + ":" + std::to_string(lineno) + ": bad number '" + cells[c] + "'");
      }
      (c == label_col ? y : x).push_back(v);
    }
  }
  const std::size_t N = y.size();
  if (N == 0) throw Error(Errc::DataEmpty, path.string() + " has no rows");
  Dataset d;
  d.inputs = Tensor({N, F}, std::move(x));
  d.classes = classes;
  if (classes == 0) {
    d.targets = Tensor({N, 1}, std::move(y));
  } else {
    for (double v : y) {
      if (v < 0 || v >= static_cast<double>(classes) || v != std::floor(v)) {
        throw Error(Errc::InvalidSpec, path.string() + ": label " + std::to_string(v) + " out of range");
      }
      d.labels.push_back(static_cast<int>(v));
    }
  }
  return d;
}

void SyntheticGroupSpec::validate() const {
  if (n == 0 || m == 0 || m > n || n % m != 0) {
    throw Error(Errc::InvalidSpec, "synthetic problem needs m dividing n");
  }
  if (support > m) throw Error(Errc::InvalidSpec, "support larger than the number of groups");
  if (!(noise >= 0.0)) throw Error(Errc::InvalidSpec, "noise must be nonnegative");
  if (samples == 0) throw Error(Errc::InvalidSpec, "sample count must be positive");
}

SyntheticProblem gen_group_sparse(const SyntheticGroupSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const std::size_t gs = spec.n / spec.m;

  SyntheticProblem p;
  std::vector<std::size_t> order(spec.m);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  p.planted.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(spec.support));
  std::sort(p.planted.begin(), p.planted.end());
  p.w_star.assign(spec.n, 0.0);
  for (std::size_t j : p.planted) {
    for (std::size_t i = j * gs; i < (j + 1) * gs; ++i) p.w_star[i] = nd(rng);
  }

  p.data.inputs = Tensor({spec.samples, spec.n});
  p.data.targets = Tensor({spec.samples, 1});
  for (std::size_t r = 0; r < spec.samples; ++r) {
    double y = 0.0;
    for (std::size_t i = 0; i < spec.n; ++i) {
      const double v = nd(rng);
      p.data.inputs.data[r * spec.n + i] = v;
      y += v * p.w_star[i];
    }
    p.data.targets.data[r] = y + spec.noise * nd(rng);
  }
  return p;
}

std::vector<std::vector<std::size_t>> batches(std::size_t count, std::size_t b, std::uint64_t epoch_seed) {
  if (b == 0 || count == 0) throw Error(Errc::InvalidSpec, "batch size and sample count must be positive");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(epoch_seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < count; start += b) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(count, start + b)));
  }
  return out;
}

void normalize(const Dataset& fit, std::vector<Dataset*> apply) {
  const auto& v = fit.inputs.data;
  if (v.empty()) throw Error(Errc::DataEmpty, "cannot normalize an empty dataset");
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  double sd = std::sqrt(var / static_cast<double>(v.size()));
  if (!(sd > 0.0)) sd = 1.0;
  for (Dataset* d : apply) {
    for (double& x : d->inputs.data) x = (x - mean) / sd;
    d->mean = mean;
    d->stddev = sd;
  }
}

std::pair<Dataset, Dataset> split_tail(const Dataset& data, double fraction) {
  const std::size_t N = data.size();
  if (N < 2) throw Error(Errc::DataEmpty, "need at least two samples to split");
  std::size_t nv = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(N)));
  nv = std::clamp<std::size_t>(nv, 1, N - 1);
  return {data.subset(iota_rows(0, N - nv)), data.subset(iota_rows(N - nv, N))};
}

}  // namespace wgsef
