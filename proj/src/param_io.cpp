#include "wgsef/param_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "wgsef/errors.hpp"

namespace wgsef {

namespace {

static_assert(std::endian::native == std::endian::little, "parameter files assume a little-endian host");

constexpr char kMagic[4] = {'W', 'G', 'S', 'F'};

}  // namespace

void write_params(const std::filesystem::path& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  const std::uint32_t version = kParamFileVersion;
  const std::uint64_t n = values.size();
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!out) throw Error(Errc::Io, "short write to " + path.string());
}

std::vector<double> read_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  const std::vector<char> buf{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (buf.size() < 16 || std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw Error(Errc::BadModelFile, path.string() + ": missing WGSF header");
  }
  std::uint32_t version = 0;
  std::uint64_t n = 0;
  std::memcpy(&version, buf.data() + 4, sizeof version);
  std::memcpy(&n, buf.data() + 8, sizeof n);
  if (version != kParamFileVersion) {
    throw Error(Errc::BadModelFile, path.string() + ": unsupported version " + std::to_string(version));
  }
  if (buf.size() != 16 + n * sizeof(double)) {
    throw Error(Errc::BadModelFile, path.string() + ": expected " + std::to_string(n) + " values");
  }
  std::vector<double> values(n);
  std::memcpy(values.data(), buf.data() + 16, n * sizeof(double));
  return values;
}

std::filesystem::path sidecar_path(const std::filesystem::path& bin) {
  auto p = bin;
  return p.replace_extension(".json");
}

void save_model(const std::filesystem::path& bin, const Model& model, const nlohmann::json& extra) {
  write_params(bin, model.params());
  nlohmann::json doc = extra.is_object() ? extra : nlohmann::json::object();
  doc["schema_version"] = 1;
  doc["model"] = model.to_json();
  doc["param_count"] = model.param_count();
  std::ofstream out(sidecar_path(bin));
  if (!out) throw Error(Errc::Io, "cannot write " + sidecar_path(bin).string());
  out << doc.dump(2) << '\n';
}

Model load_model(const std::filesystem::path& bin) {
  const auto side = sidecar_path(bin);
  std::ifstream in(side);
  if (!in) throw Error(Errc::BadModelFile, "missing sidecar " + side.string());
  Model model;
  try {
    const auto doc = nlohmann::json::parse(in);
    model = Model::from_json(doc.at("model"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadModelFile, side.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(Errc::BadModelFile, side.string() + ": " + e.what());
  }
  const auto values = read_params(bin);
  if (values.size() != model.param_count()) {
    throw Error(Errc::BadModelFile, bin.string() + " holds " + std::to_string(values.size()) +
                                        " values, the model needs " + std::to_string(model.param_count()));
  }
  scatter_params(model, values);
  return model;
}

}  // namespace wgsef
