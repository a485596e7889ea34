#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "wgsef/models.hpp"

namespace wgsef {

inline constexpr std::uint32_t kParamFileVersion = 1;

/// "WGSF", u32 version, u64 count, then count float64 values; all little-endian.
void write_params(const std::filesystem::path& path, std::span<const double> values);
/// Throws BadModelFile on a bad header or short payload, Io if unreadable.
std::vector<double> read_params(const std::filesystem::path& path);

/// Sidecar path for a parameter file: model.bin -> model.json.
std::filesystem::path sidecar_path(const std::filesystem::path& bin);

/// Writes the parameters and a sidecar {"schema_version", "model", ...extra}.
void save_model(const std::filesystem::path& bin, const Model& model, const nlohmann::json& extra = {});
/// Reads both files back. Throws BadModelFile.
Model load_model(const std::filesystem::path& bin);

}  // namespace wgsef
