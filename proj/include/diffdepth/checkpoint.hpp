#pragma once

#include <filesystem>
#include <string>

#include "diffdepth/denoiser.hpp"
#include "diffdepth/depth_codec.hpp"

#include <json.hpp>

namespace diffdepth {

inline constexpr int kCheckpointVersion = 1;

// Layout: <dir>/metadata.json (format version, model + codec config, ordered
// parameter index, blob checksum) and <dir>/params.bin (float32 LE in
// for_each_param order). `extra` is embedded verbatim.
void save_checkpoint(const std::filesystem::path& dir, const Denoiser& model,
                     const DepthCodecConfig& codec,
                     const nlohmann::json& extra = nullptr);

struct LoadedCheckpoint {
  Denoiser model;
  DepthCodecConfig codec;
  nlohmann::json extra;
};

// Rejects unknown format versions, checksum mismatches, and any disagreement
// between the parameter index and the reconstructed model.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

namespace detail {

// Shared float32 parameter blob helpers (also used by the FOV regressor).
struct ParamBlobWriter {
  nlohmann::ordered_json index = nlohmann::ordered_json::array();
  std::string bytes;

  void add(const std::string& name, const float* data, std::size_t n);
  // Writes params.bin and fills blob/blob_sha256/params in meta.
  void finish(const std::filesystem::path& dir, nlohmann::ordered_json& meta);
};

struct ParamBlobReader {
  std::string bytes;
  nlohmann::json index;
  std::size_t entry = 0, offset = 0;

  ParamBlobReader(const std::filesystem::path& dir, const nlohmann::json& meta);
  void copy(const std::string& name, float* dst, std::size_t n);
  void finish() const;  // all entries must have been consumed
};

}  // namespace detail

}  // namespace diffdepth
