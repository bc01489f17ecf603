#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "diffdepth/depth_codec.hpp"
#include "diffdepth/render.hpp"

#include <json.hpp>

namespace diffdepth {

// 8-bit binary PPM; values mapped [-1, 1] <-> [0, 255].
void write_ppm(const std::filesystem::path& path, const Image3& rgb);
Image3 read_ppm(const std::filesystem::path& path);

// Grayscale PFM, float32, scanlines bottom-to-top, little-endian (scale -1).
void write_pfm(const std::filesystem::path& path, const Grid& values);
Grid read_pfm(const std::filesystem::path& path);

// Binary PGM; invalid -> 0, valid -> 255.
void write_pgm_mask(const std::filesystem::path& path, const Mask& mask);
Mask read_pgm_mask(const std::filesystem::path& path);

inline constexpr int kManifestVersion = 1;

struct Dataset {
  std::vector<RenderedSample> samples;
  DepthCodecConfig codec_hint;
};

// Layout: manifest.json + rgb_<id>.ppm + depth_<id>.pfm + valid_<id>.pgm.
// Invalid depth pixels are stored as 0. The manifest records per-file sha256
// checksums; `provenance` (may be null) is embedded verbatim. Identical
// samples produce byte-identical directories.
void write_dataset(const std::vector<RenderedSample>& samples,
                   const std::filesystem::path& dir,
                   const DepthCodecConfig& codec_hint,
                   const nlohmann::json& provenance = nullptr);

nlohmann::json read_manifest(const std::filesystem::path& dir);

// Rejects unknown manifest versions, missing files (naming the sample id),
// checksum mismatches, and shape mismatches.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace diffdepth
