#pragma once

#include <initializer_list>
#include <string>

#include "diffdepth/metrics.hpp"
#include "diffdepth/training.hpp"

#include <json.hpp>

namespace diffdepth {

// Throws UsageError naming the first key not in `allowed`.
void require_keys(const nlohmann::json& obj,
                  std::initializer_list<const char*> allowed,
                  const std::string& context);

// Strict parsers; absent keys keep the defaults, unknown keys are rejected.
DepthCodecConfig codec_from_json(const nlohmann::json& j);
DenoiserConfig denoiser_from_json(const nlohmann::json& j);
FovAugConfig fov_aug_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);
EvalProtocol protocol_from_json(const nlohmann::json& j);

nlohmann::json codec_to_json(const DepthCodecConfig& c);
nlohmann::json train_config_to_json(const TrainConfig& c);

// sha256 of the canonical (sorted-key) dump.
std::string config_hash(const nlohmann::json& j);

// {code_version, config_sha256, seed} block stamped on outputs.
nlohmann::json provenance_json(const nlohmann::json& config,
                               std::uint64_t seed);

nlohmann::json load_json_file(const std::filesystem::path& path);

}  // namespace diffdepth
