#include "diffdepth/config.hpp"

#include <fstream>

#include "diffdepth/error.hpp"
#include "diffdepth/sha256.hpp"
#include "diffdepth/version.hpp"

namespace diffdepth {

namespace {

using nlohmann::json;

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("config key '") + key + "' has wrong type");
  }
}

}  // namespace

void require_keys(const nlohmann::json& obj,
                  std::initializer_list<const char*> allowed,
                  const std::string& context) {
  if (obj.is_null()) return;
  if (!obj.is_object()) throw UsageError(context + ": expected a JSON object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw UsageError(context + ": unknown key '" + item.key() + "'");
    }
  }
}

DepthCodecConfig codec_from_json(const nlohmann::json& j) {
  require_keys(j, {"mode", "d_min", "d_max"}, "codec");
  DepthCodecConfig c;
  c.mode = depth_encoding_from_string(
      get_or<std::string>(j, "mode", to_string(c.mode)));
  c.d_min = get_or<double>(j, "d_min", c.d_min);
  c.d_max = get_or<double>(j, "d_max", c.d_max);
  c.validate();
  return c;
}

DenoiserConfig denoiser_from_json(const nlohmann::json& j) {
  require_keys(j,
               {"base_channels", "depth_levels", "embed_dim",
                "fov_conditioning", "parameterization"},
               "denoiser");
  DenoiserConfig c;
  c.base_channels = get_or<int>(j, "base_channels", c.base_channels);
  c.depth_levels = get_or<int>(j, "depth_levels", c.depth_levels);
  c.embed_dim = get_or<int>(j, "embed_dim", c.embed_dim);
  c.fov_conditioning = get_or<bool>(j, "fov_conditioning", c.fov_conditioning);
  c.parameterization = parameterization_from_string(
      get_or<std::string>(j, "parameterization", to_string(c.parameterization)));
  c.validate();
  return c;
}

FovAugConfig fov_aug_from_json(const nlohmann::json& j) {
  require_keys(j, {"scale_min", "scale_max", "pad_noise_std"}, "fov_aug");
  FovAugConfig c;
  c.scale_min = get_or<double>(j, "scale_min", c.scale_min);
  c.scale_max = get_or<double>(j, "scale_max", c.scale_max);
  c.pad_noise_std = get_or<double>(j, "pad_noise_std", c.pad_noise_std);
  c.validate();
  return c;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  require_keys(j,
               {"denoiser", "codec", "fov_aug", "p_flip", "p_fov_aug",
                "p_unroll", "lr", "fine_tune_lr", "fine_tune_steps",
                "batch_size", "steps", "log_every", "workers", "seed"},
               "train");
  TrainConfig c;
  if (j.contains("denoiser")) c.denoiser = denoiser_from_json(j.at("denoiser"));
  if (j.contains("codec")) c.codec = codec_from_json(j.at("codec"));
  if (j.contains("fov_aug")) c.fov_aug = fov_aug_from_json(j.at("fov_aug"));
  c.p_flip = get_or<double>(j, "p_flip", c.p_flip);
  c.p_fov_aug = get_or<double>(j, "p_fov_aug", c.p_fov_aug);
  c.p_unroll = get_or<double>(j, "p_unroll", c.p_unroll);
  c.lr = get_or<double>(j, "lr", c.lr);
  c.fine_tune_lr = get_or<double>(j, "fine_tune_lr", c.fine_tune_lr);
  c.fine_tune_steps = get_or<int>(j, "fine_tune_steps", c.fine_tune_steps);
  c.batch_size = get_or<int>(j, "batch_size", c.batch_size);
  c.steps = get_or<int>(j, "steps", c.steps);
  c.log_every = get_or<int>(j, "log_every", c.log_every);
  c.workers = get_or<int>(j, "workers", c.workers);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.validate();
  return c;
}

EvalProtocol protocol_from_json(const nlohmann::json& j) {
  require_keys(j, {"min_depth", "max_depth"}, "protocol");
  EvalProtocol p;
  p.min_depth = get_or<double>(j, "min_depth", p.min_depth);
  p.max_depth = get_or<double>(j, "max_depth", p.max_depth);
  p.validate();
  return p;
}

nlohmann::json codec_to_json(const DepthCodecConfig& c) {
  return {{"mode", to_string(c.mode)}, {"d_min", c.d_min}, {"d_max", c.d_max}};
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {
      {"denoiser",
       {{"base_channels", c.denoiser.base_channels},
        {"depth_levels", c.denoiser.depth_levels},
        {"embed_dim", c.denoiser.embed_dim},
        {"fov_conditioning", c.denoiser.fov_conditioning},
        {"parameterization", to_string(c.denoiser.parameterization)}}},
      {"codec", codec_to_json(c.codec)},
      {"fov_aug",
       {{"scale_min", c.fov_aug.scale_min},
        {"scale_max", c.fov_aug.scale_max},
        {"pad_noise_std", c.fov_aug.pad_noise_std}}},
      {"p_flip", c.p_flip},
      {"p_fov_aug", c.p_fov_aug},
      {"p_unroll", c.p_unroll},
      {"lr", c.lr},
      {"fine_tune_lr", c.fine_tune_lr},
      {"fine_tune_steps", c.fine_tune_steps},
      {"batch_size", c.batch_size},
      {"steps", c.steps},
      {"log_every", c.log_every},
      {"workers", c.workers},
      {"seed", c.seed}};
}

std::string config_hash(const nlohmann::json& j) {
  return sha256_hex(j.dump());
}

nlohmann::json provenance_json(const nlohmann::json& config,
                               std::uint64_t seed) {
  return {{"code_version", kVersion},
          {"config_sha256", config_hash(config)},
          {"seed", seed}};
}

nlohmann::json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

}  // namespace diffdepth
