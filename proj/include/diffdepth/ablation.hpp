#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "diffdepth/training.hpp"

#include <json.hpp>

namespace diffdepth {

enum class Ablation { log_vs_linear, fov_cond, eps_vs_v, n_samples, fov_perturb };

std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& s);
const std::vector<std::string>& ablation_names();

// Sized for a single desktop CPU core: toy twins at 64x64 train in minutes,
// not hours. The thresholds themselves live in the check table below.
struct AblationConfig {
  std::filesystem::path out_dir;    // report files; empty = in-memory only
  std::filesystem::path cache_dir;  // trained-model reuse; empty = no cache
  int train_scenes = 500;
  int eval_scenes = 100;
  int resolution = 64;
  int train_steps = 2000;
  int batch_size = 4;
  int base_channels = 8;
  int depth_levels = 3;
  int embed_dim = 64;
  int eval_steps = 4;  // sampler steps for evaluation unless swept
  int workers = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json ablation_config_to_json(const AblationConfig& c);
AblationConfig ablation_config_from_json(const nlohmann::json& j);

struct AblationCheck {
  std::string name;
  std::string condition;  // human-readable statement of the pinned threshold
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct AblationResult {
  std::string name;
  nlohmann::ordered_json table = nlohmann::ordered_json::array();  // flat rows
  std::vector<AblationCheck> checks;
  nlohmann::ordered_json notes;

  bool all_pass() const;
};

// Trains (or loads from cache) the matched model pair, holds everything but
// the named knob fixed, evaluates, and fills the table plus pass/fail checks.
// Writes <name>.json and <name>.csv under out_dir when given.
AblationResult run_ablation(Ablation name, const AblationConfig& cfg);

std::string result_csv(const AblationResult& r);
nlohmann::ordered_json result_json(const AblationResult& r,
                                   const AblationConfig& cfg);

}  // namespace diffdepth
