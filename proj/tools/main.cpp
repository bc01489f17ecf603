#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "diffdepth/ablation.hpp"
#include "diffdepth/checkpoint.hpp"
#include "diffdepth/colormap.hpp"
#include "diffdepth/config.hpp"
#include "diffdepth/datagen.hpp"
#include "diffdepth/dataset_io.hpp"
#include "diffdepth/error.hpp"
#include "diffdepth/fov_regressor.hpp"
#include "diffdepth/rng.hpp"
#include "diffdepth/training.hpp"
#include "diffdepth/version.hpp"

#include <CLI11.hpp>

namespace dd = diffdepth;

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void parse_resolution(const std::string& s, int& h, int& w) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw dd::UsageError("resolution must be HxW");
  try {
    h = std::stoi(s.substr(0, x));
    w = std::stoi(s.substr(x + 1));
  } catch (const std::exception&) {
    throw dd::UsageError("resolution must be HxW with integer parts");
  }
}

void parse_range(const std::string& s, double& lo, double& hi) {
  const auto c = s.find(',');
  if (c == std::string::npos) throw dd::UsageError("range must be lo,hi");
  try {
    lo = std::stod(s.substr(0, c));
    hi = std::stod(s.substr(c + 1));
  } catch (const std::exception&) {
    throw dd::UsageError("range must be lo,hi with numeric parts");
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw dd::DataError("cannot write " + path.string());
  out << text;
}

struct GenerateArgs {
  dd::GenSpec spec;
  std::string resolution = "64x64";
  std::string fov_range = "55,85";
  std::string out;
};

int cmd_generate(GenerateArgs& a) {
  parse_resolution(a.resolution, a.spec.height, a.spec.width);
  parse_range(a.fov_range, a.spec.fov_lo, a.spec.fov_hi);
  auto samples = dd::generate_samples(a.spec);

  const json cfg = {{"regime", a.spec.regime_mix}, {"n", a.spec.n},
                    {"height", a.spec.height},     {"width", a.spec.width},
                    {"fov_lo", a.spec.fov_lo},     {"fov_hi", a.spec.fov_hi},
                    {"seed", a.spec.seed}};
  dd::write_dataset(samples, a.out, dd::DepthCodecConfig{},
                    dd::provenance_json(cfg, a.spec.seed));

  std::map<std::string, std::array<double, 3>> stats;  // min, max, count
  for (const auto& s : samples) {
    auto& e = stats
                  .try_emplace(dd::to_string(s.regime),
                               std::array<double, 3>{1e30, 0.0, 0.0})
                  .first->second;
    for (Eigen::Index i = 0; i < s.depth.values.rows(); ++i)
      for (Eigen::Index j = 0; j < s.depth.values.cols(); ++j)
        if (s.depth.valid(i, j)) {
          const double d = s.depth.values(i, j);
          e[0] = std::min(e[0], d);
          e[1] = std::max(e[1], d);
          e[2] += 1.0;
        }
  }
  std::printf("wrote %zu samples to %s\n", samples.size(), a.out.c_str());
  for (const auto& [regime, e] : stats)
    std::printf("  %s: depth range [%.3f, %.3f] m over %.0f valid pixels\n",
                regime.c_str(), e[0], e[1], e[2]);
  return 0;
}

struct TrainArgs {
  std::string config_file, data_dir, out_dir, resume;
  std::optional<int> steps, batch_size, workers;
  std::optional<std::uint64_t> seed;
};

int cmd_train(TrainArgs& a) {
  json cfg_json = json::object();
  if (!a.config_file.empty()) cfg_json = dd::load_json_file(a.config_file);
  dd::TrainConfig cfg = dd::train_config_from_json(cfg_json);
  if (a.steps) cfg.steps = *a.steps;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.workers) cfg.workers = *a.workers;
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();

  dd::Dataset data = dd::read_dataset(a.data_dir);
  std::optional<dd::Denoiser> model;
  if (!a.resume.empty()) {
    dd::LoadedCheckpoint lc = dd::load_checkpoint(a.resume);
    if (lc.model.config().parameterization != cfg.denoiser.parameterization ||
        lc.model.config().fov_conditioning != cfg.denoiser.fov_conditioning)
      throw dd::UsageError(
          "resume checkpoint disagrees with config (parameterization or "
          "conditioning)");
    if (lc.codec.mode != cfg.codec.mode)
      throw dd::UsageError("resume checkpoint disagrees with config codec");
    model.emplace(std::move(lc.model));
    cfg.lr = cfg.fine_tune_lr;  // resumed runs continue at the fine-tune rate
  } else {
    model.emplace(cfg.denoiser, dd::derive_seed(cfg.seed, 6));
  }

  std::filesystem::create_directories(a.out_dir);
  write_text(std::filesystem::path(a.out_dir) / "train_config.json",
             json{{"config", dd::train_config_to_json(cfg)},
                  {"provenance",
                   dd::provenance_json(dd::train_config_to_json(cfg), cfg.seed)}}
                     .dump(2) +
                 "\n");
  dd::TrainOutput out = dd::train_denoiser(*model, data, cfg, a.out_dir);
  std::printf("trained %d steps, final loss %.6f\n", out.steps_run,
              out.final_loss);
  std::printf("checkpoint: %s\n",
              (std::filesystem::path(a.out_dir) / "checkpoint").c_str());
  return 0;
}

struct EvalArgs {
  std::string checkpoint, data_dir, out_dir;
  int steps = 8, samples = 1, workers = 1;
  std::uint64_t seed = 0;
  double min_depth = 0.5, max_depth = 80.0;
};

int cmd_eval(EvalArgs& a) {
  dd::LoadedCheckpoint lc = dd::load_checkpoint(a.checkpoint);
  dd::Dataset data = dd::read_dataset(a.data_dir);
  dd::EvalOptions opt;
  opt.infer.steps = a.steps;
  opt.infer.n_samples = a.samples;
  opt.infer.seed = a.seed;
  opt.protocol.min_depth = a.min_depth;
  opt.protocol.max_depth = a.max_depth;
  opt.protocol.validate();
  opt.workers = a.workers;
  dd::SplitReports rep = dd::eval_dataset(lc.model, data, lc.codec, opt);

  const json cfg = {{"checkpoint", a.checkpoint}, {"data", a.data_dir},
                    {"steps", a.steps},           {"samples", a.samples},
                    {"seed", a.seed},             {"min_depth", a.min_depth},
                    {"max_depth", a.max_depth}};
  ordered_json out = {
      {"provenance", dd::provenance_json(cfg, a.seed)},
      {"overall", dd::report_to_json(rep.overall, opt.protocol)}};
  std::string csv = dd::report_csv_header();
  csv += dd::report_csv_row("overall", rep.overall);
  if (rep.indoor) {
    out["indoor"] = dd::report_to_json(*rep.indoor, opt.protocol);
    csv += dd::report_csv_row("indoor", *rep.indoor);
  }
  if (rep.outdoor) {
    out["outdoor"] = dd::report_to_json(*rep.outdoor, opt.protocol);
    csv += dd::report_csv_row("outdoor", *rep.outdoor);
  }
  std::filesystem::create_directories(a.out_dir);
  write_text(std::filesystem::path(a.out_dir) / "metrics.json",
             out.dump(2) + "\n");
  write_text(std::filesystem::path(a.out_dir) / "metrics.csv", csv);
  std::printf("REL %.4f  RMSE %.4f  d1 %.4f  (%lld px)\n", rep.overall.rel,
              rep.overall.rmse, rep.overall.delta1,
              static_cast<long long>(rep.overall.n_pixels));
  return 0;
}

struct InferArgs {
  std::string checkpoint, rgb_file, out_dir, regressor;
  std::optional<double> fov_deg;
  bool estimate_fov = false;
  int steps = 8, samples = 8;
  std::uint64_t seed = 0;
};

int cmd_infer(InferArgs& a) {
  dd::LoadedCheckpoint lc = dd::load_checkpoint(a.checkpoint);
  dd::Image3 rgb = dd::read_ppm(a.rgb_file);

  std::optional<double> cond;
  ordered_json info;
  if (a.fov_deg) info["true_cond"] = dd::fov_to_cond(*a.fov_deg);
  if (a.estimate_fov) {
    if (a.regressor.empty())
      throw dd::UsageError("--estimate-fov requires --regressor");
    dd::FovRegressor reg = dd::load_fov_regressor(a.regressor);
    cond = reg.predict(rgb);
    info["estimated_cond"] = *cond;
  } else if (a.fov_deg) {
    cond = dd::fov_to_cond(*a.fov_deg);
  } else if (lc.model.config().fov_conditioning) {
    throw dd::UsageError(
        "conditioned checkpoint needs --fov-deg or --estimate-fov");
  }

  dd::InferOptions opt;
  opt.steps = a.steps;
  opt.n_samples = a.samples;
  opt.seed = a.seed;
  dd::DepthMap depth = dd::infer_depth(lc.model, rgb, cond, lc.codec, opt);

  std::filesystem::create_directories(a.out_dir);
  const auto out = std::filesystem::path(a.out_dir);
  dd::write_pfm(out / "depth.pfm", depth.values);
  dd::write_ppm(out / "preview.ppm", dd::colorize_depth(depth));
  const json cfg = {{"checkpoint", a.checkpoint},
                    {"steps", a.steps},
                    {"samples", a.samples},
                    {"seed", a.seed}};
  info["provenance"] = dd::provenance_json(cfg, a.seed);
  if (cond) info["cond_used"] = *cond;
  info["steps"] = a.steps;
  info["samples"] = a.samples;
  write_text(out / "info.json", info.dump(2) + "\n");
  std::printf("wrote %s and %s\n", (out / "depth.pfm").c_str(),
              (out / "preview.ppm").c_str());
  if (info.contains("estimated_cond"))
    std::printf("estimated cond %.4f%s\n", cond.value(),
                a.fov_deg ? (" (true " +
                             std::to_string(dd::fov_to_cond(*a.fov_deg)) + ")")
                                .c_str()
                          : "");
  return 0;
}

struct AblateArgs {
  std::string name, config_file;
  std::string out_dir = "ablation_reports";
  std::string cache_dir;
  std::optional<std::uint64_t> seed;
};

int cmd_ablate(AblateArgs& a) {
  dd::AblationConfig cfg;
  if (!a.config_file.empty())
    cfg = dd::ablation_config_from_json(dd::load_json_file(a.config_file));
  if (a.seed) cfg.seed = *a.seed;
  cfg.out_dir = a.out_dir;
  cfg.cache_dir = a.cache_dir.empty()
                      ? std::filesystem::path(a.out_dir) / "cache"
                      : std::filesystem::path(a.cache_dir);
  dd::AblationResult res =
      dd::run_ablation(dd::ablation_from_string(a.name), cfg);
  for (const auto& c : res.checks)
    std::printf("[%s] %s: %s (value %.6g, threshold %.6g)\n",
                c.pass ? "PASS" : "FAIL", c.name.c_str(), c.condition.c_str(),
                c.value, c.threshold);
  std::printf("reports under %s\n", a.out_dir.c_str());
  return 0;
}

struct TrainFovArgs {
  std::string data_dir, out_dir;
  dd::FovTrainConfig cfg;
};

int cmd_train_fov(TrainFovArgs& a) {
  dd::Dataset data = dd::read_dataset(a.data_dir);
  dd::FovRegressor model(a.cfg.model, dd::derive_seed(a.cfg.seed, 6));
  std::filesystem::create_directories(a.out_dir);
  dd::FovTrainOutput out = dd::train_fov_regressor(model, data, a.cfg, a.out_dir);
  std::printf("final loss %.6f%s\n", out.final_loss,
              out.degenerate_fov_distribution ? " (single-FOV dataset)" : "");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic-data diffusion pipeline for metric depth"};
  app.set_version_flag("--version", diffdepth::kVersion);
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Render a procedural RGB-D dataset");
  g->add_option("--regime", gen.spec.regime_mix, "indoor | outdoor | mixed");
  g->add_option("--n", gen.spec.n, "sample count")->required();
  g->add_option("--resolution", gen.resolution, "HxW (default 64x64)");
  g->add_option("--fov-range", gen.fov_range, "lo,hi degrees (default 55,85)");
  g->add_option("--seed", gen.spec.seed, "base seed");
  g->add_option("--workers", gen.spec.workers, "render threads");
  g->add_option("--out", gen.out, "output directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a denoiser on a dataset");
  t->add_option("--config", tr.config_file, "JSON training config");
  t->add_option("--data", tr.data_dir, "dataset directory")->required();
  t->add_option("--out", tr.out_dir, "output directory")->required();
  t->add_option("--resume", tr.resume, "checkpoint to fine-tune from");
  t->add_option("--steps", tr.steps, "override steps");
  t->add_option("--batch-size", tr.batch_size, "override batch size");
  t->add_option("--workers", tr.workers, "override workers");
  t->add_option("--seed", tr.seed, "override seed");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint directory")
      ->required();
  e->add_option("--data", ev.data_dir, "dataset directory")->required();
  e->add_option("--out", ev.out_dir, "output directory")->required();
  e->add_option("--steps", ev.steps, "denoising steps (default 8)");
  e->add_option("--samples", ev.samples, "samples to average (default 1)");
  e->add_option("--seed", ev.seed, "inference seed");
  e->add_option("--min-depth", ev.min_depth, "protocol floor, meters");
  e->add_option("--max-depth", ev.max_depth, "protocol cap, meters");
  e->add_option("--workers", ev.workers, "eval threads");

  InferArgs in;
  auto* i = app.add_subcommand("infer", "Predict depth for one RGB image");
  i->add_option("--checkpoint", in.checkpoint, "checkpoint directory")
      ->required();
  i->add_option("--rgb", in.rgb_file, "input PPM")->required();
  i->add_option("--out", in.out_dir, "output directory")->required();
  i->add_option("--fov-deg", in.fov_deg, "vertical FOV in degrees");
  i->add_flag("--estimate-fov", in.estimate_fov,
              "estimate the FOV signal with a regressor");
  i->add_option("--regressor", in.regressor, "FOV regressor checkpoint");
  i->add_option("--steps", in.steps, "denoising steps (default 8)");
  i->add_option("--samples", in.samples, "samples to average (default 8)");
  i->add_option("--seed", in.seed, "inference seed");

  AblateArgs ab;
  auto* b = app.add_subcommand("ablate", "Run a paired ablation experiment");
  std::string names;
  for (const auto& n : diffdepth::ablation_names()) names += n + " ";
  b->add_option("--name", ab.name, "one of: " + names)->required();
  b->add_option("--config", ab.config_file, "JSON ablation config");
  b->add_option("--out", ab.out_dir, "report directory");
  b->add_option("--cache-dir", ab.cache_dir, "trained-model cache");
  b->add_option("--seed", ab.seed, "override seed");

  TrainFovArgs tf;
  auto* f = app.add_subcommand("train-fov", "Train the FOV regressor");
  f->add_option("--data", tf.data_dir, "dataset directory")->required();
  f->add_option("--out", tf.out_dir, "output directory")->required();
  f->add_option("--steps", tf.cfg.steps, "training steps (default 800)");
  f->add_option("--batch-size", tf.cfg.batch_size, "batch size (default 8)");
  f->add_option("--lr", tf.cfg.lr, "learning rate (default 3e-4)");
  f->add_option("--seed", tf.cfg.seed, "seed");

  try {
    app.parse(argc, argv);
    if (*g) return cmd_generate(gen);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*i) return cmd_infer(in);
    if (*b) return cmd_ablate(ab);
    if (*f) return cmd_train_fov(tf);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  } catch (const diffdepth::UsageError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return 1;
  } catch (const diffdepth::NumericError& err) {
    std::cerr << "numeric error: " << err.what() << "\n";
    return 3;
  } catch (const diffdepth::DataError& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 0;
}
