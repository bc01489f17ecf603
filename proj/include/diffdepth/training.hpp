#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "diffdepth/camera.hpp"
#include "diffdepth/dataset_io.hpp"
#include "diffdepth/denoiser.hpp"
#include "diffdepth/depth_codec.hpp"
#include "diffdepth/metrics.hpp"
#include "diffdepth/nn/adam.hpp"

namespace diffdepth {

struct TrainConfig {
  DenoiserConfig denoiser;
  DepthCodecConfig codec;
  FovAugConfig fov_aug;
  double p_flip = 0.5;
  double p_fov_aug = 0.5;
  double p_unroll = 0.5;
  double lr = 1e-4;
  double fine_tune_lr = 3e-5;
  int fine_tune_steps = 0;
  int batch_size = 8;
  int steps = 2000;
  int log_every = 50;
  int workers = 1;  // affects example preparation only, never results
  std::uint64_t seed = 0;

  void validate() const;
};

// One augmented, encoded training example. loss_mask is the validity BEFORE
// infilling: infilled pixels feed the network input but never the loss.
struct TrainingExample {
  Image3 rgb;
  Grid x_target;  // encoded depth, infilled
  Mask loss_mask;
  double fov_cond = 0.0;  // tan(theta'/2) after augmentation
};

// flip(p_flip) -> fov_augment(p_fov_aug, scale ~ U[min,max]) ->
// infill_nearest -> encode. All randomness comes from `seed`.
TrainingExample make_training_example(const RenderedSample& sample,
                                      const TrainConfig& cfg,
                                      std::uint64_t seed);

// One optimizer step over a prepared batch: per-example t ~ U(0,1) and eps,
// optional step-unrolled denoising (the unrolled x_hat is gradient-stopped;
// loss targets stay the true x_target and the fresh eps'), masked loss,
// gradient accumulation, Adam update. Returns the mean batch loss. Throws
// NumericError on a non-finite loss.
//
// Example k draws from Rng(derive_seed(step_seed, 7, k)), in order: t via
// uniform(), eps via normal() filled row by row, the unroll coin via
// bernoulli(p_unroll), then (only when unrolling) eps' the same way as eps.
double train_step(Denoiser& model, nn::Adam<float>& opt,
                  const std::vector<TrainingExample>& batch,
                  std::uint64_t step_seed, const TrainConfig& cfg);

struct TrainOutput {
  double final_loss = 0.0;
  int steps_run = 0;
};

// Full loop: seeded batch selection, train_step, JSONL loss log (and a final
// checkpoint) under out_dir when given. An optional fine-tune phase continues
// at fine_tune_lr. Serial reruns with the same seed are bit-identical.
TrainOutput train_denoiser(Denoiser& model, const Dataset& data,
                           const TrainConfig& cfg,
                           const std::filesystem::path& out_dir = {});

struct InferOptions {
  int steps = 8;
  int n_samples = 1;
  std::uint64_t seed = 0;
  double fov_perturb = 1.0;  // multiplies the conditioning signal
};

// Samples n_samples times, averages in encoded space, decodes. The callable
// form takes any DenoiserFn (useful for oracle pipelines).
DepthMap infer_depth(const DenoiserFn& fn, Parameterization param,
                     const Image3& rgb, std::optional<double> fov_cond,
                     const DepthCodecConfig& codec, const InferOptions& opt);

// Model form: fov_cond is required by conditioned models (UsageError when
// missing) and dropped before the call for unconditioned ones, so drivers may
// pass every sample's fov uniformly.
DepthMap infer_depth(const Denoiser& model, const Image3& rgb,
                     std::optional<double> fov_cond,
                     const DepthCodecConfig& codec, const InferOptions& opt);

struct EvalOptions {
  InferOptions infer;
  EvalProtocol protocol;
  int workers = 1;
};

struct SplitReports {
  MetricReport overall;
  std::optional<MetricReport> indoor;
  std::optional<MetricReport> outdoor;
};

// Runs inference per sample (fov_cond from each sample's camera) and pools
// pixels overall and per regime.
SplitReports eval_dataset(const Denoiser& model, const Dataset& data,
                          const DepthCodecConfig& codec,
                          const EvalOptions& opt);

}  // namespace diffdepth
