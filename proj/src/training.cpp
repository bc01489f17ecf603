#include "diffdepth/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "diffdepth/checkpoint.hpp"
#include "diffdepth/loss_grad.hpp"
#include "diffdepth/threading.hpp"

namespace diffdepth {

void TrainConfig::validate() const {
  denoiser.validate();
  codec.validate();
  fov_aug.validate();
  for (double p : {p_flip, p_fov_aug, p_unroll})
    if (!(p >= 0.0 && p <= 1.0))
      throw UsageError("train: probabilities must lie in [0, 1]");
  if (!(lr > 0.0) || !(fine_tune_lr > 0.0))
    throw UsageError("train: learning rates must be positive");
  if (batch_size < 1 || steps < 0 || fine_tune_steps < 0 || log_every < 1 ||
      workers < 1)
    throw UsageError("train: bad batch_size/steps/log_every/workers");
}

namespace {

Image3 flip_horizontal(const Image3& img) {
  return {img.r.rowwise().reverse(), img.g.rowwise().reverse(),
          img.b.rowwise().reverse()};
}

}  // namespace

TrainingExample make_training_example(const RenderedSample& sample,
                                      const TrainConfig& cfg,
                                      std::uint64_t seed) {
  Rng rng(seed);
  Image3 rgb = sample.rgb;
  DepthMap depth = sample.depth;
  CameraSpec camera = sample.camera;

  if (rng.bernoulli(cfg.p_flip)) {
    rgb = flip_horizontal(rgb);
    // reverse() aliases itself; force the temporaries
    depth.values = depth.values.rowwise().reverse().eval();
    depth.valid = depth.valid.rowwise().reverse().eval();
  }

  const bool apply_aug = rng.bernoulli(cfg.p_fov_aug);
  const double scale = rng.uniform(cfg.fov_aug.scale_min, cfg.fov_aug.scale_max);
  const std::uint64_t pad_seed = rng.next_u64();
  if (apply_aug && scale != 1.0) {
    FovAugmented aug = fov_augment(rgb, depth, camera, scale, pad_seed,
                                   cfg.fov_aug);
    rgb = std::move(aug.rgb);
    depth = std::move(aug.depth);
    camera = aug.camera;
  }

  TrainingExample ex;
  ex.loss_mask = depth.valid;
  if (!depth.valid.any())
    throw DataError("make_training_example: no valid depth after augmentation");
  DepthMap filled = infill_nearest(depth);
  ex.x_target = encode(filled, cfg.codec).values;
  ex.rgb = std::move(rgb);
  ex.fov_cond = fov_to_cond(camera.vertical_fov_deg);
  return ex;
}

namespace {

Grid normal_grid(Rng& rng, int h, int w) {
  Grid g(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) g(i, j) = static_cast<float>(rng.normal());
  return g;
}

}  // namespace

double train_step(Denoiser& model, nn::Adam<float>& opt,
                  const std::vector<TrainingExample>& batch,
                  std::uint64_t step_seed, const TrainConfig& cfg) {
  if (batch.empty()) throw DataError("train_step: empty batch");
  const CosineSchedule sched;
  model.zero_grads();
  double loss_sum = 0.0;

  for (std::size_t k = 0; k < batch.size(); ++k) {
    const TrainingExample& ex = batch[k];
    Rng rng(derive_seed(step_seed, /*stream=*/7, k));
    const int h = static_cast<int>(ex.x_target.rows());
    const int w = static_cast<int>(ex.x_target.cols());
    const double t = rng.uniform();
    const auto [a, s] = sched.eval(t);

    Grid eps = normal_grid(rng, h, w);
    const bool unroll = rng.bernoulli(cfg.p_unroll);
    DiffusionState state = forward_noise(ex.x_target, eps, t, sched);
    Grid eps_target = eps;

    const std::optional<double> fov =
        cfg.denoiser.fov_conditioning ? std::optional<double>(ex.fov_cond)
                                      : std::nullopt;

    if (unroll) {
      // Gradient-stopped pass; re-noise the prediction with fresh eps'.
      Denoiser::Cache cache;
      nn::Tensor<float> out =
          model.forward(Denoiser::pack_input(state.z, ex.rgb), t, fov, cache);
      Grid out_grid(h, w);
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) out_grid(i, j) = out.at(0, i, j);
      PredictionTriple pred =
          cfg.denoiser.parameterization == Parameterization::v
              ? recover_x_eps(state, out_grid, sched)
              : recover_from_eps(state, out_grid, sched);
      Grid eps2 = normal_grid(rng, h, w);
      state = forward_noise(pred.x_hat, eps2, t, sched);
      eps_target = eps2;
    }

    Denoiser::Cache cache;
    nn::Tensor<float> out =
        model.forward(Denoiser::pack_input(state.z, ex.rgb), t, fov, cache);
    MaskedLossGrad<float> lg =
        masked_loss_grad<float>(cfg.denoiser.parameterization, ex.x_target,
                                eps_target, state.z, out, ex.loss_mask, t,
                                sched);
    if (!std::isfinite(lg.loss))
      throw NumericError("train_step: non-finite loss at t=" +
                         std::to_string(t));
    loss_sum += lg.loss;
    model.backward(lg.dout, cache);
  }

  const float inv_b = 1.0f / static_cast<float>(batch.size());
  model.for_each_param([&](const std::string&, float*, float* g,
                           std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) g[i] *= inv_b;
  });

  opt.begin_step();
  std::size_t total = 0;
  model.for_each_param(
      [&](const std::string&, float* p, float* g, std::size_t n) {
        opt.update(p, g, n);
        total += n;
      });
  opt.end_step(total);
  return loss_sum / static_cast<double>(batch.size());
}

TrainOutput train_denoiser(Denoiser& model, const Dataset& data,
                           const TrainConfig& cfg,
                           const std::filesystem::path& out_dir) {
  cfg.validate();
  if (data.samples.empty()) throw DataError("train: empty dataset");

  std::ofstream log;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log.open(out_dir / "train_log.jsonl", std::ios::trunc);
    if (!log) throw DataError("train: cannot write log in " + out_dir.string());
  }

  nn::Adam<float> opt(cfg.lr);
  const auto start = std::chrono::steady_clock::now();
  double loss = 0.0;
  const int total_steps = cfg.steps + cfg.fine_tune_steps;

  for (int step = 0; step < total_steps; ++step) {
    if (step == cfg.steps) opt.set_lr(cfg.fine_tune_lr);

    std::vector<TrainingExample> batch(cfg.batch_size);
    parallel_for(0, cfg.batch_size, cfg.workers, [&](int slot) {
      const std::uint64_t id =
          static_cast<std::uint64_t>(step) * cfg.batch_size + slot;
      Rng pick(derive_seed(cfg.seed, /*stream=*/8, id));
      const std::size_t idx = pick.uniform_int(data.samples.size());
      batch[slot] = make_training_example(
          data.samples[idx], cfg, derive_seed(cfg.seed, /*stream=*/9, id));
    });

    loss = train_step(model, opt, batch,
                      derive_seed(cfg.seed, /*stream=*/10, step), cfg);

    if (log && (step % cfg.log_every == 0 || step + 1 == total_steps)) {
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - start)
                          .count();
      log << "{\"step\":" << step << ",\"loss\":" << loss
          << ",\"lr\":" << opt.lr() << ",\"elapsed_ms\":" << ms << "}\n";
      log.flush();
    }
  }

  if (!out_dir.empty())
    save_checkpoint(out_dir / "checkpoint", model, cfg.codec,
                    {{"steps", total_steps},
                     {"final_loss", loss},
                     {"seed", cfg.seed},
                     {"lr", cfg.lr}});
  return {loss, total_steps};
}

DepthMap infer_depth(const DenoiserFn& fn, Parameterization param,
                     const Image3& rgb, std::optional<double> fov_cond,
                     const DepthCodecConfig& codec, const InferOptions& opt) {
  if (opt.steps < 1 || opt.n_samples < 1)
    throw UsageError("infer: steps and n_samples must be >= 1");
  const CosineSchedule sched;
  std::optional<double> cond = fov_cond;
  if (cond) cond = perturb_fov_cond(*cond, opt.fov_perturb);

  std::vector<Grid> samples;
  samples.reserve(opt.n_samples);
  for (int k = 0; k < opt.n_samples; ++k)
    samples.push_back(ddpm_sample(fn, rgb, cond, opt.steps,
                                  derive_seed(opt.seed, /*stream=*/11, k),
                                  sched, param));
  return decode(average_samples(samples), codec);
}

DepthMap infer_depth(const Denoiser& model, const Image3& rgb,
                     std::optional<double> fov_cond,
                     const DepthCodecConfig& codec, const InferOptions& opt) {
  const bool conditioned = model.config().fov_conditioning;
  if (conditioned && !fov_cond)
    throw UsageError("infer: this model requires a fov condition");
  DenoiserFn fn = [&model](const Grid& z, const Image3& im,
                           std::optional<double> fc, double t) {
    return model.denoise(z, im, fc, t);
  };
  return infer_depth(fn, model.config().parameterization, rgb,
                     conditioned ? fov_cond : std::nullopt, codec, opt);
}

SplitReports eval_dataset(const Denoiser& model, const Dataset& data,
                          const DepthCodecConfig& codec,
                          const EvalOptions& opt) {
  if (data.samples.empty()) throw DataError("eval: empty dataset");
  std::vector<Grid> preds(data.samples.size());
  parallel_for(0, static_cast<int>(data.samples.size()), opt.workers,
               [&](int i) {
                 const RenderedSample& s = data.samples[i];
                 InferOptions io = opt.infer;
                 io.seed = derive_seed(opt.infer.seed, /*stream=*/12, i);
                 preds[i] =
                     infer_depth(model, s.rgb,
                                 fov_to_cond(s.camera.vertical_fov_deg), codec,
                                 io)
                         .values;
               });

  MetricAccumulator overall(opt.protocol);
  MetricAccumulator indoor(opt.protocol), outdoor(opt.protocol);
  bool any_indoor = false, any_outdoor = false;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const RenderedSample& s = data.samples[i];
    overall.add(preds[i], s.depth);
    if (s.regime == Regime::indoor) {
      indoor.add(preds[i], s.depth);
      any_indoor = true;
    } else {
      outdoor.add(preds[i], s.depth);
      any_outdoor = true;
    }
  }
  SplitReports out;
  out.overall = overall.finalize();
  if (any_indoor) out.indoor = indoor.finalize();
  if (any_outdoor) out.outdoor = outdoor.finalize();
  return out;
}

}  // namespace diffdepth
