#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <vector>

#include "diffdepth/checkpoint.hpp"
#include "diffdepth/datagen.hpp"
#include "diffdepth/loss_grad.hpp"
#include "diffdepth/training.hpp"
#include "test_util.hpp"

using namespace diffdepth;

namespace {

RenderedSample flat_sample(int h, int w, double fov_deg, std::uint64_t seed,
                           int n_invalid = 0) {
  Rng rng(seed);
  RenderedSample s;
  s.rgb = testutil::random_image(rng, h, w);
  s.depth.values = testutil::random_grid(rng, h, w, 1.0f, 9.0f);
  s.depth.valid = make_mask(h, w);
  for (int k = 0; k < n_invalid; ++k) {
    const int i = static_cast<int>(rng.uniform_int(h));
    const int j = static_cast<int>(rng.uniform_int(w));
    s.depth.valid(i, j) = false;
    s.depth.values(i, j) = 0.0f;
  }
  s.camera = {h, w, fov_deg};
  s.regime = Regime::indoor;
  s.scene_id = "flat";
  s.render_seed = seed;
  return s;
}

TrainConfig plain_config() {
  TrainConfig cfg;
  cfg.denoiser.base_channels = 4;
  cfg.denoiser.depth_levels = 2;
  cfg.denoiser.embed_dim = 8;
  cfg.codec = {DepthEncoding::log, 0.5, 12.0};
  cfg.p_flip = 0.0;
  cfg.p_fov_aug = 0.0;
  cfg.p_unroll = 0.0;
  cfg.batch_size = 1;
  return cfg;
}

// Mirrors the documented per-example noise stream: row by row.
Grid replay_normals(Rng& rng, int h, int w) {
  Grid g(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) g(i, j) = static_cast<float>(rng.normal());
  return g;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("config validation") {
  CHECK_NOTHROW(plain_config().validate());
  TrainConfig cfg = plain_config();
  cfg.p_flip = 1.5;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = plain_config();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = plain_config();
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = plain_config();
  cfg.workers = 0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
}

TEST_CASE("example preparation without augmentation") {
  RenderedSample s = flat_sample(16, 16, 70.0, 1, 5);
  TrainConfig cfg = plain_config();
  TrainingExample ex = make_training_example(s, cfg, 42);

  CHECK((ex.loss_mask == s.depth.valid).all());
  Grid expected = encode(infill_nearest(s.depth), cfg.codec).values;
  CHECK(testutil::bitwise_equal(ex.x_target, expected));
  CHECK(testutil::bitwise_equal(ex.rgb, s.rgb));
  CHECK(ex.fov_cond == fov_to_cond(70.0));
}

TEST_CASE("flip reverses columns exactly") {
  RenderedSample s = flat_sample(12, 16, 70.0, 2);
  TrainConfig cfg = plain_config();
  TrainingExample base = make_training_example(s, cfg, 7);
  cfg.p_flip = 1.0;
  TrainingExample flipped = make_training_example(s, cfg, 7);

  Grid r_rev = base.rgb.r.rowwise().reverse();
  CHECK(testutil::bitwise_equal(flipped.rgb.r, r_rev));
  Grid x_rev = base.x_target.rowwise().reverse();
  CHECK(testutil::bitwise_equal(flipped.x_target, x_rev));
  CHECK(flipped.fov_cond == base.fov_cond);
}

TEST_CASE("fov augmentation reaches the conditioning signal") {
  RenderedSample s = flat_sample(16, 16, 90.0, 3);
  TrainConfig cfg = plain_config();
  cfg.p_fov_aug = 1.0;
  cfg.fov_aug.scale_min = 0.5;
  cfg.fov_aug.scale_max = 0.5;
  TrainingExample ex = make_training_example(s, cfg, 9);
  // tan(theta'/2) = 0.5 * tan(45 deg)
  CHECK(ex.fov_cond == doctest::Approx(0.5).epsilon(1e-9));

  cfg.fov_aug.scale_min = 1.0;
  cfg.fov_aug.scale_max = 1.0;
  TrainingExample noop = make_training_example(s, cfg, 9);
  CHECK(testutil::bitwise_equal(noop.rgb, s.rgb));
  CHECK(noop.fov_cond == fov_to_cond(90.0));
}

TEST_CASE("losing every valid pixel to the crop is an error") {
  RenderedSample s = flat_sample(16, 16, 70.0, 4);
  s.depth.valid.setConstant(false);
  s.depth.values.setConstant(0.0f);
  s.depth.valid(0, 0) = true;
  s.depth.values(0, 0) = 5.0f;
  TrainConfig cfg = plain_config();
  cfg.p_fov_aug = 1.0;
  cfg.fov_aug.scale_min = 0.5;
  cfg.fov_aug.scale_max = 0.5;
  CHECK_THROWS_AS(make_training_example(s, cfg, 5), DataError);
}

TEST_CASE("first-step loss matches the closed form at init") {
  TrainConfig cfg = plain_config();
  RenderedSample s = flat_sample(16, 16, 70.0, 6);
  TrainingExample ex = make_training_example(s, cfg, 11);

  Denoiser model(cfg.denoiser, 13);
  nn::Adam<float> opt(cfg.lr);
  const std::uint64_t step_seed = 99;
  const double loss = train_step(model, opt, {ex}, step_seed, cfg);

  const CosineSchedule sched;
  Rng rng(derive_seed(step_seed, 7, 0));
  const double t = rng.uniform();
  Grid eps = replay_normals(rng, 16, 16);
  DiffusionState state = forward_noise(ex.x_target, eps, t, sched);

  // The fresh model's output is exactly zero, so the step loss is the masked
  // loss of a zero prediction, bit for bit.
  nn::Tensor<float> zero_out(1, 16, 16);
  const double expected =
      masked_loss_grad<float>(Parameterization::v, ex.x_target, eps, state.z,
                              zero_out, ex.loss_mask, t, sched)
          .loss;
  CHECK(loss == expected);

  // The grid-space form recovers x_hat in float, so it only agrees to
  // rounding, not bitwise.
  PredictionTriple pred = recover_x_eps(state, make_grid(16, 16), sched);
  const double grid_form = loss_truncated_snr_l1(ex.x_target, eps, pred,
                                                 ex.loss_mask);
  CHECK(loss == doctest::Approx(grid_form).epsilon(1e-6));

  const auto [a, sg] = sched.eval(t);
  Grid v = v_target(ex.x_target, eps, t, sched);
  double mean_v = 0.0;
  std::int64_t n = 0;
  for (int j = 0; j < 16; ++j)
    for (int i = 0; i < 16; ++i)
      if (ex.loss_mask(i, j)) {
        mean_v += std::abs(static_cast<double>(v(i, j)));
        ++n;
      }
  mean_v /= static_cast<double>(n);
  CHECK(loss == doctest::Approx(std::max(a, sg) * mean_v).epsilon(1e-6));
}

TEST_CASE("infilled pixels never reach the loss") {
  TrainConfig cfg = plain_config();
  RenderedSample s = flat_sample(16, 16, 70.0, 7, 20);
  TrainingExample ex = make_training_example(s, cfg, 15);
  REQUIRE_FALSE(ex.loss_mask.all());

  TrainingExample tampered = ex;
  for (int j = 0; j < 16; ++j)
    for (int i = 0; i < 16; ++i)
      if (!tampered.loss_mask(i, j))
        tampered.x_target(i, j) = -tampered.x_target(i, j) * 0.5f + 0.1f;

  Denoiser m1(cfg.denoiser, 21);
  Denoiser m2(cfg.denoiser, 21);
  nn::Adam<float> o1(cfg.lr), o2(cfg.lr);
  const double l1 = train_step(m1, o1, {ex}, 123, cfg);
  const double l2 = train_step(m2, o2, {tampered}, 123, cfg);
  CHECK(l1 == l2);

  // sanity: the same edit at a masked-in pixel does move the loss
  TrainingExample moved = ex;
  for (int j = 0; j < 16; ++j) {
    if (moved.loss_mask(0, j)) {
      moved.x_target(0, j) = -moved.x_target(0, j) * 0.5f + 0.3f;
      break;
    }
  }
  Denoiser m3(cfg.denoiser, 21);
  nn::Adam<float> o3(cfg.lr);
  const double l3 = train_step(m3, o3, {moved}, 123, cfg);
  CHECK(l3 != l1);
}

TEST_CASE("step unrolling path runs and stays finite") {
  TrainConfig cfg = plain_config();
  cfg.p_unroll = 1.0;
  cfg.batch_size = 2;
  RenderedSample s = flat_sample(16, 16, 70.0, 8);
  TrainingExample ex = make_training_example(s, cfg, 17);
  Denoiser model(cfg.denoiser, 23);
  nn::Adam<float> opt(cfg.lr);
  for (std::uint64_t step = 0; step < 3; ++step) {
    const double loss = train_step(model, opt, {ex, ex}, step, cfg);
    CHECK(std::isfinite(loss));
    CHECK(loss >= 0.0);
  }
}

TEST_CASE("a tiny model overfits a tiny set") {
  GenSpec spec;
  spec.regime_mix = "indoor";
  spec.n = 8;
  spec.height = 16;
  spec.width = 16;
  spec.seed = 31;
  std::vector<RenderedSample> samples = generate_samples(spec);

  TrainConfig cfg = plain_config();
  cfg.lr = 3e-4;
  cfg.batch_size = 4;
  std::vector<TrainingExample> pool;
  for (std::size_t i = 0; i < samples.size(); ++i)
    pool.push_back(make_training_example(samples[i], cfg, 100 + i));

  Denoiser model(cfg.denoiser, 37);
  nn::Adam<float> opt(cfg.lr);
  std::vector<double> losses;
  Rng pick(38);
  for (int step = 0; step < 400; ++step) {
    std::vector<TrainingExample> batch;
    for (int b = 0; b < cfg.batch_size; ++b)
      batch.push_back(pool[pick.uniform_int(pool.size())]);
    losses.push_back(train_step(model, opt, batch, 1000 + step, cfg));
  }
  const double first = std::accumulate(losses.begin(), losses.begin() + 10, 0.0) / 10.0;
  const double last = std::accumulate(losses.end() - 10, losses.end(), 0.0) / 10.0;
  CHECK(last < 0.8 * first);
}

TEST_CASE("training is deterministic and worker-invariant") {
  GenSpec spec;
  spec.n = 3;
  spec.height = 16;
  spec.width = 16;
  spec.seed = 41;
  Dataset data{generate_samples(spec), {DepthEncoding::log, 0.5, 12.0}};

  TrainConfig cfg = plain_config();
  cfg.codec = data.codec_hint;
  cfg.steps = 5;
  cfg.batch_size = 2;
  cfg.seed = 43;

  Denoiser a(cfg.denoiser, 47);
  train_denoiser(a, data, cfg);
  Denoiser b(cfg.denoiser, 47);
  train_denoiser(b, data, cfg);
  cfg.workers = 2;
  Denoiser c(cfg.denoiser, 47);
  train_denoiser(c, data, cfg);

  std::vector<float> pa, pb, pc;
  auto dump = [](const Denoiser& m, std::vector<float>& out) {
    m.for_each_param([&](const std::string&, const float* p, const float*,
                         std::size_t n) { out.insert(out.end(), p, p + n); });
  };
  dump(a, pa);
  dump(b, pb);
  dump(c, pc);
  CHECK(pa == pb);
  CHECK(pa == pc);
}

TEST_CASE("train_denoiser writes a log and a checkpoint") {
  testutil::TempDir dir("trainout");
  GenSpec spec;
  spec.n = 2;
  spec.height = 16;
  spec.width = 16;
  spec.seed = 51;
  Dataset data{generate_samples(spec), {DepthEncoding::log, 0.5, 12.0}};
  TrainConfig cfg = plain_config();
  cfg.codec = data.codec_hint;
  cfg.steps = 2;
  Denoiser bare(cfg.denoiser, 1);
  TrainOutput out = train_denoiser(bare, data, cfg);
  CHECK(out.steps_run == 2);

  Denoiser model(cfg.denoiser, 1);
  TrainOutput logged = train_denoiser(model, data, cfg, dir.path);
  CHECK(std::isfinite(logged.final_loss));
  CHECK(std::filesystem::exists(dir.path / "train_log.jsonl"));
  LoadedCheckpoint loaded = load_checkpoint(dir.path / "checkpoint");
  CHECK(loaded.codec.d_max == 12.0);
  CHECK(loaded.extra.at("steps") == 2);
}

TEST_CASE("checkpoint roundtrip preserves the model bit for bit") {
  testutil::TempDir dir("ckpt");
  DenoiserConfig dc = plain_config().denoiser;
  Denoiser model(dc, 61);
  Rng rng(62);
  model.for_each_param([&](const std::string&, float* p, float*,
                           std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
      p[i] = static_cast<float>(rng.normal() * 0.05);
  });
  DepthCodecConfig codec{DepthEncoding::linear, 0.5, 40.0};
  save_checkpoint(dir.path, model, codec, {{"note", "roundtrip"}});

  LoadedCheckpoint loaded = load_checkpoint(dir.path);
  CHECK(loaded.codec.mode == DepthEncoding::linear);
  CHECK(loaded.codec.d_max == 40.0);
  CHECK(loaded.extra.at("note") == "roundtrip");

  std::vector<float> pa, pb;
  model.for_each_param([&](const std::string&, const float* p, const float*,
                           std::size_t n) { pa.insert(pa.end(), p, p + n); });
  loaded.model.for_each_param([&](const std::string&, const float* p,
                                  const float*, std::size_t n) {
    pb.insert(pb.end(), p, p + n);
  });
  CHECK(pa == pb);

  Grid z = testutil::random_grid(rng, 16, 16);
  Image3 im = testutil::random_image(rng, 16, 16);
  CHECK(testutil::bitwise_equal(model.denoise(z, im, 0.7, 0.4),
                                loaded.model.denoise(z, im, 0.7, 0.4)));
}

TEST_CASE("checkpoint tampering is detected") {
  testutil::TempDir dir("ckpt_tamper");
  Denoiser model(plain_config().denoiser, 63);
  save_checkpoint(dir.path, model, plain_config().codec);

  const auto params = dir.path / "params.bin";
  std::string bytes = testutil::slurp(params);
  REQUIRE(!bytes.empty());
  bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x40);
  testutil::spit(params, bytes);
  CHECK_THROWS_AS(load_checkpoint(dir.path), DataError);
}

TEST_CASE("checkpoint version gate") {
  testutil::TempDir dir("ckpt_version");
  Denoiser model(plain_config().denoiser, 64);
  save_checkpoint(dir.path, model, plain_config().codec);
  const auto meta_path = dir.path / "metadata.json";
  nlohmann::json meta = nlohmann::json::parse(testutil::slurp(meta_path));
  meta["format_version"] = kCheckpointVersion + 1;
  testutil::spit(meta_path, meta.dump(2));
  CHECK_THROWS_AS(load_checkpoint(dir.path), DataError);
  CHECK_THROWS_AS(load_checkpoint(dir.path / "missing"), DataError);
}

TEST_CASE("a v oracle pushes inference back to the encoded target") {
  GenSpec spec;
  spec.n = 1;
  spec.height = 16;
  spec.width = 16;
  spec.seed = 71;
  RenderedSample s = generate_samples(spec)[0];
  DepthCodecConfig codec{DepthEncoding::log, 0.5, 12.0};
  Grid x_true = encode(infill_nearest(s.depth), codec).values;

  const CosineSchedule sched;
  DenoiserFn oracle = [&](const Grid& z, const Image3&,
                          std::optional<double>, double t) {
    const auto [a, sg] = sched.eval(t);
    Grid v = (static_cast<float>(a) * z - x_true) / static_cast<float>(sg);
    return v;
  };

  InferOptions opt;
  opt.steps = 4;
  opt.n_samples = 2;
  opt.seed = 1;
  DepthMap pred = infer_depth(oracle, Parameterization::v, s.rgb,
                              fov_to_cond(s.camera.vertical_fov_deg), codec,
                              opt);
  DepthMap expected = decode(x_true, codec);
  CHECK(pred.valid.all());
  float worst = 0.0f;
  for (int j = 0; j < 16; ++j)
    for (int i = 0; i < 16; ++i)
      worst = std::max(worst, std::abs(pred.values(i, j) -
                                       expected.values(i, j)) /
                                  expected.values(i, j));
  CHECK(worst < 1e-4f);
}

TEST_CASE("inference is deterministic and matches a manual sample") {
  TrainConfig cfg = plain_config();
  Denoiser model(cfg.denoiser, 81);
  Rng rng(82);
  model.for_each_param([&](const std::string&, float* p, float*,
                           std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
      p[i] = static_cast<float>(rng.normal() * 0.05);
  });
  Image3 im = testutil::random_image(rng, 16, 16);
  const double cond = 0.8;

  InferOptions opt;
  opt.steps = 2;
  opt.n_samples = 1;
  opt.seed = 7;
  DepthMap a = infer_depth(model, im, cond, cfg.codec, opt);
  DepthMap b = infer_depth(model, im, cond, cfg.codec, opt);
  CHECK(testutil::bitwise_equal(a.values, b.values));

  DenoiserFn fn = [&](const Grid& z, const Image3& rgb,
                      std::optional<double> fc, double t) {
    return model.denoise(z, rgb, fc, t);
  };
  const CosineSchedule sched;
  Grid sample = ddpm_sample(fn, im, cond, opt.steps,
                            derive_seed(opt.seed, 11, 0), sched,
                            Parameterization::v);
  DepthMap manual = decode(sample, cfg.codec);
  CHECK(testutil::bitwise_equal(a.values, manual.values));

  opt.seed = 8;
  DepthMap c = infer_depth(model, im, cond, cfg.codec, opt);
  CHECK_FALSE(testutil::bitwise_equal(a.values, c.values));
}

TEST_CASE("inference guards") {
  TrainConfig cfg = plain_config();
  Denoiser cond_model(cfg.denoiser, 91);
  DenoiserConfig un = cfg.denoiser;
  un.fov_conditioning = false;
  Denoiser uncond_model(un, 91);
  Rng rng(92);
  Image3 im = testutil::random_image(rng, 16, 16);

  InferOptions opt;
  opt.steps = 0;
  CHECK_THROWS_AS(infer_depth(cond_model, im, 0.8, cfg.codec, opt), UsageError);
  opt.steps = 1;
  opt.n_samples = 0;
  CHECK_THROWS_AS(infer_depth(cond_model, im, 0.8, cfg.codec, opt), UsageError);
  opt.n_samples = 1;
  CHECK_THROWS_AS(infer_depth(cond_model, im, std::nullopt, cfg.codec, opt),
                  UsageError);
  CHECK_NOTHROW(infer_depth(uncond_model, im, 0.8, cfg.codec, opt));
  opt.fov_perturb = 2.0;
  DepthMap p2 = infer_depth(cond_model, im, 0.8, cfg.codec, opt);
  opt.fov_perturb = 1.0;
  DepthMap p1 = infer_depth(cond_model, im, 0.8, cfg.codec, opt);
  CHECK(p1.values.rows() == p2.values.rows());
}

TEST_CASE("dataset evaluation pools by regime") {
  GenSpec spec;
  spec.regime_mix = "indoor";
  spec.n = 3;
  spec.height = 16;
  spec.width = 16;
  spec.seed = 95;
  Dataset data{generate_samples(spec), {DepthEncoding::log, 0.5, 12.0}};

  TrainConfig cfg = plain_config();
  Denoiser model(cfg.denoiser, 96);
  EvalOptions opt;
  opt.infer.steps = 1;
  opt.protocol = {0.5, 12.0};
  SplitReports reports = eval_dataset(model, data, data.codec_hint, opt);
  CHECK(std::isfinite(reports.overall.rel));
  CHECK(reports.overall.n_pixels > 0);
  CHECK(reports.indoor.has_value());
  CHECK_FALSE(reports.outdoor.has_value());

  opt.workers = 2;
  SplitReports again = eval_dataset(model, data, data.codec_hint, opt);
  CHECK(again.overall.rel == reports.overall.rel);
  CHECK(again.overall.rmse == reports.overall.rmse);
}

}  // TEST_SUITE
