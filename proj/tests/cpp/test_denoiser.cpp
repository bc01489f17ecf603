#include <doctest.h>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "diffdepth/denoiser.hpp"
#include "diffdepth/loss_grad.hpp"
#include "diffdepth/rng.hpp"
#include "test_util.hpp"

using namespace diffdepth;

namespace {

DenoiserConfig tiny_config(bool conditioned = true) {
  DenoiserConfig cfg;
  cfg.base_channels = 4;
  cfg.depth_levels = 2;
  cfg.embed_dim = 8;
  cfg.fov_conditioning = conditioned;
  return cfg;
}

template <typename T>
void randomize_params(DenoiserT<T>& model, std::uint64_t seed) {
  Rng rng(seed);
  model.for_each_param([&](const std::string&, T* p, T*, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
      p[i] = static_cast<T>(rng.normal() * 0.05);
  });
}

template <typename T>
std::vector<T> dump_params(const DenoiserT<T>& model) {
  std::vector<T> out;
  model.for_each_param(
      [&](const std::string&, const T* p, const T*, std::size_t n) {
        out.insert(out.end(), p, p + n);
      });
  return out;
}

}  // namespace

TEST_SUITE("denoiser") {

TEST_CASE("config validation") {
  CHECK_NOTHROW(tiny_config().validate());
  DenoiserConfig cfg = tiny_config();
  cfg.base_channels = 1;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = tiny_config();
  cfg.depth_levels = 1;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg.depth_levels = 7;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = tiny_config();
  cfg.embed_dim = 7;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg.embed_dim = 2;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  CHECK(DenoiserConfig{}.downsample_factor() == 4);
  CHECK(DenoiserConfig{}.channels_at(2) == 128);
}

TEST_CASE("fresh model maps every input to exactly zero") {
  Denoiser model(tiny_config(), 11);
  Rng rng(12);
  Grid z = testutil::random_grid(rng, 16, 16);
  Image3 rgb = testutil::random_image(rng, 16, 16);
  Grid out = model.denoise(z, rgb, 0.7, 0.3);
  CHECK((out == 0.0f).all());
  Grid out2 = model.denoise(z, rgb, 0.2, 0.9);
  CHECK((out2 == 0.0f).all());
}

TEST_CASE("resolution must divide the downsample factor") {
  DenoiserConfig cfg = tiny_config();
  cfg.depth_levels = 3;  // factor 4
  Denoiser model(cfg, 1);
  Rng rng(2);
  auto run = [&](int h, int w) {
    Grid z = testutil::random_grid(rng, h, w);
    Image3 rgb = testutil::random_image(rng, h, w);
    return model.denoise(z, rgb, 0.5, 0.5);
  };
  CHECK_NOTHROW(run(32, 32));
  CHECK_NOTHROW(run(16, 24));
  CHECK_THROWS_AS(run(50, 50), DataError);
  CHECK_THROWS_AS(run(4, 4), DataError);  // below 2x factor
}

TEST_CASE("non-finite inputs are rejected") {
  Denoiser model(tiny_config(), 1);
  Rng rng(3);
  Grid z = testutil::random_grid(rng, 8, 8);
  Image3 rgb = testutil::random_image(rng, 8, 8);
  Grid bad = z;
  bad(3, 3) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(model.denoise(bad, rgb, 0.5, 0.5), NumericError);
  Image3 bad_rgb = rgb;
  bad_rgb.g(0, 0) = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(model.denoise(z, bad_rgb, 0.5, 0.5), NumericError);
  CHECK_THROWS_AS(model.denoise(z, rgb, 0.5, 1.5), DataError);
}

TEST_CASE("conditioning mismatch fails loudly both ways") {
  Denoiser cond_model(tiny_config(true), 1);
  Denoiser uncond_model(tiny_config(false), 1);
  Rng rng(4);
  Grid z = testutil::random_grid(rng, 8, 8);
  Image3 rgb = testutil::random_image(rng, 8, 8);
  CHECK_THROWS_AS(cond_model.denoise(z, rgb, std::nullopt, 0.5), UsageError);
  CHECK_THROWS_AS(uncond_model.denoise(z, rgb, 1.0, 0.5), UsageError);
  CHECK_NOTHROW(uncond_model.denoise(z, rgb, std::nullopt, 0.5));
  const double bad = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(cond_model.denoise(z, rgb, bad, 0.5), NumericError);
}

TEST_CASE("construction is deterministic in the seed") {
  Denoiser a(tiny_config(), 77);
  Denoiser b(tiny_config(), 77);
  Denoiser c(tiny_config(), 78);
  CHECK(dump_params(a) == dump_params(b));
  CHECK(dump_params(a) != dump_params(c));

  randomize_params(a, 5);
  randomize_params(b, 5);
  Rng rng(6);
  Grid z = testutil::random_grid(rng, 16, 16);
  Image3 rgb = testutil::random_image(rng, 16, 16);
  Grid oa = a.denoise(z, rgb, 0.5, 0.3);
  Grid ob = b.denoise(z, rgb, 0.5, 0.3);
  CHECK(testutil::bitwise_equal(oa, ob));
}

TEST_CASE("output responds to the fov condition and to t") {
  Denoiser model(tiny_config(), 21);
  randomize_params(model, 22);
  Rng rng(23);
  Grid z = testutil::random_grid(rng, 16, 16);
  Image3 rgb = testutil::random_image(rng, 16, 16);
  Grid near = model.denoise(z, rgb, 0.5, 0.4);
  Grid wide = model.denoise(z, rgb, 1.0, 0.4);
  CHECK(testutil::max_abs_diff(near, wide) > 0.0f);
  Grid late = model.denoise(z, rgb, 0.5, 0.9);
  CHECK(testutil::max_abs_diff(near, late) > 0.0f);
}

TEST_CASE("sincos embedding layout") {
  nn::Vec<float> zero = nn::sincos_embed<float>(0.0, 8);
  for (int i = 0; i < 8; i += 2) {
    CHECK(zero(i) == 0.0f);
    CHECK(zero(i + 1) == 1.0f);
  }
  nn::Vec<double> quarter = nn::sincos_embed<double>(std::numbers::pi / 2, 2);
  CHECK(quarter(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(quarter(1) == doctest::Approx(0.0).epsilon(1e-9));
  // second frequency pair uses w_1 = 10000^(-1/2)
  const double v = 3.7;
  nn::Vec<double> four = nn::sincos_embed<double>(v, 4);
  CHECK(four(2) == doctest::Approx(std::sin(v * 0.01)).epsilon(1e-12));
  CHECK(four(3) == doctest::Approx(std::cos(v * 0.01)).epsilon(1e-12));
  CHECK_THROWS_AS(nn::sincos_embed<float>(1.0, 5), UsageError);
  CHECK_THROWS_AS(nn::sincos_embed<float>(1.0, 0), UsageError);
}

TEST_CASE("group count picks the largest divisor up to 8") {
  CHECK(nn::groupnorm_groups(12) == 6);
  CHECK(nn::groupnorm_groups(7) == 7);
  CHECK(nn::groupnorm_groups(32) == 8);
  CHECK(nn::groupnorm_groups(4) == 4);
  CHECK(nn::groupnorm_groups(11) == 1);
  CHECK(nn::groupnorm_groups(6, 4) == 3);
}

TEST_CASE("every parameter receives gradient") {
  Denoiser model(tiny_config(), 31);
  randomize_params(model, 32);
  model.zero_grads();
  Rng rng(33);
  const double ts[] = {0.21, 0.53, 0.87};
  for (double t : ts) {
    Grid z = testutil::random_grid(rng, 16, 16);
    Image3 rgb = testutil::random_image(rng, 16, 16);
    Grid x = testutil::random_grid(rng, 16, 16);
    Grid eps = testutil::normal_grid(rng, 16, 16);
    Mask mask = make_mask(16, 16);
    mask(0, 0) = false;
    Denoiser::Cache cache;
    nn::Tensor<float> out =
        model.forward(Denoiser::pack_input(z, rgb), t, 0.8, cache);
    auto lg = masked_loss_grad<float>(Parameterization::v, x, eps, z, out,
                                      mask, t);
    model.backward(lg.dout, cache);
  }
  model.for_each_param([&](const std::string& name, const float*,
                           const float* g, std::size_t n) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += std::abs(g[i]);
    INFO("param ", name);
    CHECK(total > 0.0);
  });
}

TEST_CASE("analytic gradients match central differences") {
  DenoiserConfig cfg;
  cfg.base_channels = 2;
  cfg.depth_levels = 2;
  cfg.embed_dim = 4;
  cfg.fov_conditioning = true;
  DenoiserT<double> model(cfg, 41);
  CHECK(model.param_count() <= 1000);
  randomize_params(model, 42);

  Rng rng(43);
  Grid zf = testutil::random_grid(rng, 8, 8);
  Image3 rgb = testutil::random_image(rng, 8, 8);
  using ArrD = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic>;
  ArrD z = zf.cast<double>();
  ArrD x = testutil::random_grid(rng, 8, 8).cast<double>();
  ArrD eps = testutil::normal_grid(rng, 8, 8).cast<double>();
  Mask mask = make_mask(8, 8);
  mask(0, 0) = false;
  mask(5, 2) = false;
  const double t = 0.37, fov = 0.8;

  auto loss_at = [&]() {
    DenoiserT<double>::Cache cache;
    nn::Tensor<double> out =
        model.forward(DenoiserT<double>::pack_input(zf, rgb), t, fov, cache);
    return masked_loss_grad<double>(Parameterization::v, x, eps, z, out, mask,
                                    t);
  };

  model.zero_grads();
  {
    DenoiserT<double>::Cache cache;
    nn::Tensor<double> out =
        model.forward(DenoiserT<double>::pack_input(zf, rgb), t, fov, cache);
    auto lg = masked_loss_grad<double>(Parameterization::v, x, eps, z, out,
                                       mask, t);
    model.backward(lg.dout, cache);
  }

  struct Entry {
    std::string name;
    double* p;
    double analytic;
    std::size_t idx;
  };
  std::vector<Entry> entries;
  model.for_each_param([&](const std::string& name, double* p, double* g,
                           std::size_t n) {
    // a few spread-out entries per parameter tensor
    const std::size_t stride = std::max<std::size_t>(1, n / 2);
    for (std::size_t i = 0; i < n; i += stride)
      entries.push_back({name, p + i, g[i], i});
  });
  CHECK(entries.size() >= 25);

  const double h = 1e-5;
  for (auto& e : entries) {
    const double saved = *e.p;
    *e.p = saved + h;
    const double lp = loss_at().loss;
    *e.p = saved - h;
    const double lm = loss_at().loss;
    *e.p = saved;
    const double fd = (lp - lm) / (2 * h);
    const double scale = std::max({1e-6, std::abs(fd), std::abs(e.analytic)});
    INFO("param ", e.name, " [", e.idx, "] fd=", fd, " grad=", e.analytic);
    CHECK(std::abs(fd - e.analytic) / scale < 1e-3);
  }
}

}  // TEST_SUITE
