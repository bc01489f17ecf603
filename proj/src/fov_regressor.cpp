#include "diffdepth/fov_regressor.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>

#include "diffdepth/camera.hpp"
#include "diffdepth/checkpoint.hpp"
#include "diffdepth/version.hpp"

namespace diffdepth {

FovRegressor::FovRegressor(const FovRegressorConfig& cfg, std::uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  Rng rng(derive_seed(seed, /*stream=*/13));
  int ci = 3;
  for (int s = 0; s < cfg_.stages; ++s) {
    const int co = cfg_.base_channels << s;
    nn::ConvParam<float> conv;
    conv.init(ci, co, 3, 2, 1, rng, false);
    convs_.push_back(std::move(conv));
    ci = co;
  }
  head_.init(ci, 1, rng, false);
}

namespace {

nn::Tensor<float> pack_rgb(const Image3& rgb) {
  nn::Tensor<float> t(3, rgb.height(), rgb.width());
  for (int c = 0; c < 3; ++c) {
    const Grid& g = rgb.channel(c);
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) t.at(c, i, j) = g(i, j);
  }
  return t;
}

double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

}  // namespace

double FovRegressor::forward(const Image3& rgb, Cache& cache) const {
  if (any_non_finite(rgb)) throw NumericError("fov_regressor: non-finite rgb");
  cache.conv_in.clear();
  cache.conv_out.clear();
  nn::Tensor<float> h = pack_rgb(rgb);
  for (const auto& conv : convs_) {
    cache.conv_in.push_back(h);
    nn::Tensor<float> pre = nn::conv_forward(conv, h);
    cache.conv_out.push_back(pre);
    h = nn::silu_forward(pre);
  }
  // Spatial average pooling to a channel vector.
  cache.pooled.setZero(h.c);
  const double inv_plane = 1.0 / static_cast<double>(h.plane());
  for (int c = 0; c < h.c; ++c) {
    double sum = 0.0;
    const float* p = h.data() + static_cast<std::size_t>(c) * h.plane();
    for (int i = 0; i < h.plane(); ++i) sum += p[i];
    cache.pooled(c) = static_cast<float>(sum * inv_plane);
  }
  cache.pre_softplus =
      (head_.w * cache.pooled + head_.b)(0);
  return softplus(cache.pre_softplus);
}

void FovRegressor::backward(double dpred, const Cache& cache) {
  const double sig = 1.0 / (1.0 + std::exp(-cache.pre_softplus));
  const double dpre = dpred * sig;  // softplus' = sigmoid

  head_.gw.noalias() +=
      static_cast<float>(dpre) * cache.pooled.transpose();
  head_.gb(0) += static_cast<float>(dpre);
  nn::Vec<float> dpooled = head_.w.transpose() * static_cast<float>(dpre);

  const nn::Tensor<float>& last = cache.conv_out.back();
  nn::Tensor<float> d(last.c, last.h, last.w);
  const float inv_plane = 1.0f / static_cast<float>(last.plane());
  for (int c = 0; c < d.c; ++c) {
    const float g = dpooled(c) * inv_plane;
    float* p = d.data() + static_cast<std::size_t>(c) * d.plane();
    for (int i = 0; i < d.plane(); ++i) p[i] = g;
  }

  for (int s = static_cast<int>(convs_.size()) - 1; s >= 0; --s) {
    d = nn::silu_backward(cache.conv_out[s], d);
    d = nn::conv_backward(convs_[s], cache.conv_in[s], d);
  }
}

double FovRegressor::predict(const Image3& rgb) const {
  Cache cache;
  return forward(rgb, cache);
}

void FovRegressor::zero_grads() {
  for_each_param([](const std::string&, float*, float* g, std::size_t n) {
    std::fill(g, g + n, 0.0f);
  });
}

std::size_t FovRegressor::param_count() const {
  std::size_t total = 0;
  for_each_param([&](const std::string&, const float*, const float*,
                     std::size_t n) { total += n; });
  return total;
}

FovTrainOutput train_fov_regressor(FovRegressor& model, const Dataset& data,
                                   const FovTrainConfig& cfg,
                                   const std::filesystem::path& out_dir) {
  cfg.validate();
  if (data.samples.empty()) throw DataError("fov_regressor: empty dataset");

  FovTrainOutput result;
  std::set<double> fovs;
  for (const auto& s : data.samples) fovs.insert(s.camera.vertical_fov_deg);
  if (fovs.size() == 1) {
    result.degenerate_fov_distribution = true;
    std::cerr << "warning: fov regressor training set has a single FOV ("
              << *fovs.begin() << " deg); the regressor will collapse to a "
              << "constant\n";
  }

  std::ofstream log;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log.open(out_dir / "fov_train_log.jsonl", std::ios::trunc);
  }

  nn::Adam<float> opt(cfg.lr);
  double loss = 0.0;
  for (int step = 0; step < cfg.steps; ++step) {
    model.zero_grads();
    Rng pick(derive_seed(cfg.seed, /*stream=*/14, step));
    double loss_sum = 0.0;
    for (int k = 0; k < cfg.batch_size; ++k) {
      const RenderedSample& s =
          data.samples[pick.uniform_int(data.samples.size())];
      const double target = fov_to_cond(s.camera.vertical_fov_deg);
      FovRegressor::Cache cache;
      const double pred = model.forward(s.rgb, cache);
      const double err = pred - target;
      loss_sum += std::abs(err);
      const double dpred =
          (err > 0 ? 1.0 : (err < 0 ? -1.0 : 0.0)) / cfg.batch_size;
      model.backward(dpred, cache);
    }
    loss = loss_sum / cfg.batch_size;
    if (!std::isfinite(loss)) throw NumericError("fov_regressor: NaN loss");

    opt.begin_step();
    std::size_t total = 0;
    model.for_each_param(
        [&](const std::string&, float* p, float* g, std::size_t n) {
          opt.update(p, g, n);
          total += n;
        });
    opt.end_step(total);

    if (log && (step % cfg.log_every == 0 || step + 1 == cfg.steps))
      log << "{\"step\":" << step << ",\"loss\":" << loss << "}\n";
  }
  result.final_loss = loss;
  if (!out_dir.empty()) save_fov_regressor(out_dir / "fov_checkpoint", model);
  return result;
}

void save_fov_regressor(const std::filesystem::path& dir,
                        const FovRegressor& model) {
  nlohmann::ordered_json meta;
  meta["format_version"] = kCheckpointVersion;
  meta["code_version"] = kVersion;
  meta["kind"] = "fov_regressor";
  meta["fov_regressor"] = {{"base_channels", model.config().base_channels},
                           {"stages", model.config().stages}};
  detail::ParamBlobWriter blob;
  model.for_each_param(
      [&](const std::string& name, const float* p, const float*,
          std::size_t n) { blob.add(name, p, n); });
  blob.finish(dir, meta);
  std::ofstream out(dir / "metadata.json", std::ios::trunc);
  if (!out)
    throw DataError("fov_regressor: cannot write metadata in " + dir.string());
  out << meta.dump(2) << "\n";
}

FovRegressor load_fov_regressor(const std::filesystem::path& dir) {
  const std::filesystem::path meta_path = dir / "metadata.json";
  std::ifstream in(meta_path);
  if (!in) throw DataError("fov_regressor: missing " + meta_path.string());
  try {
    nlohmann::json meta = nlohmann::json::parse(std::string(
        (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
    if (meta.at("format_version").get<int>() != kCheckpointVersion)
      throw DataError("fov_regressor: unsupported format version");
    if (meta.value("kind", "") != "fov_regressor")
      throw DataError("fov_regressor: not a fov_regressor checkpoint");
    FovRegressorConfig cfg;
    cfg.base_channels = meta.at("fov_regressor").at("base_channels").get<int>();
    cfg.stages = meta.at("fov_regressor").at("stages").get<int>();
    FovRegressor model(cfg, 0);
    detail::ParamBlobReader blob(dir, meta);
    model.for_each_param(
        [&](const std::string& name, float* p, float*, std::size_t n) {
          blob.copy(name, p, n);
        });
    blob.finish();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(meta_path.string() + ": " + e.what());
  }
}

}  // namespace diffdepth
