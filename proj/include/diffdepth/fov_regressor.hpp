#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "diffdepth/dataset_io.hpp"
#include "diffdepth/grid.hpp"
#include "diffdepth/nn/adam.hpp"
#include "diffdepth/nn/ops.hpp"

namespace diffdepth {

struct FovRegressorConfig {
  int base_channels = 16;  // doubled per stride-2 stage
  int stages = 3;

  void validate() const {
    if (base_channels < 2 || stages < 1 || stages > 5)
      throw UsageError("fov_regressor: bad config");
  }
};

// Conv encoder -> spatial average pooling -> linear head; predicts
// tan(theta/2) through a softplus so the output stays positive.
class FovRegressor {
 public:
  FovRegressor(const FovRegressorConfig& cfg, std::uint64_t seed);

  const FovRegressorConfig& config() const { return cfg_; }

  double predict(const Image3& rgb) const;

  struct Cache {
    std::vector<nn::Tensor<float>> conv_in;   // input to each conv
    std::vector<nn::Tensor<float>> conv_out;  // pre-activation
    nn::Vec<float> pooled;
    double pre_softplus = 0.0;
  };

  double forward(const Image3& rgb, Cache& cache) const;
  // dL/d(prediction) in, gradients accumulated.
  void backward(double dpred, const Cache& cache);

  void zero_grads();
  std::size_t param_count() const;

  template <typename F>
  void for_each_param(F&& f) {
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      const std::string n = "conv" + std::to_string(i);
      f(n + ".w", convs_[i].w.data(), convs_[i].gw.data(),
        static_cast<std::size_t>(convs_[i].w.size()));
      f(n + ".b", convs_[i].b.data(), convs_[i].gb.data(),
        static_cast<std::size_t>(convs_[i].b.size()));
    }
    f("head.w", head_.w.data(), head_.gw.data(),
      static_cast<std::size_t>(head_.w.size()));
    f("head.b", head_.b.data(), head_.gb.data(),
      static_cast<std::size_t>(head_.b.size()));
  }

  template <typename F>
  void for_each_param(F&& f) const {
    const_cast<FovRegressor*>(this)->for_each_param(
        [&](const std::string& n, float* p, float* g, std::size_t s) {
          f(n, static_cast<const float*>(p), static_cast<const float*>(g), s);
        });
  }

 private:
  FovRegressorConfig cfg_;
  std::vector<nn::ConvParam<float>> convs_;  // stride-2, SiLU after each
  nn::LinearParam<float> head_;
};

struct FovTrainConfig {
  FovRegressorConfig model;
  double lr = 3e-4;
  int batch_size = 8;
  int steps = 800;
  int log_every = 50;
  std::uint64_t seed = 0;

  void validate() const {
    model.validate();
    if (!(lr > 0.0) || batch_size < 1 || steps < 1 || log_every < 1)
      throw UsageError("fov_regressor: bad training config");
  }
};

struct FovTrainOutput {
  double final_loss = 0.0;
  bool degenerate_fov_distribution = false;  // all samples share one FOV
};

// L1 regression of tan(theta/2) against each sample's camera. Warns (and
// flags) when every training sample has the same FOV.
FovTrainOutput train_fov_regressor(FovRegressor& model, const Dataset& data,
                                   const FovTrainConfig& cfg,
                                   const std::filesystem::path& out_dir = {});

void save_fov_regressor(const std::filesystem::path& dir,
                        const FovRegressor& model);
FovRegressor load_fov_regressor(const std::filesystem::path& dir);

}  // namespace diffdepth
