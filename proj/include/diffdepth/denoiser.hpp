#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "diffdepth/diffusion.hpp"
#include "diffdepth/grid.hpp"
#include "diffdepth/nn/adam.hpp"
#include "diffdepth/nn/ops.hpp"

namespace diffdepth {

struct DenoiserConfig {
  int base_channels = 32;  // doubled at each level
  int depth_levels = 3;
  int embed_dim = 128;
  bool fov_conditioning = true;
  Parameterization parameterization = Parameterization::v;

  void validate() const {
    if (base_channels < 2) throw UsageError("denoiser: base_channels >= 2");
    if (depth_levels < 2 || depth_levels > 6)
      throw UsageError("denoiser: depth_levels in [2, 6]");
    if (embed_dim < 4 || embed_dim % 2 != 0)
      throw UsageError("denoiser: embed_dim must be even and >= 4");
  }

  int channels_at(int level) const { return base_channels << level; }
  int downsample_factor() const { return 1 << (depth_levels - 1); }
};

// U-Net denoiser over a 4-channel input [z, r, g, b]; t and the optional FOV
// signal enter through sin-cos embeddings, linear projections, and per-block
// FiLM modulation. FiLM heads, second convs, and the output conv start at
// zero so the net is the identity-to-zero map at init.
template <typename T>
class DenoiserT {
 public:
  struct ResBlockP {
    int ci = 0, co = 0;
    nn::GroupNormParam<T> gn1, gn2;
    nn::ConvParam<T> conv1, conv2;
    nn::LinearParam<T> film;  // embed -> 2*co (scale, shift)
    std::optional<nn::ConvParam<T>> skip;
  };

  struct ResBlockCache {
    nn::Tensor<T> x;
    nn::GroupNormCache<T> gn1c, gn2c;
    nn::Tensor<T> gn1_out, silu1_out, conv1_out, gn2_out, film_out, silu2_out;
    nn::Vec<T> film_sb;
  };

  struct Cache {
    nn::Tensor<T> input, stem_out;
    std::vector<ResBlockCache> encc;
    std::vector<nn::Tensor<T>> enc_out;
    ResBlockCache midc;
    std::vector<nn::Tensor<T>> up_sampled;
    std::vector<ResBlockCache> decc;
    nn::GroupNormCache<T> head_gnc;
    nn::Tensor<T> head_gn_out, head_silu_out;
    nn::Vec<T> emb_t, emb_fov, cond;
    bool has_fov = false;
  };

  DenoiserT(const DenoiserConfig& cfg, std::uint64_t seed);

  const DenoiserConfig& config() const { return cfg_; }

  // Inference-shaped entry point. Validates shapes (H and W divisible by the
  // downsample factor), rejects NaN inputs, requires fov_cond iff the model
  // is FOV-conditioned (supplying one to an unconditioned model is an error).
  Grid denoise(const Grid& z, const Image3& rgb,
               std::optional<double> fov_cond, double t) const;

  nn::Tensor<T> forward(const nn::Tensor<T>& input, double t,
                        std::optional<double> fov_cond, Cache& cache) const;

  // Accumulates parameter gradients, returns d(loss)/d(input).
  nn::Tensor<T> backward(const nn::Tensor<T>& dout, const Cache& cache);

  void zero_grads();
  std::size_t param_count() const;

  static nn::Tensor<T> pack_input(const Grid& z, const Image3& rgb);

  // Stable-order walk over (name, param, grad, size).
  template <typename F>
  void for_each_param(F&& f) {
    auto conv = [&](const std::string& n, nn::ConvParam<T>& p) {
      f(n + ".w", p.w.data(), p.gw.data(), static_cast<std::size_t>(p.w.size()));
      f(n + ".b", p.b.data(), p.gb.data(), static_cast<std::size_t>(p.b.size()));
    };
    auto lin = [&](const std::string& n, nn::LinearParam<T>& p) {
      f(n + ".w", p.w.data(), p.gw.data(), static_cast<std::size_t>(p.w.size()));
      f(n + ".b", p.b.data(), p.gb.data(), static_cast<std::size_t>(p.b.size()));
    };
    auto gn = [&](const std::string& n, nn::GroupNormParam<T>& p) {
      f(n + ".gamma", p.gamma.data(), p.ggamma.data(),
        static_cast<std::size_t>(p.gamma.size()));
      f(n + ".beta", p.beta.data(), p.gbeta.data(),
        static_cast<std::size_t>(p.beta.size()));
    };
    auto block = [&](const std::string& n, ResBlockP& b) {
      gn(n + ".gn1", b.gn1);
      conv(n + ".conv1", b.conv1);
      gn(n + ".gn2", b.gn2);
      lin(n + ".film", b.film);
      conv(n + ".conv2", b.conv2);
      if (b.skip) conv(n + ".skip", *b.skip);
    };
    conv("stem", stem_);
    for (std::size_t l = 0; l < enc_.size(); ++l) {
      block("enc" + std::to_string(l), enc_[l]);
      conv("down" + std::to_string(l), down_[l]);
    }
    block("mid", mid_);
    for (int l = static_cast<int>(dec_.size()) - 1; l >= 0; --l) {
      conv("up" + std::to_string(l), up_[l]);
      block("dec" + std::to_string(l), dec_[l]);
    }
    gn("head.gn", head_gn_);
    conv("head.conv", head_conv_);
    lin("proj_t", proj_t_);
    if (proj_fov_) lin("proj_fov", *proj_fov_);
  }

  template <typename F>
  void for_each_param(F&& f) const {
    const_cast<DenoiserT*>(this)->for_each_param(
        [&](const std::string& n, T* p, T* g, std::size_t s) {
          f(n, static_cast<const T*>(p), static_cast<const T*>(g), s);
        });
  }

 private:
  ResBlockP make_block(int ci, int co, Rng& rng) const;
  nn::Tensor<T> block_forward(const ResBlockP& b, const nn::Tensor<T>& x,
                              const nn::Vec<T>& cond, ResBlockCache& c) const;
  nn::Tensor<T> block_backward(ResBlockP& b, const ResBlockCache& c,
                               const nn::Tensor<T>& dy, const nn::Vec<T>& cond,
                               nn::Vec<T>& dcond);
  nn::Vec<T> make_cond(double t, std::optional<double> fov_cond,
                       Cache& cache) const;

  DenoiserConfig cfg_;
  nn::ConvParam<T> stem_;
  std::vector<ResBlockP> enc_;
  std::vector<nn::ConvParam<T>> down_;
  ResBlockP mid_;
  std::vector<nn::ConvParam<T>> up_;   // up_[l]: ch_{l+1} -> ch_l
  std::vector<ResBlockP> dec_;         // dec_[l]: 2 ch_l -> ch_l
  nn::GroupNormParam<T> head_gn_;
  nn::ConvParam<T> head_conv_;
  nn::LinearParam<T> proj_t_;
  std::optional<nn::LinearParam<T>> proj_fov_;
};

using Denoiser = DenoiserT<float>;

// The model's t input is scaled before the sin-cos embedding.
inline constexpr double kTimeEmbedScale = 1000.0;

}  // namespace diffdepth
