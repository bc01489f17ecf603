#include "diffdepth/denoiser.hpp"

#include <cmath>

namespace diffdepth {

template <typename T>
DenoiserT<T>::DenoiserT(const DenoiserConfig& cfg, std::uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  Rng rng(derive_seed(seed, /*stream=*/2));
  const int levels = cfg_.depth_levels;

  stem_.init(4, cfg_.channels_at(0), 3, 1, 1, rng, false);
  for (int l = 0; l + 1 < levels; ++l) {
    enc_.push_back(make_block(cfg_.channels_at(l), cfg_.channels_at(l), rng));
    nn::ConvParam<T> down;
    down.init(cfg_.channels_at(l), cfg_.channels_at(l + 1), 3, 2, 1, rng,
              false);
    down_.push_back(std::move(down));
  }
  mid_ = make_block(cfg_.channels_at(levels - 1), cfg_.channels_at(levels - 1),
                    rng);
  up_.resize(levels - 1);
  dec_.resize(levels - 1);
  for (int l = levels - 2; l >= 0; --l) {
    up_[l].init(cfg_.channels_at(l + 1), cfg_.channels_at(l), 3, 1, 1, rng,
                false);
    dec_[l] = make_block(2 * cfg_.channels_at(l), cfg_.channels_at(l), rng);
  }
  head_gn_.init(cfg_.channels_at(0), nn::groupnorm_groups(cfg_.channels_at(0)));
  head_conv_.init(cfg_.channels_at(0), 1, 3, 1, 1, rng, /*zero=*/true);
  proj_t_.init(cfg_.embed_dim, cfg_.embed_dim, rng, false);
  if (cfg_.fov_conditioning) {
    proj_fov_.emplace();
    proj_fov_->init(cfg_.embed_dim, cfg_.embed_dim, rng, false);
  }
}

template <typename T>
typename DenoiserT<T>::ResBlockP DenoiserT<T>::make_block(int ci, int co,
                                                          Rng& rng) const {
  ResBlockP b;
  b.ci = ci;
  b.co = co;
  b.gn1.init(ci, nn::groupnorm_groups(ci));
  b.conv1.init(ci, co, 3, 1, 1, rng, false);
  b.gn2.init(co, nn::groupnorm_groups(co));
  b.film.init(cfg_.embed_dim, 2 * co, rng, /*zero=*/true);
  b.conv2.init(co, co, 3, 1, 1, rng, /*zero=*/true);
  if (ci != co) {
    b.skip.emplace();
    b.skip->init(ci, co, 1, 1, 0, rng, false);
  }
  return b;
}

template <typename T>
nn::Tensor<T> DenoiserT<T>::block_forward(const ResBlockP& b,
                                          const nn::Tensor<T>& x,
                                          const nn::Vec<T>& cond,
                                          ResBlockCache& c) const {
  c.x = x;
  c.gn1_out = nn::gn_forward(b.gn1, x, c.gn1c);
  c.silu1_out = nn::silu_forward(c.gn1_out);
  c.conv1_out = nn::conv_forward(b.conv1, c.silu1_out);
  c.gn2_out = nn::gn_forward(b.gn2, c.conv1_out, c.gn2c);

  c.film_sb = b.film.w * cond + b.film.b;
  c.film_out = nn::Tensor<T>(b.co, c.gn2_out.h, c.gn2_out.w);
  const int plane = c.gn2_out.plane();
  for (int ch = 0; ch < b.co; ++ch) {
    const T scale = c.film_sb(ch), shift = c.film_sb(b.co + ch);
    const T* src = c.gn2_out.data() + static_cast<std::size_t>(ch) * plane;
    T* dst = c.film_out.data() + static_cast<std::size_t>(ch) * plane;
    for (int i = 0; i < plane; ++i) dst[i] = src[i] * (T(1) + scale) + shift;
  }

  c.silu2_out = nn::silu_forward(c.film_out);
  nn::Tensor<T> y = nn::conv_forward(b.conv2, c.silu2_out);
  if (b.skip) {
    nn::Tensor<T> sk = nn::conv_forward(*b.skip, x);
    for (std::size_t i = 0; i < y.size(); ++i) y.v[i] += sk.v[i];
  } else {
    for (std::size_t i = 0; i < y.size(); ++i) y.v[i] += x.v[i];
  }
  return y;
}

template <typename T>
nn::Tensor<T> DenoiserT<T>::block_backward(ResBlockP& b,
                                           const ResBlockCache& c,
                                           const nn::Tensor<T>& dy,
                                           const nn::Vec<T>& cond,
                                           nn::Vec<T>& dcond) {
  nn::Tensor<T> d = nn::conv_backward(b.conv2, c.silu2_out, dy);
  d = nn::silu_backward(c.film_out, d);

  // FiLM backward: y = h (1 + s_c) + t_c
  nn::Vec<T> dsb = nn::Vec<T>::Zero(2 * b.co);
  const int plane = c.gn2_out.plane();
  for (int ch = 0; ch < b.co; ++ch) {
    const T scale = c.film_sb(ch);
    const T* h = c.gn2_out.data() + static_cast<std::size_t>(ch) * plane;
    T* dp = d.data() + static_cast<std::size_t>(ch) * plane;
    double ds = 0.0, dt = 0.0;
    for (int i = 0; i < plane; ++i) {
      ds += static_cast<double>(dp[i]) * h[i];
      dt += dp[i];
      dp[i] = dp[i] * (T(1) + scale);
    }
    dsb(ch) = static_cast<T>(ds);
    dsb(b.co + ch) = static_cast<T>(dt);
  }
  b.film.gw.noalias() += dsb * cond.transpose();
  b.film.gb += dsb;
  dcond.noalias() += b.film.w.transpose() * dsb;

  d = nn::gn_backward(b.gn2, c.gn2c, d);
  d = nn::conv_backward(b.conv1, c.silu1_out, d);
  d = nn::silu_backward(c.gn1_out, d);
  nn::Tensor<T> dx = nn::gn_backward(b.gn1, c.gn1c, d);
  if (b.skip) {
    nn::Tensor<T> dsk = nn::conv_backward(*b.skip, c.x, dy);
    for (std::size_t i = 0; i < dx.size(); ++i) dx.v[i] += dsk.v[i];
  } else {
    for (std::size_t i = 0; i < dx.size(); ++i) dx.v[i] += dy.v[i];
  }
  return dx;
}

template <typename T>
nn::Vec<T> DenoiserT<T>::make_cond(double t, std::optional<double> fov_cond,
                                   Cache& cache) const {
  if (!(t >= 0.0 && t <= 1.0))
    throw DataError("denoiser: t out of [0, 1]: " + std::to_string(t));
  cache.emb_t = nn::sincos_embed<T>(kTimeEmbedScale * t, cfg_.embed_dim);
  nn::Vec<T> cond = proj_t_.w * cache.emb_t + proj_t_.b;
  cache.has_fov = false;
  if (proj_fov_) {
    if (!fov_cond)
      throw UsageError("denoiser: fov_cond required by this model");
    if (!std::isfinite(*fov_cond))
      throw NumericError("denoiser: non-finite fov_cond");
    cache.emb_fov = nn::sincos_embed<T>(*fov_cond, cfg_.embed_dim);
    cond.noalias() += proj_fov_->w * cache.emb_fov + proj_fov_->b;
    cache.has_fov = true;
  } else if (fov_cond) {
    throw UsageError("denoiser: fov_cond supplied to an unconditioned model");
  }
  cache.cond = cond;
  return cond;
}

template <typename T>
nn::Tensor<T> DenoiserT<T>::forward(const nn::Tensor<T>& input, double t,
                                    std::optional<double> fov_cond,
                                    Cache& cache) const {
  if (input.c != 4) throw DataError("denoiser: input must have 4 channels");
  const int factor = cfg_.downsample_factor();
  if (input.h % factor != 0 || input.w % factor != 0 || input.h < factor * 2 ||
      input.w < factor * 2)
    throw DataError("denoiser: resolution must be a multiple of " +
                    std::to_string(factor));

  const nn::Vec<T> cond = make_cond(t, fov_cond, cache);
  const int levels = cfg_.depth_levels;
  cache.input = input;
  cache.stem_out = nn::conv_forward(stem_, input);
  cache.encc.resize(levels - 1);
  cache.enc_out.resize(levels - 1);
  cache.up_sampled.resize(levels - 1);
  cache.decc.resize(levels - 1);

  nn::Tensor<T> h = cache.stem_out;
  for (int l = 0; l + 1 < levels; ++l) {
    h = block_forward(enc_[l], h, cond, cache.encc[l]);
    cache.enc_out[l] = h;
    h = nn::conv_forward(down_[l], h);
  }
  h = block_forward(mid_, h, cond, cache.midc);
  for (int l = levels - 2; l >= 0; --l) {
    h = nn::upsample2_forward(h);
    cache.up_sampled[l] = h;
    h = nn::conv_forward(up_[l], h);
    h = nn::concat_channels(h, cache.enc_out[l]);
    h = block_forward(dec_[l], h, cond, cache.decc[l]);
  }
  cache.head_gn_out = nn::gn_forward(head_gn_, h, cache.head_gnc);
  cache.head_silu_out = nn::silu_forward(cache.head_gn_out);
  // head input for gn backward is the last dec block's cache; keep h there.
  return nn::conv_forward(head_conv_, cache.head_silu_out);
}

template <typename T>
nn::Tensor<T> DenoiserT<T>::backward(const nn::Tensor<T>& dout,
                                     const Cache& cache) {
  const int levels = cfg_.depth_levels;
  nn::Vec<T> dcond = nn::Vec<T>::Zero(cfg_.embed_dim);

  nn::Tensor<T> d = nn::conv_backward(head_conv_, cache.head_silu_out, dout);
  d = nn::silu_backward(cache.head_gn_out, d);
  d = nn::gn_backward(head_gn_, cache.head_gnc, d);

  std::vector<nn::Tensor<T>> skip_grad(levels - 1);
  for (int l = 0; l + 1 < levels; ++l) {
    d = block_backward(dec_[l], cache.decc[l], d, cache.cond, dcond);
    nn::Tensor<T> dup, dskip;
    nn::split_channels(d, cfg_.channels_at(l), dup, dskip);
    skip_grad[l] = std::move(dskip);
    d = nn::conv_backward(up_[l], cache.up_sampled[l], dup);
    d = nn::upsample2_backward(d);
  }
  d = block_backward(mid_, cache.midc, d, cache.cond, dcond);
  for (int l = levels - 2; l >= 0; --l) {
    d = nn::conv_backward(down_[l], cache.enc_out[l], d);
    for (std::size_t i = 0; i < d.size(); ++i) d.v[i] += skip_grad[l].v[i];
    d = block_backward(enc_[l], cache.encc[l], d, cache.cond, dcond);
  }
  nn::Tensor<T> dinput = nn::conv_backward(stem_, cache.input, d);

  proj_t_.gw.noalias() += dcond * cache.emb_t.transpose();
  proj_t_.gb += dcond;
  if (cache.has_fov && proj_fov_) {
    proj_fov_->gw.noalias() += dcond * cache.emb_fov.transpose();
    proj_fov_->gb += dcond;
  }
  return dinput;
}

template <typename T>
Grid DenoiserT<T>::denoise(const Grid& z, const Image3& rgb,
                           std::optional<double> fov_cond, double t) const {
  require_same_shape(z, rgb.r, "denoise");
  if (any_non_finite(z) || any_non_finite(rgb))
    throw NumericError("denoise: non-finite input");
  Cache cache;
  nn::Tensor<T> out = forward(pack_input(z, rgb), t, fov_cond, cache);
  Grid result(z.rows(), z.cols());
  for (int i = 0; i < out.h; ++i)
    for (int j = 0; j < out.w; ++j)
      result(i, j) = static_cast<float>(out.at(0, i, j));
  return result;
}

template <typename T>
nn::Tensor<T> DenoiserT<T>::pack_input(const Grid& z, const Image3& rgb) {
  const int h = static_cast<int>(z.rows()), w = static_cast<int>(z.cols());
  nn::Tensor<T> input(4, h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      input.at(0, i, j) = static_cast<T>(z(i, j));
      input.at(1, i, j) = static_cast<T>(rgb.r(i, j));
      input.at(2, i, j) = static_cast<T>(rgb.g(i, j));
      input.at(3, i, j) = static_cast<T>(rgb.b(i, j));
    }
  return input;
}

template <typename T>
void DenoiserT<T>::zero_grads() {
  for_each_param([](const std::string&, T*, T* g, std::size_t n) {
    std::fill(g, g + n, T(0));
  });
}

template <typename T>
std::size_t DenoiserT<T>::param_count() const {
  std::size_t total = 0;
  for_each_param(
      [&](const std::string&, const T*, const T*, std::size_t n) { total += n; });
  return total;
}

template class DenoiserT<float>;
template class DenoiserT<double>;

}  // namespace diffdepth
