#pragma once

#include <cmath>
#include <string>

#include "diffdepth/error.hpp"
#include "diffdepth/nn/tensor.hpp"
#include "diffdepth/rng.hpp"

namespace diffdepth::nn {

// ---- parameters ----------------------------------------------------------

template <typename T>
struct ConvParam {
  int ci = 0, co = 0, k = 3, stride = 1, pad = 1;
  Mat<T> w;   // co x ci*k*k
  Vec<T> b;   // co
  Mat<T> gw;
  Vec<T> gb;

  void init(int ci_, int co_, int k_, int stride_, int pad_, Rng& rng,
            bool zero) {
    ci = ci_; co = co_; k = k_; stride = stride_; pad = pad_;
    w.setZero(co, ci * k * k);
    b.setZero(co);
    if (!zero) {
      const double std = std::sqrt(2.0 / (static_cast<double>(ci) * k * k));
      for (int i = 0; i < w.rows(); ++i)
        for (int j = 0; j < w.cols(); ++j)
          w(i, j) = static_cast<T>(std * rng.normal());
    }
    gw.setZero(co, ci * k * k);
    gb.setZero(co);
  }
};

template <typename T>
struct LinearParam {
  Mat<T> w;  // out x in
  Vec<T> b;
  Mat<T> gw;
  Vec<T> gb;

  void init(int in, int out, Rng& rng, bool zero) {
    w.setZero(out, in);
    b.setZero(out);
    if (!zero) {
      const double std = std::sqrt(2.0 / static_cast<double>(in));
      for (int i = 0; i < out; ++i)
        for (int j = 0; j < in; ++j) w(i, j) = static_cast<T>(std * rng.normal());
    }
    gw.setZero(out, in);
    gb.setZero(out);
  }
};

template <typename T>
struct GroupNormParam {
  int channels = 0, groups = 1;
  Vec<T> gamma, beta, ggamma, gbeta;

  void init(int channels_, int groups_) {
    channels = channels_;
    groups = groups_;
    gamma.setOnes(channels);
    beta.setZero(channels);
    ggamma.setZero(channels);
    gbeta.setZero(channels);
  }
};

inline int groupnorm_groups(int channels, int max_groups = 8) {
  for (int g = std::min(channels, max_groups); g > 1; --g)
    if (channels % g == 0) return g;
  return 1;
}

// ---- conv via im2col + GEMM ----------------------------------------------

inline int conv_out_size(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

template <typename T>
void im2col(const Tensor<T>& x, int k, int stride, int pad, Mat<T>& col) {
  const int oh = conv_out_size(x.h, k, stride, pad);
  const int ow = conv_out_size(x.w, k, stride, pad);
  col.setZero(x.c * k * k, oh * ow);
  for (int ci = 0; ci < x.c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const int r = (ci * k + ky) * k + kx;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= x.h) continue;
          T* dst = col.data() + (static_cast<std::size_t>(r) * oh + oy) * ow;
          const T* src = x.data() + (static_cast<std::size_t>(ci) * x.h + iy) * x.w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < x.w) dst[ox] = src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> conv_forward(const ConvParam<T>& p, const Tensor<T>& x) {
  if (x.c != p.ci) throw DataError("conv: channel mismatch");
  const int oh = conv_out_size(x.h, p.k, p.stride, p.pad);
  const int ow = conv_out_size(x.w, p.k, p.stride, p.pad);
  Mat<T> col;
  im2col(x, p.k, p.stride, p.pad, col);
  Tensor<T> y(p.co, oh, ow);
  y.rows().noalias() = p.w * col;
  y.rows().colwise() += p.b;
  return y;
}

// Accumulates gw/gb, returns dx. Rebuilds im2col instead of caching it.
template <typename T>
Tensor<T> conv_backward(ConvParam<T>& p, const Tensor<T>& x,
                        const Tensor<T>& dy) {
  Mat<T> col;
  im2col(x, p.k, p.stride, p.pad, col);
  p.gw.noalias() += dy.rows() * col.transpose();
  // Fixed-order bias sum; a vectorized redux over the map would round
  // differently depending on the buffer address, breaking rerun identity.
  for (int co = 0; co < p.co; ++co) {
    const T* d = dy.data() + static_cast<std::size_t>(co) * dy.plane();
    double acc = 0.0;
    for (int i = 0; i < dy.plane(); ++i) acc += d[i];
    p.gb(co) += static_cast<T>(acc);
  }

  Mat<T> dcol = p.w.transpose() * dy.rows();
  Tensor<T> dx(x.c, x.h, x.w);
  const int oh = dy.h, ow = dy.w;
  for (int ci = 0; ci < x.c; ++ci) {
    for (int ky = 0; ky < p.k; ++ky) {
      for (int kx = 0; kx < p.k; ++kx) {
        const int r = (ci * p.k + ky) * p.k + kx;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * p.stride - p.pad + ky;
          if (iy < 0 || iy >= x.h) continue;
          const T* src = dcol.data() + (static_cast<std::size_t>(r) * oh + oy) * ow;
          T* dst = dx.data() + (static_cast<std::size_t>(ci) * x.h + iy) * x.w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * p.stride - p.pad + kx;
            if (ix >= 0 && ix < x.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
  return dx;
}

// ---- group norm ----------------------------------------------------------

inline constexpr double kGnEps = 1e-5;

template <typename T>
struct GroupNormCache {
  Tensor<T> xhat;
  Vec<T> invstd;  // per group
};

template <typename T>
Tensor<T> gn_forward(const GroupNormParam<T>& p, const Tensor<T>& x,
                     GroupNormCache<T>& cache) {
  if (x.c != p.channels) throw DataError("groupnorm: channel mismatch");
  const int gc = p.channels / p.groups;  // channels per group
  const std::size_t gn = static_cast<std::size_t>(gc) * x.plane();
  cache.xhat = Tensor<T>(x.c, x.h, x.w);
  cache.invstd.resize(p.groups);
  Tensor<T> y(x.c, x.h, x.w);
  for (int g = 0; g < p.groups; ++g) {
    const T* xs = x.data() + static_cast<std::size_t>(g) * gn;
    double mean = 0.0;
    for (std::size_t i = 0; i < gn; ++i) mean += xs[i];
    mean /= static_cast<double>(gn);
    double var = 0.0;
    for (std::size_t i = 0; i < gn; ++i) {
      const double d = xs[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(gn);
    const double invstd = 1.0 / std::sqrt(var + kGnEps);
    cache.invstd[g] = static_cast<T>(invstd);
    T* xh = cache.xhat.data() + static_cast<std::size_t>(g) * gn;
    T* ys = y.data() + static_cast<std::size_t>(g) * gn;
    for (int c = 0; c < gc; ++c) {
      const int cg = g * gc + c;
      const T ga = p.gamma(cg), be = p.beta(cg);
      for (int i = 0; i < x.plane(); ++i) {
        const std::size_t idx = static_cast<std::size_t>(c) * x.plane() + i;
        const T v = static_cast<T>((xs[idx] - mean) * invstd);
        xh[idx] = v;
        ys[idx] = ga * v + be;
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> gn_backward(GroupNormParam<T>& p, const GroupNormCache<T>& cache,
                      const Tensor<T>& dy) {
  const int gc = p.channels / p.groups;
  const int plane = dy.plane();
  const std::size_t gn = static_cast<std::size_t>(gc) * plane;
  Tensor<T> dx(dy.c, dy.h, dy.w);
  for (int g = 0; g < p.groups; ++g) {
    const T* xh = cache.xhat.data() + static_cast<std::size_t>(g) * gn;
    const T* dys = dy.data() + static_cast<std::size_t>(g) * gn;
    T* dxs = dx.data() + static_cast<std::size_t>(g) * gn;
    // dxhat = dy * gamma_c; reduce over the group
    double sum_dxh = 0.0, sum_dxh_xh = 0.0;
    for (int c = 0; c < gc; ++c) {
      const int cg = g * gc + c;
      const T ga = p.gamma(cg);
      double dga = 0.0, dbe = 0.0;
      for (int i = 0; i < plane; ++i) {
        const std::size_t idx = static_cast<std::size_t>(c) * plane + i;
        const double dxh = static_cast<double>(dys[idx]) * ga;
        sum_dxh += dxh;
        sum_dxh_xh += dxh * xh[idx];
        dga += static_cast<double>(dys[idx]) * xh[idx];
        dbe += dys[idx];
      }
      p.ggamma(cg) += static_cast<T>(dga);
      p.gbeta(cg) += static_cast<T>(dbe);
    }
    const double n = static_cast<double>(gn);
    const double invstd = cache.invstd(g);
    for (int c = 0; c < gc; ++c) {
      const T ga = p.gamma(g * gc + c);
      for (int i = 0; i < plane; ++i) {
        const std::size_t idx = static_cast<std::size_t>(c) * plane + i;
        const double dxh = static_cast<double>(dys[idx]) * ga;
        dxs[idx] = static_cast<T>(
            invstd * (dxh - sum_dxh / n - xh[idx] * sum_dxh_xh / n));
      }
    }
  }
  return dx;
}

// ---- pointwise ------------------------------------------------------------

template <typename T>
Tensor<T> silu_forward(const Tensor<T>& x) {
  Tensor<T> y(x.c, x.h, x.w);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x.v[i];
    y.v[i] = static_cast<T>(v / (1.0 + std::exp(-v)));
  }
  return y;
}

template <typename T>
Tensor<T> silu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
  Tensor<T> dx(x.c, x.h, x.w);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x.v[i];
    const double s = 1.0 / (1.0 + std::exp(-v));
    dx.v[i] = static_cast<T>(static_cast<double>(dy.v[i]) * s *
                             (1.0 + v * (1.0 - s)));
  }
  return dx;
}

template <typename T>
Vec<T> silu_vec(const Vec<T>& x) {
  Vec<T> y(x.size());
  for (int i = 0; i < x.size(); ++i) {
    const double v = x(i);
    y(i) = static_cast<T>(v / (1.0 + std::exp(-v)));
  }
  return y;
}

// ---- resampling ------------------------------------------------------------

template <typename T>
Tensor<T> upsample2_forward(const Tensor<T>& x) {
  Tensor<T> y(x.c, x.h * 2, x.w * 2);
  for (int c = 0; c < x.c; ++c)
    for (int i = 0; i < x.h * 2; ++i)
      for (int j = 0; j < x.w * 2; ++j) y.at(c, i, j) = x.at(c, i / 2, j / 2);
  return y;
}

template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& dy) {
  Tensor<T> dx(dy.c, dy.h / 2, dy.w / 2);
  for (int c = 0; c < dy.c; ++c)
    for (int i = 0; i < dy.h; ++i)
      for (int j = 0; j < dy.w; ++j) dx.at(c, i / 2, j / 2) += dy.at(c, i, j);
  return dx;
}

// ---- channel concat ---------------------------------------------------------

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.h != b.h || a.w != b.w) throw DataError("concat: spatial mismatch");
  Tensor<T> y(a.c + b.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), y.v.begin());
  std::copy(b.v.begin(), b.v.end(), y.v.begin() + a.v.size());
  return y;
}

template <typename T>
void split_channels(const Tensor<T>& dy, int ca, Tensor<T>& da, Tensor<T>& db) {
  da = Tensor<T>(ca, dy.h, dy.w);
  db = Tensor<T>(dy.c - ca, dy.h, dy.w);
  std::copy(dy.v.begin(), dy.v.begin() + da.v.size(), da.v.begin());
  std::copy(dy.v.begin() + da.v.size(), dy.v.end(), db.v.begin());
}

// ---- sin-cos embedding -------------------------------------------------------

// Interleaved [sin(v w_0), cos(v w_0), sin(v w_1), ...] with
// w_i = exp(-ln(10000) i / (dim/2)).
template <typename T>
Vec<T> sincos_embed(double value, int dim) {
  if (dim < 2 || dim % 2 != 0) throw UsageError("sincos_embed: dim must be even");
  Vec<T> out(dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double w = std::exp(-std::log(10000.0) * i / half);
    out(2 * i) = static_cast<T>(std::sin(value * w));
    out(2 * i + 1) = static_cast<T>(std::cos(value * w));
  }
  return out;
}

}  // namespace diffdepth::nn
