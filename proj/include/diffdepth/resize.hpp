#pragma once

#include <algorithm>
#include <cmath>

#include "diffdepth/grid.hpp"

namespace diffdepth {

// Source index for nearest resize: the input pixel whose footprint contains
// the output pixel center.
inline int nearest_src(int dst, int dst_size, int src_size) {
  const double u = (dst + 0.5) * static_cast<double>(src_size) / dst_size;
  return std::clamp(static_cast<int>(std::floor(u)), 0, src_size - 1);
}

template <typename Array>
Array resize_nearest(const Array& in, int out_h, int out_w) {
  Array out(out_h, out_w);
  const int ih = static_cast<int>(in.rows()), iw = static_cast<int>(in.cols());
  for (int i = 0; i < out_h; ++i) {
    const int si = nearest_src(i, out_h, ih);
    for (int j = 0; j < out_w; ++j) out(i, j) = in(si, nearest_src(j, out_w, iw));
  }
  return out;
}

inline Grid resize_bilinear(const Grid& in, int out_h, int out_w) {
  Grid out(out_h, out_w);
  const int ih = static_cast<int>(in.rows()), iw = static_cast<int>(in.cols());
  for (int i = 0; i < out_h; ++i) {
    const double fy =
        std::clamp((i + 0.5) * static_cast<double>(ih) / out_h - 0.5, 0.0,
                   static_cast<double>(ih - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, ih - 1);
    const double wy = fy - y0;
    for (int j = 0; j < out_w; ++j) {
      const double fx =
          std::clamp((j + 0.5) * static_cast<double>(iw) / out_w - 0.5, 0.0,
                     static_cast<double>(iw - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, iw - 1);
      const double wx = fx - x0;
      const double top = (1.0 - wx) * in(y0, x0) + wx * in(y0, x1);
      const double bot = (1.0 - wx) * in(y1, x0) + wx * in(y1, x1);
      out(i, j) = static_cast<float>((1.0 - wy) * top + wy * bot);
    }
  }
  return out;
}

inline Image3 resize_bilinear(const Image3& in, int out_h, int out_w) {
  return {resize_bilinear(in.r, out_h, out_w),
          resize_bilinear(in.g, out_h, out_w),
          resize_bilinear(in.b, out_h, out_w)};
}

}  // namespace diffdepth
