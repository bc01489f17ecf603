#include "diffdepth/colormap.hpp"

#include <algorithm>
#include <cmath>

namespace diffdepth {

namespace {

struct Stop {
  double u, r, g, b;
};

// Compact viridis-like ramp, dark blue through teal to yellow.
constexpr Stop kStops[] = {
    {0.00, 0.267, 0.005, 0.329}, {0.25, 0.229, 0.322, 0.546},
    {0.50, 0.127, 0.566, 0.551}, {0.75, 0.369, 0.789, 0.383},
    {1.00, 0.993, 0.906, 0.144},
};

void ramp(double u, double& r, double& g, double& b) {
  u = std::clamp(u, 0.0, 1.0);
  constexpr int n = static_cast<int>(std::size(kStops));
  for (int i = 1; i < n; ++i) {
    if (u <= kStops[i].u || i == n - 1) {
      const Stop& a = kStops[i - 1];
      const Stop& c = kStops[i];
      const double w = (u - a.u) / (c.u - a.u);
      r = a.r + w * (c.r - a.r);
      g = a.g + w * (c.g - a.g);
      b = a.b + w * (c.b - a.b);
      return;
    }
  }
}

}  // namespace

Image3 colorize_depth(const DepthMap& depth) {
  validate_depth_map(depth, "colorize");
  const auto h = depth.values.rows();
  const auto w = depth.values.cols();
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < w; ++j) {
      if (!depth.valid(i, j)) continue;
      const double d = depth.values(i, j);
      if (!any) {
        lo = hi = d;
        any = true;
      } else {
        lo = std::min(lo, d);
        hi = std::max(hi, d);
      }
    }
  }
  const double span = hi - lo;
  Image3 out = Image3::zeros(h, w);
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < w; ++j) {
      double r = 0.15, g = 0.15, b = 0.15;
      if (depth.valid(i, j)) {
        const double u =
            span > 0.0 ? (depth.values(i, j) - lo) / span : 0.5;
        ramp(u, r, g, b);
      }
      // write_ppm maps [-1, 1] to [0, 255]
      out.r(i, j) = static_cast<float>(2.0 * r - 1.0);
      out.g(i, j) = static_cast<float>(2.0 * g - 1.0);
      out.b(i, j) = static_cast<float>(2.0 * b - 1.0);
    }
  }
  return out;
}

}  // namespace diffdepth
