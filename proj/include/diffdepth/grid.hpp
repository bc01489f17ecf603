#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "diffdepth/error.hpp"

namespace diffdepth {

// Single-channel raster, (row, col) indexed, row 0 at the top.
using Grid = Eigen::ArrayXXf;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline Grid make_grid(int height, int width, float fill = 0.0f) {
  return Grid::Constant(height, width, fill);
}

inline Mask make_mask(int height, int width, bool fill = true) {
  return Mask::Constant(height, width, fill);
}

// RGB raster with values in [-1, 1] for rendered content (augmentation noise
// padding may exceed that range).
struct Image3 {
  Grid r, g, b;

  int height() const { return static_cast<int>(r.rows()); }
  int width() const { return static_cast<int>(r.cols()); }

  Grid& channel(int i) { return i == 0 ? r : (i == 1 ? g : b); }
  const Grid& channel(int i) const { return i == 0 ? r : (i == 1 ? g : b); }

  static Image3 zeros(int height, int width) {
    return {make_grid(height, width), make_grid(height, width),
            make_grid(height, width)};
  }
};

// Metric depth in meters plus per-pixel validity. Values at invalid pixels
// are unspecified (writers store 0).
struct DepthMap {
  Grid values;
  Mask valid;

  int height() const { return static_cast<int>(values.rows()); }
  int width() const { return static_cast<int>(values.cols()); }
};

inline void require_same_shape(const Grid& a, const Grid& b,
                               const std::string& what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DataError(what + ": shape mismatch (" + std::to_string(a.rows()) +
                    "x" + std::to_string(a.cols()) + " vs " +
                    std::to_string(b.rows()) + "x" + std::to_string(b.cols()) +
                    ")");
}

inline void validate_depth_map(const DepthMap& d, const std::string& what) {
  if (d.values.rows() != d.valid.rows() || d.values.cols() != d.valid.cols())
    throw DataError(what + ": depth/valid shape mismatch");
  if (d.values.size() == 0) throw DataError(what + ": empty depth map");
  for (int j = 0; j < d.values.cols(); ++j)
    for (int i = 0; i < d.values.rows(); ++i)
      if (d.valid(i, j) && !(d.values(i, j) > 0.0f))
        throw DataError(what + ": non-positive depth at valid pixel (" +
                        std::to_string(i) + "," + std::to_string(j) + ")");
}

inline bool any_non_finite(const Grid& g) { return !g.isFinite().all(); }

inline bool any_non_finite(const Image3& img) {
  return any_non_finite(img.r) || any_non_finite(img.g) || any_non_finite(img.b);
}

}  // namespace diffdepth
