#include "diffdepth/depth_codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace diffdepth {

std::string to_string(DepthEncoding mode) {
  return mode == DepthEncoding::linear ? "linear" : "log";
}

DepthEncoding depth_encoding_from_string(const std::string& s) {
  if (s == "linear") return DepthEncoding::linear;
  if (s == "log") return DepthEncoding::log;
  throw UsageError("unknown depth encoding '" + s + "' (expected linear|log)");
}

void DepthCodecConfig::validate() const {
  if (!(d_min > 0.0) || !(d_max > d_min))
    throw UsageError("depth codec requires 0 < d_min < d_max");
}

double normalize_unit(double u) { return std::clamp(2.0 * u - 1.0, -1.0, 1.0); }

double encode_value(double d, const DepthCodecConfig& cfg) {
  if (cfg.mode == DepthEncoding::linear) return normalize_unit(d / cfg.d_max);
  return normalize_unit(std::log(d / cfg.d_min) /
                        std::log(cfg.d_max / cfg.d_min));
}

double decode_value(double e, const DepthCodecConfig& cfg) {
  const double u = 0.5 * (std::clamp(e, -1.0, 1.0) + 1.0);
  if (cfg.mode == DepthEncoding::linear)
    return std::max(cfg.d_min, u * cfg.d_max);
  return cfg.d_min * std::exp(u * std::log(cfg.d_max / cfg.d_min));
}

EncodedDepth encode(const DepthMap& depth, const DepthCodecConfig& cfg) {
  cfg.validate();
  validate_depth_map(depth, "encode");
  EncodedDepth out{make_grid(depth.height(), depth.width(), 0.0f), depth.valid};
  for (int j = 0; j < depth.width(); ++j) {
    for (int i = 0; i < depth.height(); ++i) {
      if (!depth.valid(i, j)) continue;  // keep the 0.0 placeholder
      out.values(i, j) =
          static_cast<float>(encode_value(depth.values(i, j), cfg));
    }
  }
  return out;
}

DepthMap decode(const Grid& encoded, const DepthCodecConfig& cfg) {
  cfg.validate();
  DepthMap out{make_grid(static_cast<int>(encoded.rows()),
                         static_cast<int>(encoded.cols())),
               make_mask(static_cast<int>(encoded.rows()),
                         static_cast<int>(encoded.cols()), true)};
  for (int j = 0; j < encoded.cols(); ++j) {
    for (int i = 0; i < encoded.rows(); ++i)
      out.values(i, j) = static_cast<float>(decode_value(encoded(i, j), cfg));
  }
  return out;
}

DepthMap infill_nearest(const DepthMap& depth) {
  validate_depth_map(depth, "infill_nearest");
  const int h = depth.height(), w = depth.width();
  if (!depth.valid.any()) throw DataError("infill_nearest: no valid pixels");

  DepthMap out{depth.values, make_mask(h, w, true)};
  const int max_r = std::max(h, w);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (depth.valid(i, j)) continue;
      std::int64_t best_d2 = -1;
      std::int64_t best_idx = -1;
      // Ring r can only improve on best_d2 while r^2 <= best_d2.
      for (int r = 1; r <= max_r; ++r) {
        if (best_d2 >= 0 && static_cast<std::int64_t>(r) * r > best_d2) break;
        for (int di = -r; di <= r; ++di) {
          const int ii = i + di;
          if (ii < 0 || ii >= h) continue;
          const bool edge_row = std::abs(di) == r;
          const int step = edge_row ? 1 : 2 * r;
          for (int dj = -r; dj <= r; dj += step) {
            const int jj = j + dj;
            if (jj < 0 || jj >= w || !depth.valid(ii, jj)) continue;
            const std::int64_t d2 =
                static_cast<std::int64_t>(di) * di +
                static_cast<std::int64_t>(dj) * dj;
            const std::int64_t idx = static_cast<std::int64_t>(ii) * w + jj;
            if (best_d2 < 0 || d2 < best_d2 ||
                (d2 == best_d2 && idx < best_idx)) {
              best_d2 = d2;
              best_idx = idx;
            }
          }
        }
      }
      out.values(i, j) = depth.values(best_idx / w, best_idx % w);
    }
  }
  return out;
}

}  // namespace diffdepth
