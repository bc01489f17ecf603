#include "diffdepth/camera.hpp"

#include <cmath>
#include <numbers>

#include "diffdepth/resize.hpp"
#include "diffdepth/rng.hpp"

namespace diffdepth {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
}

void CameraSpec::validate() const {
  if (height_px < 1 || width_px < 1)
    throw DataError("camera: non-positive resolution");
  if (!(vertical_fov_deg > 0.0 && vertical_fov_deg < 180.0))
    throw DataError("camera: vertical fov must lie in (0, 180) degrees");
}

double fov_to_cond(double vertical_fov_deg) {
  if (!(vertical_fov_deg > 0.0 && vertical_fov_deg < 180.0))
    throw DataError("fov_to_cond: fov out of (0, 180)");
  return std::tan(0.5 * vertical_fov_deg * kDegToRad);
}

double focal_from_fov(double vertical_fov_deg, int height_px) {
  if (height_px < 1) throw DataError("focal_from_fov: bad height");
  return height_px / (2.0 * fov_to_cond(vertical_fov_deg));
}

double fov_from_focal(double focal_px, int height_px) {
  if (!(focal_px > 0.0) || height_px < 1)
    throw DataError("fov_from_focal: bad arguments");
  return 2.0 * std::atan(height_px / (2.0 * focal_px)) / kDegToRad;
}

void FovAugConfig::validate() const {
  if (!(scale_min > 0.0) || !(scale_max >= scale_min))
    throw UsageError("fov_aug requires 0 < scale_min <= scale_max");
  if (!(pad_noise_std >= 0.0))
    throw UsageError("fov_aug requires pad_noise_std >= 0");
}

FovAugmented fov_augment(const Image3& rgb, const DepthMap& depth,
                         const CameraSpec& camera, double scale,
                         std::uint64_t seed, const FovAugConfig& cfg) {
  camera.validate();
  cfg.validate();
  if (!(scale > 0.0)) throw DataError("fov_augment: scale must be positive");
  const int h = camera.height_px, w = camera.width_px;
  if (rgb.height() != h || rgb.width() != w || depth.height() != h ||
      depth.width() != w)
    throw DataError("fov_augment: rgb/depth shape does not match camera");

  const double cond = scale * fov_to_cond(camera.vertical_fov_deg);
  CameraSpec out_cam{h, w, 2.0 * std::atan(cond) / kDegToRad};
  out_cam.validate();

  if (scale == 1.0) return {rgb, depth, out_cam};

  if (scale < 1.0) {
    const int ch = std::max(1, static_cast<int>(std::lround(scale * h)));
    const int cw = std::max(1, static_cast<int>(std::lround(scale * w)));
    const int r0 = (h - ch) / 2, c0 = (w - cw) / 2;
    Image3 crop{rgb.r.block(r0, c0, ch, cw), rgb.g.block(r0, c0, ch, cw),
                rgb.b.block(r0, c0, ch, cw)};
    DepthMap dcrop{depth.values.block(r0, c0, ch, cw),
                   depth.valid.block(r0, c0, ch, cw)};
    return {resize_bilinear(crop, h, w),
            {resize_nearest(dcrop.values, h, w), resize_nearest(dcrop.valid, h, w)},
            out_cam};
  }

  const int ch = static_cast<int>(std::lround(scale * h));
  const int cw = static_cast<int>(std::lround(scale * w));
  const int r0 = (ch - h) / 2, c0 = (cw - w) / 2;
  Rng rng(seed);
  Image3 canvas = Image3::zeros(ch, cw);
  for (int c = 0; c < 3; ++c) {
    Grid& ch_grid = canvas.channel(c);
    for (int i = 0; i < ch; ++i)
      for (int j = 0; j < cw; ++j)
        ch_grid(i, j) = static_cast<float>(cfg.pad_noise_std * rng.normal());
    ch_grid.block(r0, c0, h, w) = rgb.channel(c);
  }
  Grid dvals = make_grid(ch, cw, 0.0f);
  Mask dvalid = make_mask(ch, cw, false);
  dvals.block(r0, c0, h, w) = depth.values;
  dvalid.block(r0, c0, h, w) = depth.valid;
  return {resize_bilinear(canvas, h, w),
          {resize_nearest(dvals, h, w), resize_nearest(dvalid, h, w)},
          out_cam};
}

double perturb_fov_cond(double cond, double factor) {
  if (!(factor > 0.0)) throw DataError("perturb_fov_cond: factor must be > 0");
  return cond * factor;
}

}  // namespace diffdepth
