#pragma once

#include <cstdint>

#include "diffdepth/grid.hpp"

namespace diffdepth {

// Pinhole camera with square pixels; fov is the full vertical field of view.
struct CameraSpec {
  int height_px = 0;
  int width_px = 0;
  double vertical_fov_deg = 0.0;

  void validate() const;
};

// The scalar FOV conditioning signal: tan(theta/2).
double fov_to_cond(double vertical_fov_deg);

// f = H / (2 tan(theta/2)), in pixels.
double focal_from_fov(double vertical_fov_deg, int height_px);
double fov_from_focal(double focal_px, int height_px);

struct FovAugConfig {
  double scale_min = 0.8;
  double scale_max = 1.5;
  double pad_noise_std = 1.0;

  void validate() const;
};

struct FovAugmented {
  Image3 rgb;
  DepthMap depth;
  CameraSpec camera;  // same pixel grid, adjusted vertical_fov_deg
};

// Simulates a FOV change at fixed resolution. scale < 1 takes a centered
// crop (narrower FOV), scale > 1 pads with i.i.d. N(0, pad_noise_std^2) RGB
// noise and invalid depth (wider FOV); both resize back to the input
// resolution (RGB bilinear, depth/valid nearest). The output camera satisfies
// tan(theta'/2) = scale * tan(theta/2) exactly. Identical seeds give
// identical padding noise.
FovAugmented fov_augment(const Image3& rgb, const DepthMap& depth,
                         const CameraSpec& camera, double scale,
                         std::uint64_t seed, const FovAugConfig& cfg);

// Multiplies the conditioning signal by `factor` (> 0) to simulate a
// miscalibrated intrinsics estimate.
double perturb_fov_cond(double cond, double factor);

}  // namespace diffdepth
