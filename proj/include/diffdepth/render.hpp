#pragma once

#include <cstdint>

#include "diffdepth/camera.hpp"
#include "diffdepth/grid.hpp"
#include "diffdepth/scene.hpp"

namespace diffdepth {

struct RenderedSample {
  Image3 rgb;       // [-1, 1]
  DepthMap depth;   // z-depth in meters, invalid at sky / out-of-range hits
  CameraSpec camera;
  Regime regime = Regime::indoor;
  std::string scene_id;
  std::uint64_t render_seed = 0;
};

// Deterministic pinhole raycast: (scene, camera, seed) fully determine the
// sample. Depth is distance along the optical axis. Sky pixels get a horizon
// gradient and invalid depth; surface hits outside the regime's range keep
// their shaded RGB but are marked invalid.
RenderedSample render(const Scene& scene, const CameraSpec& camera,
                      std::uint64_t seed);

}  // namespace diffdepth
