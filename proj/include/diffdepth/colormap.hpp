#pragma once

#include "diffdepth/grid.hpp"

namespace diffdepth {

// Depth preview for PPM output: a fixed 5-stop ramp (dark blue near, yellow
// far) over the per-image valid min/max; invalid pixels are dark gray.
// Visual aid only, never used in metrics.
Image3 colorize_depth(const DepthMap& depth);

}  // namespace diffdepth
