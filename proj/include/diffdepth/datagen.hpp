#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffdepth/render.hpp"

namespace diffdepth {

struct GenSpec {
  std::string regime_mix = "indoor";  // indoor | outdoor | mixed
  int n = 1;
  int height = 64, width = 64;
  double fov_lo = 55.0, fov_hi = 85.0;
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const;
};

// Seeded procedural set: per-sample scene, FOV, and render seeds are derived
// from (seed, index), so the worker count never changes the output. "mixed"
// alternates indoor/outdoor starting with indoor.
std::vector<RenderedSample> generate_samples(const GenSpec& spec);

}  // namespace diffdepth
