#pragma once

#include <string>

#include "diffdepth/grid.hpp"

namespace diffdepth {

enum class DepthEncoding { linear, log };

std::string to_string(DepthEncoding mode);
DepthEncoding depth_encoding_from_string(const std::string& s);

struct DepthCodecConfig {
  DepthEncoding mode = DepthEncoding::log;
  double d_min = 0.5;  // meters
  double d_max = 80.0;

  void validate() const;
};

// clip(2u - 1, -1, 1) for u nominally in [0, 1].
double normalize_unit(double u);

// Scalar maps in double; the grid forms apply these per pixel and quantize
// through float storage.
double encode_value(double d, const DepthCodecConfig& cfg);
double decode_value(double e, const DepthCodecConfig& cfg);

// Encoded depth in [-1, 1]; invalid pixels hold the 0.0 placeholder.
struct EncodedDepth {
  Grid values;
  Mask valid;
};

// linear: e = clip(2 d / d_max - 1);  log: e = clip(2 log(d/d_min)/log(d_max/d_min) - 1).
// Throws DataError on a non-positive depth at a valid pixel.
EncodedDepth encode(const DepthMap& depth, const DepthCodecConfig& cfg);

// Inverse map over [-1, 1] (input clipped). linear decodes -1 to 0 and is
// floored at d_min; log decodes -1/+1 to exactly d_min/d_max. Output is fully
// valid.
DepthMap decode(const Grid& encoded, const DepthCodecConfig& cfg);

// Fills every invalid pixel with the value of the nearest valid pixel
// (Euclidean distance between pixel centers; ties broken by smallest
// row-major index). Throws DataError if no pixel is valid.
DepthMap infill_nearest(const DepthMap& depth);

}  // namespace diffdepth
