#pragma once

#include <cmath>
#include <numbers>
#include <string_view>

#include "diffdepth/error.hpp"

namespace diffdepth {

// Variance-preserving cosine schedule on continuous t in [0, 1]:
//   alpha(t) = cos(pi t / 2),  sigma(t) = sin(pi t / 2)
// so alpha(0)=1, alpha(1)=0, alpha^2 + sigma^2 = 1, alpha strictly decreasing
// and sigma strictly increasing.
struct CosineSchedule {
  double alpha(double t) const {
    check(t);
    return std::cos(0.5 * std::numbers::pi * t);
  }

  double sigma(double t) const {
    check(t);
    return std::sin(0.5 * std::numbers::pi * t);
  }

  struct AlphaSigma {
    double alpha, sigma;
  };

  AlphaSigma eval(double t) const { return {alpha(t), sigma(t)}; }

  static std::string_view name() { return "cosine"; }

 private:
  static void check(double t) {
    if (!(t >= 0.0 && t <= 1.0))
      throw DataError("schedule time out of [0, 1]: " + std::to_string(t));
  }
};

}  // namespace diffdepth
