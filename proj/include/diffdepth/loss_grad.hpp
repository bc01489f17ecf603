#pragma once

#include <cmath>
#include <cstdint>

#include "diffdepth/diffusion.hpp"
#include "diffdepth/error.hpp"
#include "diffdepth/grid.hpp"
#include "diffdepth/nn/tensor.hpp"
#include "diffdepth/schedule.hpp"

namespace diffdepth {

template <typename T>
struct MaskedLossGrad {
  double loss = 0.0;
  nn::Tensor<T> dout;  // d(loss)/d(model output), zero off-mask
};

// Training loss and its exact subgradient wrt the raw model output, with all
// reductions in double. v mode: max(mean|x - x_hat|, mean|eps - eps_hat|),
// ties taking the x branch; eps mode: mean|eps - eps_hat|. Masked-out pixels
// contribute nothing to either.
template <typename T>
MaskedLossGrad<T> masked_loss_grad(
    Parameterization param,
    const Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic>& x_target,
    const Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic>& eps_target,
    const Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic>& z,
    const nn::Tensor<T>& out, const Mask& mask, double t,
    const CosineSchedule& sched = {}) {
  const auto [a, s] = sched.eval(t);
  const int h = static_cast<int>(x_target.rows());
  const int w = static_cast<int>(x_target.cols());
  std::int64_t n = 0;
  for (int j = 0; j < w; ++j)
    for (int i = 0; i < h; ++i) n += mask(i, j);
  if (n == 0) throw DataError("masked_loss_grad: empty loss mask");

  MaskedLossGrad<T> lg;
  lg.dout = nn::Tensor<T>(1, h, w);
  const double inv_n = 1.0 / static_cast<double>(n);

  if (param == Parameterization::v) {
    // x_hat = a z - s v_hat ; eps_hat = a v_hat + s z
    double loss_x = 0.0, loss_e = 0.0;
    for (int j = 0; j < w; ++j) {
      for (int i = 0; i < h; ++i) {
        if (!mask(i, j)) continue;
        const double v_hat = out.at(0, i, j);
        const double zd = z(i, j);
        loss_x += std::abs(x_target(i, j) - (a * zd - s * v_hat));
        loss_e += std::abs(eps_target(i, j) - (a * v_hat + s * zd));
      }
    }
    loss_x *= inv_n;
    loss_e *= inv_n;
    const bool x_branch = loss_x >= loss_e;  // ties take the x branch
    lg.loss = x_branch ? loss_x : loss_e;
    for (int j = 0; j < w; ++j) {
      for (int i = 0; i < h; ++i) {
        if (!mask(i, j)) continue;
        const double v_hat = out.at(0, i, j);
        const double zd = z(i, j);
        double g;
        if (x_branch) {
          const double e = x_target(i, j) - (a * zd - s * v_hat);
          g = s * inv_n * (e > 0 ? 1.0 : (e < 0 ? -1.0 : 0.0));
        } else {
          const double e = eps_target(i, j) - (a * v_hat + s * zd);
          g = -a * inv_n * (e > 0 ? 1.0 : (e < 0 ? -1.0 : 0.0));
        }
        lg.dout.at(0, i, j) = static_cast<T>(g);
      }
    }
  } else {
    double loss = 0.0;
    for (int j = 0; j < w; ++j) {
      for (int i = 0; i < h; ++i) {
        if (!mask(i, j)) continue;
        const double e = eps_target(i, j) - out.at(0, i, j);
        loss += std::abs(e);
        lg.dout.at(0, i, j) =
            static_cast<T>(-inv_n * (e > 0 ? 1.0 : (e < 0 ? -1.0 : 0.0)));
      }
    }
    lg.loss = loss * inv_n;
  }
  return lg;
}

}  // namespace diffdepth
