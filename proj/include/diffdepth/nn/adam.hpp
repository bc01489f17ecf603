#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "diffdepth/error.hpp"

namespace diffdepth::nn {

// Adam over a flat parameter vector; callers step with matching (param, grad)
// views in a stable order.
template <typename T>
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  std::int64_t step_count() const { return t_; }

  // Call once per optimizer step before the per-parameter updates.
  void begin_step() {
    ++t_;
    bc1_ = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    bc2_ = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    cursor_ = 0;
  }

  void update(T* param, const T* grad, std::size_t n) {
    if (cursor_ + n > m_.size()) {
      m_.resize(cursor_ + n, 0.0);
      v_.resize(cursor_ + n, 0.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double g = grad[i];
      double& m = m_[cursor_ + i];
      double& v = v_[cursor_ + i];
      m = beta1_ * m + (1.0 - beta1_) * g;
      v = beta2_ * v + (1.0 - beta2_) * g * g;
      const double mh = m / bc1_;
      const double vh = v / bc2_;
      param[i] = static_cast<T>(param[i] - lr_ * mh / (std::sqrt(vh) + eps_));
    }
    cursor_ += n;
  }

  void end_step(std::size_t expected_total) {
    if (cursor_ != expected_total)
      throw NumericError("adam: parameter walk size changed between steps");
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  double bc1_ = 1.0, bc2_ = 1.0;
  std::size_t cursor_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace diffdepth::nn
