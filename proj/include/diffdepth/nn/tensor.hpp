#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

namespace diffdepth::nn {

// CHW dense tensor for a single sample.
template <typename T>
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_)
      : c(c_), h(h_), w(w_),
        v(static_cast<std::size_t>(c_) * h_ * w_, T(0)) {}

  int plane() const { return h * w; }
  std::size_t size() const { return v.size(); }

  T& at(int ci, int y, int x) {
    return v[(static_cast<std::size_t>(ci) * h + y) * w + x];
  }
  T at(int ci, int y, int x) const {
    return v[(static_cast<std::size_t>(ci) * h + y) * w + x];
  }

  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  // (c x h*w) row-per-channel view.
  auto rows() {
    return Eigen::Map<
        Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        v.data(), c, plane());
  }
  auto rows() const {
    return Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic,
                                          Eigen::RowMajor>>(v.data(), c,
                                                            plane());
  }
};

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

}  // namespace diffdepth::nn
