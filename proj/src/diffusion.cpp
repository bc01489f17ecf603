#include "diffdepth/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "diffdepth/rng.hpp"

namespace diffdepth {

std::string to_string(Parameterization p) {
  return p == Parameterization::v ? "v" : "eps";
}

Parameterization parameterization_from_string(const std::string& s) {
  if (s == "v") return Parameterization::v;
  if (s == "eps") return Parameterization::eps;
  throw UsageError("unknown parameterization '" + s + "' (expected v|eps)");
}

DiffusionState forward_noise(const Grid& x, const Grid& eps, double t,
                             const CosineSchedule& sched) {
  require_same_shape(x, eps, "forward_noise");
  const auto [a, s] = sched.eval(t);
  Grid z(x.rows(), x.cols());
  for (int j = 0; j < x.cols(); ++j)
    for (int i = 0; i < x.rows(); ++i)
      z(i, j) = static_cast<float>(a * static_cast<double>(x(i, j)) +
                                   s * static_cast<double>(eps(i, j)));
  return {std::move(z), t};
}

Grid v_target(const Grid& x, const Grid& eps, double t,
              const CosineSchedule& sched) {
  require_same_shape(x, eps, "v_target");
  const auto [a, s] = sched.eval(t);
  Grid v(x.rows(), x.cols());
  for (int j = 0; j < x.cols(); ++j)
    for (int i = 0; i < x.rows(); ++i)
      v(i, j) = static_cast<float>(a * static_cast<double>(eps(i, j)) -
                                   s * static_cast<double>(x(i, j)));
  return v;
}

PredictionTriple recover_x_eps(const DiffusionState& state, const Grid& v_hat,
                               const CosineSchedule& sched) {
  require_same_shape(state.z, v_hat, "recover_x_eps");
  const auto [a, s] = sched.eval(state.t);
  PredictionTriple out{v_hat, Grid(v_hat.rows(), v_hat.cols()),
                       Grid(v_hat.rows(), v_hat.cols())};
  for (int j = 0; j < v_hat.cols(); ++j) {
    for (int i = 0; i < v_hat.rows(); ++i) {
      const double z = state.z(i, j), v = v_hat(i, j);
      out.x_hat(i, j) = static_cast<float>(a * z - s * v);
      out.eps_hat(i, j) = static_cast<float>(a * v + s * z);
    }
  }
  return out;
}

PredictionTriple recover_from_eps(const DiffusionState& state,
                                  const Grid& eps_hat,
                                  const CosineSchedule& sched) {
  require_same_shape(state.z, eps_hat, "recover_from_eps");
  const auto [a, s] = sched.eval(state.t);
  const double a_safe = std::max(a, kEpsAlphaFloor);
  PredictionTriple out{Grid(eps_hat.rows(), eps_hat.cols()),
                       Grid(eps_hat.rows(), eps_hat.cols()), eps_hat};
  for (int j = 0; j < eps_hat.cols(); ++j) {
    for (int i = 0; i < eps_hat.rows(); ++i) {
      const double z = state.z(i, j), e = eps_hat(i, j);
      const double x = (z - s * e) / a_safe;
      out.x_hat(i, j) = static_cast<float>(x);
      out.v_hat(i, j) = static_cast<float>(a * e - s * x);
    }
  }
  return out;
}

namespace {

double masked_mean_abs_diff(const Grid& a, const Grid& b, const Mask& mask,
                            const char* what) {
  require_same_shape(a, b, what);
  if (a.rows() != mask.rows() || a.cols() != mask.cols())
    throw DataError(std::string(what) + ": mask shape mismatch");
  double sum = 0.0;
  std::int64_t n = 0;
  for (int j = 0; j < a.cols(); ++j) {
    for (int i = 0; i < a.rows(); ++i) {
      if (!mask(i, j)) continue;
      sum += std::abs(static_cast<double>(a(i, j)) -
                      static_cast<double>(b(i, j)));
      ++n;
    }
  }
  if (n == 0) throw DataError(std::string(what) + ": empty mask");
  return sum / static_cast<double>(n);
}

}  // namespace

double loss_truncated_snr_l1(const Grid& x, const Grid& eps,
                             const PredictionTriple& pred, const Mask& mask) {
  const double lx = masked_mean_abs_diff(x, pred.x_hat, mask, "loss x branch");
  const double le =
      masked_mean_abs_diff(eps, pred.eps_hat, mask, "loss eps branch");
  return std::max(lx, le);
}

double loss_eps_l1(const Grid& eps, const Grid& eps_hat, const Mask& mask) {
  return masked_mean_abs_diff(eps, eps_hat, mask, "loss_eps_l1");
}

Grid average_samples(const std::vector<Grid>& samples) {
  if (samples.empty()) throw DataError("average_samples: no samples");
  const auto rows = samples[0].rows(), cols = samples[0].cols();
  Eigen::ArrayXXd acc = Eigen::ArrayXXd::Zero(rows, cols);
  for (const Grid& s : samples) {
    require_same_shape(samples[0], s, "average_samples");
    acc += s.cast<double>();
  }
  return (acc / static_cast<double>(samples.size())).cast<float>();
}

Grid ddpm_sample(const DenoiserFn& denoiser, const Image3& rgb,
                 std::optional<double> fov_cond, int steps,
                 std::uint64_t seed, const CosineSchedule& sched,
                 Parameterization param) {
  if (steps < 1) throw UsageError("ddpm_sample: steps must be >= 1");
  if (any_non_finite(rgb)) throw NumericError("ddpm_sample: non-finite rgb");
  const int h = rgb.height(), w = rgb.width();

  Rng rng(seed);
  Grid z(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) z(i, j) = static_cast<float>(rng.normal());

  for (int k = 0; k < steps; ++k) {
    const double t = static_cast<double>(steps - k) / steps;
    const double s = static_cast<double>(steps - k - 1) / steps;

    Grid out = denoiser(z, rgb, fov_cond, t);
    require_same_shape(z, out, "ddpm_sample: denoiser output");
    if (any_non_finite(out))
      throw NumericError("ddpm_sample: non-finite denoiser output at t=" +
                         std::to_string(t));

    const DiffusionState state{z, t};
    PredictionTriple pred = param == Parameterization::v
                                ? recover_x_eps(state, out, sched)
                                : recover_from_eps(state, out, sched);
    Grid x_hat = pred.x_hat.max(-1.0f).min(1.0f);
    if (k == steps - 1) return x_hat;

    const auto [at, st] = sched.eval(t);
    const auto [as, ss] = sched.eval(s);
    const double a_ts = at / as;
    const double var_ts = std::max(0.0, st * st - a_ts * a_ts * ss * ss);
    const double c_z = a_ts * (ss * ss) / (st * st);
    const double c_x = as * var_ts / (st * st);
    const double noise_std = std::sqrt(var_ts) * ss / st;
    for (int j = 0; j < w; ++j)
      for (int i = 0; i < h; ++i)
        z(i, j) = static_cast<float>(c_z * static_cast<double>(z(i, j)) +
                                     c_x * static_cast<double>(x_hat(i, j)) +
                                     noise_std * rng.normal());
  }
  return z;  // unreachable
}

}  // namespace diffdepth
