#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "diffdepth/grid.hpp"
#include "diffdepth/schedule.hpp"

namespace diffdepth {

enum class Parameterization { v, eps };

std::string to_string(Parameterization p);
Parameterization parameterization_from_string(const std::string& s);

// A noised encoded-depth grid together with its diffusion time.
struct DiffusionState {
  Grid z;
  double t = 0.0;
};

// z_t = alpha(t) x + sigma(t) eps.
DiffusionState forward_noise(const Grid& x, const Grid& eps, double t,
                             const CosineSchedule& sched);

// v = alpha(t) eps - sigma(t) x.
Grid v_target(const Grid& x, const Grid& eps, double t,
              const CosineSchedule& sched);

struct PredictionTriple {
  Grid v_hat, x_hat, eps_hat;
};

// Inverts the v parameterization:
//   x_hat = alpha z - sigma v_hat,  eps_hat = alpha v_hat + sigma z.
// Pure algebra, no clipping (the sampler clips x_hat itself).
PredictionTriple recover_x_eps(const DiffusionState& state, const Grid& v_hat,
                               const CosineSchedule& sched);

// Division by alpha blows up at t=1 (alpha=0); the floor keeps the one-step
// eps sampler finite.
inline constexpr double kEpsAlphaFloor = 1e-4;

// Inverts the eps parameterization: x_hat = (z - sigma eps_hat) / max(alpha,
// kEpsAlphaFloor), v_hat = alpha eps_hat - sigma x_hat.
PredictionTriple recover_from_eps(const DiffusionState& state,
                                  const Grid& eps_hat,
                                  const CosineSchedule& sched);

// max(mean_mask |x - x_hat|, mean_mask |eps - eps_hat|). The branches are the
// same v-space L1 rescaled, so this equals max(alpha, sigma) * mean|v - v_hat|
// when the predictions come from recover_x_eps. Throws DataError on an empty
// mask.
double loss_truncated_snr_l1(const Grid& x, const Grid& eps,
                             const PredictionTriple& pred, const Mask& mask);

// Plain masked L1 on eps (the eps-parameterization baseline).
double loss_eps_l1(const Grid& eps, const Grid& eps_hat, const Mask& mask);

// Pixelwise mean in double precision; all grids must share a shape.
Grid average_samples(const std::vector<Grid>& samples);

// Denoiser interface used by the sampler: (z, rgb, fov_cond, t) -> model
// output in the configured parameterization.
using DenoiserFn = std::function<Grid(
    const Grid& z, const Image3& rgb, std::optional<double> fov_cond, double t)>;

// Ancestral DDPM sampler on the uniform grid t_k = (steps - k)/steps.
// x_hat is clipped to [-1, 1] every step; the transition to s uses the
// "small" posterior variance sigma_{t|s} sigma_s / sigma_t and the final step
// (s = 0) returns x_hat directly. Identical seeds give identical samples.
// Throws NumericError if the denoiser emits non-finite values.
Grid ddpm_sample(const DenoiserFn& denoiser, const Image3& rgb,
                 std::optional<double> fov_cond, int steps,
                 std::uint64_t seed, const CosineSchedule& sched,
                 Parameterization param);

}  // namespace diffdepth
