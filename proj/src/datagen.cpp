#include "diffdepth/datagen.hpp"

#include "diffdepth/error.hpp"
#include "diffdepth/rng.hpp"
#include "diffdepth/scene.hpp"
#include "diffdepth/threading.hpp"

namespace diffdepth {

void GenSpec::validate() const {
  if (regime_mix != "indoor" && regime_mix != "outdoor" && regime_mix != "mixed")
    throw UsageError("regime must be indoor, outdoor, or mixed");
  if (n < 1) throw UsageError("sample count must be >= 1");
  if (height < 8 || width < 8) throw UsageError("resolution too small");
  if (!(fov_lo > 0.0) || !(fov_hi < 180.0) || fov_lo > fov_hi)
    throw UsageError("fov range must satisfy 0 < lo <= hi < 180");
  if (workers < 1) throw UsageError("workers must be >= 1");
}

std::vector<RenderedSample> generate_samples(const GenSpec& spec) {
  spec.validate();
  std::vector<RenderedSample> out(static_cast<std::size_t>(spec.n));
  parallel_for(0, spec.n, spec.workers, [&](int i) {
    Regime regime = Regime::indoor;
    if (spec.regime_mix == "outdoor") regime = Regime::outdoor;
    if (spec.regime_mix == "mixed" && i % 2 != 0) regime = Regime::outdoor;
    Rng rng(derive_seed(spec.seed, 1, i));
    CameraSpec camera{spec.height, spec.width,
                      rng.uniform(spec.fov_lo, spec.fov_hi)};
    out[static_cast<std::size_t>(i)] =
        render(generate_scene(regime, derive_seed(spec.seed, 0, i)), camera,
               derive_seed(spec.seed, 2, i));
  });
  return out;
}

}  // namespace diffdepth
