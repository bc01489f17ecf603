#include "diffdepth/scene.hpp"

#include <cmath>
#include <numbers>

#include "diffdepth/rng.hpp"

namespace diffdepth {

std::string to_string(Regime r) {
  return r == Regime::indoor ? "indoor" : "outdoor";
}

Regime regime_from_string(const std::string& s) {
  if (s == "indoor") return Regime::indoor;
  if (s == "outdoor") return Regime::outdoor;
  throw UsageError("unknown regime '" + s + "' (expected indoor|outdoor)");
}

RegimeRange regime_range(Regime r) {
  return r == Regime::indoor ? RegimeRange{0.5, 10.0} : RegimeRange{0.5, 80.0};
}

namespace {

const Vec3 kPalette[8] = {
    {0.85, 0.30, 0.25}, {0.30, 0.60, 0.85}, {0.35, 0.70, 0.40},
    {0.90, 0.75, 0.30}, {0.60, 0.45, 0.75}, {0.80, 0.55, 0.35},
    {0.55, 0.75, 0.80}, {0.75, 0.75, 0.70}};

Vec3 pick_albedo(Rng& rng) {
  Vec3 base = kPalette[rng.uniform_int(8)];
  for (int i = 0; i < 3; ++i)
    base[i] = std::clamp(base[i] + rng.uniform(-0.08, 0.08), 0.05, 0.95);
  return base;
}

Vec3 jitter(const Vec3& base, Rng& rng, double amp) {
  Vec3 out = base;
  for (int i = 0; i < 3; ++i)
    out[i] = std::clamp(out[i] + rng.uniform(-amp, amp), 0.05, 0.95);
  return out;
}

// Direction toward the light; negative y is up.
Vec3 sample_light(Rng& rng, double min_elev, double max_elev) {
  const double az = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double el = rng.uniform(min_elev, max_elev);
  return Vec3(std::cos(az) * std::cos(el), -std::sin(el),
              std::sin(az) * std::cos(el))
      .normalized();
}

void add_indoor(Scene& scene, Rng& rng) {
  const double cam_h = rng.uniform(1.25, 1.55);   // camera above floor
  const double room_h = rng.uniform(2.3, 3.1);    // floor to ceiling
  const double dxl = rng.uniform(1.0, 4.5);       // wall clearances
  const double dxr = rng.uniform(1.0, 4.5);
  const double zb = rng.uniform(2.8, 9.0);        // back wall
  const double zk = rng.uniform(0.7, 1.0);        // wall behind the camera

  Box room;
  room.center = Vec3((dxr - dxl) / 2.0, cam_h - room_h / 2.0, (zb - zk) / 2.0);
  room.half = Vec3((dxl + dxr) / 2.0, room_h / 2.0, (zb + zk) / 2.0);
  room.albedo = jitter(Vec3(0.75, 0.73, 0.70), rng, 0.06);
  room.interior = true;
  scene.primitives.push_back(room);

  const int n = 3 + static_cast<int>(rng.uniform_int(6));
  for (int k = 0; k < n; ++k) {
    const bool is_box = rng.bernoulli(0.5);
    const double z = rng.uniform(1.3, std::max(1.4, zb - 0.4));
    const double x = rng.uniform(-dxl + 0.5, dxr - 0.5);
    const Vec3 albedo = pick_albedo(rng);
    if (is_box) {
      Vec3 half(rng.uniform(0.15, 0.45), rng.uniform(0.15, 0.45),
                rng.uniform(0.15, 0.45));
      const double y = rng.bernoulli(0.6) ? cam_h - half.y()
                                          : rng.uniform(cam_h - 2.0, cam_h - 0.4);
      scene.primitives.push_back(Box{Vec3(x, y, z), half, albedo, false});
    } else {
      const double r = rng.uniform(0.22, 0.38);
      const double y =
          rng.bernoulli(0.6) ? cam_h - r : rng.uniform(cam_h - 2.0, cam_h - 0.4);
      scene.primitives.push_back(Sphere{Vec3(x, y, z), r, albedo});
    }
  }
  scene.light_dir = sample_light(rng, 0.5, 1.2);
}

void add_outdoor(Scene& scene, Rng& rng) {
  Plane ground;
  ground.point = Vec3(0.0, 1.5, 0.0);  // camera 1.5 m above the ground
  ground.normal = Vec3(0.0, -1.0, 0.0);
  ground.albedo = jitter(Vec3(0.38, 0.50, 0.30), rng, 0.07);
  scene.primitives.push_back(ground);

  const int n = 4 + static_cast<int>(rng.uniform_int(7));
  for (int k = 0; k < n; ++k) {
    const bool is_box = rng.bernoulli(0.6);
    const double z = 5.0 * std::pow(13.0, rng.uniform());  // log-uniform 5-65 m
    const double x = rng.uniform(-0.45, 0.45) * z;
    const Vec3 albedo = pick_albedo(rng);
    if (is_box) {
      Vec3 half(rng.uniform(0.6, 2.0), rng.uniform(0.7, 1.8),
                rng.uniform(0.6, 2.0));
      scene.primitives.push_back(
          Box{Vec3(x, 1.5 - half.y(), z), half, albedo, false});
    } else {
      const double r = rng.uniform(0.6, 1.8);
      scene.primitives.push_back(Sphere{Vec3(x, 1.5 - r, z), r, albedo});
    }
  }
  scene.light_dir = sample_light(rng, 0.35, 1.2);
}

}  // namespace

Scene generate_scene(Regime regime, std::uint64_t seed) {
  Rng rng(derive_seed(seed, /*stream=*/1));
  Scene scene;
  scene.regime = regime;
  scene.id = to_string(regime) + "-" + std::to_string(seed);
  if (regime == Regime::indoor)
    add_indoor(scene, rng);
  else
    add_outdoor(scene, rng);
  return scene;
}

Scene scale_scene(const Scene& scene, double k) {
  if (!(k > 0.0)) throw DataError("scale_scene: k must be positive");
  Scene out = scene;
  out.id = scene.id + "@" + std::to_string(k);
  for (Primitive& p : out.primitives) {
    if (auto* b = std::get_if<Box>(&p)) {
      b->center *= k;
      b->half *= k;
    } else if (auto* s = std::get_if<Sphere>(&p)) {
      s->center *= k;
      s->radius *= k;
    } else if (auto* pl = std::get_if<Plane>(&p)) {
      pl->point *= k;
    }
  }
  return out;
}

}  // namespace diffdepth
