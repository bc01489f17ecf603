#include "diffdepth/render.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace diffdepth {

namespace {

constexpr double kRayEps = 1e-9;

struct Hit {
  double t;      // ray parameter == z-depth (direction has unit z)
  Vec3 normal;   // unit, facing the camera
  Vec3 albedo;
};

// Rays start at the origin; dir.z() == 1.
std::optional<Hit> intersect_box(const Box& b, const Vec3& dir) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int near_axis = -1, far_axis = -1;
  double near_sign = 0.0, far_sign = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double lo = b.center[a] - b.half[a], hi = b.center[a] + b.half[a];
    if (std::abs(dir[a]) < 1e-15) {
      if (lo > 0.0 || hi < 0.0) return std::nullopt;
      continue;
    }
    double t0 = lo / dir[a], t1 = hi / dir[a];
    double sign = -1.0;  // entering through the low face
    if (t0 > t1) {
      std::swap(t0, t1);
      sign = 1.0;
    }
    if (t0 > t_near) {
      t_near = t0;
      near_axis = a;
      near_sign = sign;
    }
    if (t1 < t_far) {
      t_far = t1;
      far_axis = a;
      far_sign = -sign;
    }
    if (t_near > t_far) return std::nullopt;
  }
  if (b.interior) {
    // Camera inside: hit the exit face, normal pointing back inside.
    if (t_far <= kRayEps || far_axis < 0) return std::nullopt;
    Vec3 n = Vec3::Zero();
    n[far_axis] = -far_sign;
    return Hit{t_far, n, b.albedo};
  }
  if (t_near <= kRayEps || near_axis < 0) return std::nullopt;
  Vec3 n = Vec3::Zero();
  n[near_axis] = near_sign;
  return Hit{t_near, n, b.albedo};
}

std::optional<Hit> intersect_sphere(const Sphere& s, const Vec3& dir) {
  const double a = dir.squaredNorm();
  const double bq = -2.0 * dir.dot(s.center);
  const double c = s.center.squaredNorm() - s.radius * s.radius;
  const double disc = bq * bq - 4.0 * a * c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  double t = (-bq - sq) / (2.0 * a);
  if (t <= kRayEps) t = (-bq + sq) / (2.0 * a);
  if (t <= kRayEps) return std::nullopt;
  Vec3 n = (t * dir - s.center) / s.radius;
  if (n.dot(dir) > 0.0) n = -n;  // inside view, keep it camera-facing
  return Hit{t, n, s.albedo};
}

std::optional<Hit> intersect_plane(const Plane& p, const Vec3& dir) {
  const double denom = dir.dot(p.normal);
  if (std::abs(denom) < 1e-15) return std::nullopt;
  const double t = p.point.dot(p.normal) / denom;
  if (t <= kRayEps) return std::nullopt;
  Vec3 n = denom < 0.0 ? p.normal : Vec3(-p.normal);
  return Hit{t, n, p.albedo};
}

Vec3 sky_color(const Vec3& dir) {
  const Vec3 horizon(0.82, 0.88, 0.95), zenith(0.35, 0.55, 0.90);
  const double elev = std::clamp(-dir.normalized().y(), 0.0, 1.0);
  return horizon + (zenith - horizon) * elev;
}

}  // namespace

RenderedSample render(const Scene& scene, const CameraSpec& camera,
                      std::uint64_t seed) {
  camera.validate();
  const int h = camera.height_px, w = camera.width_px;
  const double f = focal_from_fov(camera.vertical_fov_deg, h);
  const RegimeRange range = regime_range(scene.regime);
  const Vec3 light = scene.light_dir.normalized();

  RenderedSample out;
  out.rgb = Image3::zeros(h, w);
  out.depth = {make_grid(h, w, 0.0f), make_mask(h, w, false)};
  out.camera = camera;
  out.regime = scene.regime;
  out.scene_id = scene.id;
  out.render_seed = seed;

  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const Vec3 dir((j + 0.5 - w / 2.0) / f, (i + 0.5 - h / 2.0) / f, 1.0);
      std::optional<Hit> best;
      for (const Primitive& p : scene.primitives) {
        std::optional<Hit> hit = std::visit(
            [&dir](const auto& prim) {
              using P = std::decay_t<decltype(prim)>;
              if constexpr (std::is_same_v<P, Box>)
                return intersect_box(prim, dir);
              else if constexpr (std::is_same_v<P, Sphere>)
                return intersect_sphere(prim, dir);
              else
                return intersect_plane(prim, dir);
            },
            p);
        if (hit && (!best || hit->t < best->t)) best = hit;
      }

      Vec3 col01;
      if (best) {
        const double lambert = std::max(0.0, best->normal.dot(light));
        col01 = ((best->albedo * lambert).array() + 0.1).matrix();
        col01 = col01.cwiseMin(1.0).cwiseMax(0.0);
        const double z = best->t;  // dir.z == 1
        if (z >= range.min_depth && z <= range.max_depth) {
          out.depth.values(i, j) = static_cast<float>(z);
          out.depth.valid(i, j) = true;
        }
      } else {
        col01 = sky_color(dir);
      }
      out.rgb.r(i, j) = static_cast<float>(2.0 * col01.x() - 1.0);
      out.rgb.g(i, j) = static_cast<float>(2.0 * col01.y() - 1.0);
      out.rgb.b(i, j) = static_cast<float>(2.0 * col01.z() - 1.0);
    }
  }
  return out;
}

}  // namespace diffdepth
