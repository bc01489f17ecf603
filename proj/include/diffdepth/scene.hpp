#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "diffdepth/error.hpp"

namespace diffdepth {

enum class Regime { indoor, outdoor };

std::string to_string(Regime r);
Regime regime_from_string(const std::string& s);

// Supported metric depth range per regime; hits outside are marked invalid
// (sensor range limit).
struct RegimeRange {
  double min_depth, max_depth;
};
RegimeRange regime_range(Regime r);

using Vec3 = Eigen::Vector3d;

// Axis-aligned box. interior=true means the camera is inside (room walls):
// rays hit the exit face with an inward-facing normal.
struct Box {
  Vec3 center, half;
  Vec3 albedo;
  bool interior = false;
};

struct Sphere {
  Vec3 center;
  double radius;
  Vec3 albedo;
};

// Infinite plane, shaded from whichever side the ray arrives.
struct Plane {
  Vec3 point, normal;
  Vec3 albedo;
};

using Primitive = std::variant<Box, Sphere, Plane>;

// Camera is always at the origin looking along +z, with +x right and +y down
// (image row direction).
struct Scene {
  Regime regime = Regime::indoor;
  std::vector<Primitive> primitives;
  Vec3 light_dir;  // direction toward the light, unit length
  std::string id;
};

// Deterministic procedural scene. Indoor: a camera-enclosing room box plus
// 3-8 small objects, camera 1.25-1.55 m above the floor. Outdoor: ground
// plane 1.5 m below the camera plus 4-10 ground-resting objects at 5-65 m.
Scene generate_scene(Regime regime, std::uint64_t seed);

// Scales every position and size by k about the camera origin. Rendered RGB
// is unchanged; depth scales by exactly k (the metric ambiguity the FOV
// conditioning is meant to break).
Scene scale_scene(const Scene& scene, double k);

}  // namespace diffdepth
