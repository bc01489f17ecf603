#include <doctest.h>

#include <cmath>

#include "diffdepth/render.hpp"
#include "diffdepth/scene.hpp"
#include "test_util.hpp"

using namespace diffdepth;

namespace {

Scene plane_scene(Regime regime, double z) {
  Scene sc;
  sc.regime = regime;
  sc.primitives.push_back(
      Plane{Vec3(0, 0, z), Vec3(0, 0, -1), Vec3(0.6, 0.5, 0.4)});
  sc.light_dir = Vec3(0.2, -0.7, -0.3).normalized();
  sc.id = "plane";
  return sc;
}

}  // namespace

TEST_SUITE("scene_render") {

TEST_CASE("regime ranges") {
  CHECK(regime_range(Regime::indoor).min_depth == 0.5);
  CHECK(regime_range(Regime::indoor).max_depth == 10.0);
  CHECK(regime_range(Regime::outdoor).min_depth == 0.5);
  CHECK(regime_range(Regime::outdoor).max_depth == 80.0);
  CHECK(to_string(Regime::indoor) == "indoor");
  CHECK(regime_from_string("outdoor") == Regime::outdoor);
  CHECK_THROWS_AS(regime_from_string("space"), UsageError);
}

TEST_CASE("generate_scene is seed-deterministic") {
  Scene a = generate_scene(Regime::indoor, 42);
  Scene b = generate_scene(Regime::indoor, 42);
  Scene c = generate_scene(Regime::indoor, 43);
  CHECK(a.id == b.id);
  CHECK(a.primitives.size() == b.primitives.size());
  CHECK((a.light_dir.array() == b.light_dir.array()).all());
  CHECK(a.primitives.size() >= 2);
  CHECK((a.id != c.id || a.primitives.size() != c.primitives.size()));

  RenderedSample ra = render(a, {32, 32, 70.0}, 5);
  RenderedSample rb = render(b, {32, 32, 70.0}, 5);
  CHECK(testutil::bitwise_equal(ra.rgb, rb.rgb));
  CHECK(testutil::bitwise_equal(ra.depth.values, rb.depth.values));
  CHECK((ra.depth.valid == rb.depth.valid).all());
}

TEST_CASE("indoor scenes stay inside the indoor range") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    RenderedSample s =
        render(generate_scene(Regime::indoor, seed), {48, 48, 70.0}, 0);
    CHECK(s.regime == Regime::indoor);
    bool any_valid = false;
    for (int i = 0; i < 48; ++i)
      for (int j = 0; j < 48; ++j) {
        if (!s.depth.valid(i, j)) continue;
        any_valid = true;
        CHECK(s.depth.values(i, j) >= 0.5f);
        CHECK(s.depth.values(i, j) <= 10.0f);
      }
    CHECK(any_valid);
    // The enclosing room means most pixels hit something in range.
    CHECK(s.depth.valid.cast<int>().sum() > 48 * 48 / 2);
  }
}

TEST_CASE("outdoor scenes reach beyond the indoor range") {
  float far = 0.0f;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RenderedSample s =
        render(generate_scene(Regime::outdoor, seed), {48, 48, 70.0}, 0);
    for (int i = 0; i < 48; ++i)
      for (int j = 0; j < 48; ++j)
        if (s.depth.valid(i, j)) {
          CHECK(s.depth.values(i, j) <= 80.0f);
          far = std::max(far, s.depth.values(i, j));
        }
  }
  CHECK(far > 10.0f);
}

TEST_CASE("perpendicular plane renders exact z-depth") {
  for (double fov : {60.0, 110.0}) {
    RenderedSample s = render(plane_scene(Regime::indoor, 5.0),
                              {33, 49, fov}, 0);
    CHECK(s.depth.valid.all());
    CHECK((s.depth.values == 5.0f).all());
  }
}

TEST_CASE("empty scene renders all-invalid sky") {
  Scene sc;
  sc.regime = Regime::outdoor;
  sc.light_dir = Vec3(0, -1, 0);
  sc.id = "empty";
  RenderedSample s = render(sc, {24, 24, 70.0}, 0);
  CHECK_FALSE(s.depth.valid.any());
  CHECK((s.depth.values == 0.0f).all());
  CHECK(s.rgb.r.maxCoeff() <= 1.0f);
  CHECK(s.rgb.r.minCoeff() >= -1.0f);
  // horizon gradient varies down the image
  CHECK(s.rgb.b(0, 12) != s.rgb.b(23, 12));
}

TEST_CASE("on-axis sphere: center pixel depth is exact") {
  Scene sc;
  sc.regime = Regime::indoor;
  sc.primitives.push_back(Sphere{Vec3(0, 0, 10), 1.0, Vec3(0.7, 0.2, 0.2)});
  sc.light_dir = Vec3(0, 0, -1);
  sc.id = "sphere";
  // Odd resolution puts the center pixel ray exactly on the optical axis.
  RenderedSample s = render(sc, {65, 65, 60.0}, 0);
  CHECK(s.depth.valid(32, 32));
  CHECK(s.depth.values(32, 32) == 9.0f);
  float mn = 1e9f;
  for (int i = 0; i < 65; ++i)
    for (int j = 0; j < 65; ++j)
      if (s.depth.valid(i, j)) mn = std::min(mn, s.depth.values(i, j));
  CHECK(mn == 9.0f);
}

TEST_CASE("out-of-range hits keep RGB but lose depth") {
  RenderedSample indoor = render(plane_scene(Regime::indoor, 12.0),
                                 {24, 24, 70.0}, 0);
  RenderedSample outdoor = render(plane_scene(Regime::outdoor, 12.0),
                                  {24, 24, 70.0}, 0);
  CHECK_FALSE(indoor.depth.valid.any());
  CHECK(outdoor.depth.valid.all());
  CHECK(testutil::bitwise_equal(indoor.rgb, outdoor.rgb));
}

TEST_CASE("scale_scene identity and guards") {
  Scene sc = generate_scene(Regime::outdoor, 9);
  RenderedSample base = render(sc, {32, 32, 70.0}, 0);
  RenderedSample same = render(scale_scene(sc, 1.0), {32, 32, 70.0}, 0);
  CHECK(testutil::bitwise_equal(base.rgb, same.rgb));
  CHECK(testutil::bitwise_equal(base.depth.values, same.depth.values));
  CHECK_THROWS_AS(scale_scene(sc, 0.0), DataError);
  CHECK_THROWS_AS(scale_scene(sc, -2.0), DataError);
}

TEST_CASE("scale_scene: identical RGB, exactly k-times depth") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    Scene sc = generate_scene(Regime::outdoor, 100 + seed);
    const double k = (seed % 2 == 0) ? 2.0 : 0.5;  // powers of two stay exact
    RenderedSample base = render(sc, {32, 32, 70.0}, 0);
    RenderedSample scaled = render(scale_scene(sc, k), {32, 32, 70.0}, 0);
    CHECK(testutil::bitwise_equal(base.rgb, scaled.rgb));
    int joint = 0;
    for (int i = 0; i < 32; ++i)
      for (int j = 0; j < 32; ++j) {
        if (!base.depth.valid(i, j) || !scaled.depth.valid(i, j)) continue;
        ++joint;
        CHECK(scaled.depth.values(i, j) ==
              static_cast<float>(k) * base.depth.values(i, j));
      }
    CHECK(joint > 0);
  }
}

TEST_CASE("scaled plane doubles its depth") {
  Scene sc = plane_scene(Regime::outdoor, 5.0);
  RenderedSample s = render(scale_scene(sc, 2.0), {24, 24, 70.0}, 0);
  CHECK((s.depth.values == 10.0f).all());
}

}  // TEST_SUITE
