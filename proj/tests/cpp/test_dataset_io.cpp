#include <doctest.h>

#include <cmath>
#include <string>

#include "diffdepth/datagen.hpp"
#include "diffdepth/dataset_io.hpp"
#include "test_util.hpp"

using namespace diffdepth;
using testutil::TempDir;

TEST_SUITE("dataset_io") {

TEST_CASE("ppm round trip within quantization") {
  TempDir tmp("ppm");
  Rng rng(51);
  Image3 rgb = testutil::random_image(rng, 13, 9);
  write_ppm(tmp.path / "a.ppm", rgb);
  Image3 back = read_ppm(tmp.path / "a.ppm");
  CHECK(back.height() == 13);
  CHECK(back.width() == 9);
  CHECK(testutil::max_abs_diff(rgb, back) <= 1.0f / 255.0f + 1e-6f);

  // quantized values survive a second trip exactly
  write_ppm(tmp.path / "b.ppm", back);
  CHECK(testutil::bitwise_equal(read_ppm(tmp.path / "b.ppm"), back));
}

TEST_CASE("pfm round trip is bit-exact float32") {
  TempDir tmp("pfm");
  Rng rng(52);
  Grid g = testutil::random_grid(rng, 11, 17, -100.0f, 100.0f);
  g(0, 0) = 0.0f;
  g(1, 1) = 1e-20f;
  write_pfm(tmp.path / "d.pfm", g);
  CHECK(testutil::bitwise_equal(read_pfm(tmp.path / "d.pfm"), g));
}

TEST_CASE("pfm reads big-endian data when scale is positive") {
  TempDir tmp("pfm_be");
  const std::string header = "Pf\n1 1\n1.0\n";
  const char be_one[4] = {0x3F, char(0x80), 0x00, 0x00};  // 1.0f big-endian
  testutil::spit(tmp.path / "be.pfm", header + std::string(be_one, 4));
  Grid g = read_pfm(tmp.path / "be.pfm");
  CHECK(g(0, 0) == 1.0f);
}

TEST_CASE("pgm mask round trip") {
  TempDir tmp("pgm");
  Rng rng(53);
  Mask m = make_mask(7, 5);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 5; ++j) m(i, j) = rng.bernoulli(0.5);
  write_pgm_mask(tmp.path / "m.pgm", m);
  Mask back = read_pgm_mask(tmp.path / "m.pgm");
  CHECK((back == m).all());
}

TEST_CASE("dataset round trip preserves samples and metadata") {
  TempDir tmp("ds");
  GenSpec spec;
  spec.regime_mix = "mixed";
  spec.n = 4;
  spec.height = 16;
  spec.width = 16;
  spec.seed = 3;
  std::vector<RenderedSample> samples = generate_samples(spec);
  DepthCodecConfig codec{DepthEncoding::log, 0.5, 80.0};
  write_dataset(samples, tmp.path / "d", codec, {{"note", "roundtrip"}});

  Dataset back = read_dataset(tmp.path / "d");
  REQUIRE(back.samples.size() == 4);
  CHECK(back.codec_hint.mode == DepthEncoding::log);
  CHECK(back.codec_hint.d_max == 80.0);
  for (std::size_t i = 0; i < 4; ++i) {
    const RenderedSample& a = samples[i];
    const RenderedSample& b = back.samples[i];
    CHECK(a.scene_id == b.scene_id);
    CHECK(a.regime == b.regime);
    CHECK(a.render_seed == b.render_seed);
    CHECK(std::abs(a.camera.vertical_fov_deg - b.camera.vertical_fov_deg) <
          1e-9);
    CHECK((a.depth.valid == b.depth.valid).all());
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 16; ++c) {
        if (a.depth.valid(r, c))
          CHECK(a.depth.values(r, c) == b.depth.values(r, c));
        else
          CHECK(b.depth.values(r, c) == 0.0f);
      }
  }

  nlohmann::json manifest = read_manifest(tmp.path / "d");
  CHECK(manifest.at("version") == kManifestVersion);
  CHECK(manifest.at("provenance").at("note") == "roundtrip");
  bool saw_indoor = false, saw_outdoor = false;
  for (const auto& s : manifest.at("samples")) {
    saw_indoor = saw_indoor || s.at("regime") == "indoor";
    saw_outdoor = saw_outdoor || s.at("regime") == "outdoor";
  }
  CHECK(saw_indoor);
  CHECK(saw_outdoor);
}

TEST_CASE("identical samples produce byte-identical directories") {
  TempDir tmp("repro");
  GenSpec spec;
  spec.n = 2;
  spec.height = 16;
  spec.width = 16;
  spec.seed = 5;
  std::vector<RenderedSample> samples = generate_samples(spec);
  DepthCodecConfig codec;
  write_dataset(samples, tmp.path / "a", codec);
  write_dataset(samples, tmp.path / "b", codec);
  for (const auto& entry :
       std::filesystem::directory_iterator(tmp.path / "a")) {
    const auto name = entry.path().filename();
    CHECK(testutil::slurp(entry.path()) ==
          testutil::slurp(tmp.path / "b" / name));
  }
}

TEST_CASE("read_dataset rejects tampering, naming the sample") {
  GenSpec spec;
  spec.n = 2;
  spec.height = 16;
  spec.width = 16;
  spec.seed = 7;
  std::vector<RenderedSample> samples = generate_samples(spec);
  DepthCodecConfig codec;

  {
    TempDir tmp("missing");
    write_dataset(samples, tmp.path / "d", codec);
    std::filesystem::path victim;
    for (const auto& e : std::filesystem::directory_iterator(tmp.path / "d"))
      if (e.path().filename().string().rfind("depth_", 0) == 0)
        victim = e.path();
    REQUIRE(!victim.empty());
    std::filesystem::remove(victim);
    try {
      read_dataset(tmp.path / "d");
      FAIL("expected DataError");
    } catch (const DataError& err) {
      const std::string id =
          victim.stem().string().substr(std::string("depth_").size());
      CHECK(std::string(err.what()).find(id) != std::string::npos);
    }
  }

  {
    TempDir tmp("corrupt");
    write_dataset(samples, tmp.path / "d", codec);
    std::filesystem::path victim;
    for (const auto& e : std::filesystem::directory_iterator(tmp.path / "d"))
      if (e.path().filename().string().rfind("rgb_", 0) == 0)
        victim = e.path();
    std::string bytes = testutil::slurp(victim);
    bytes[bytes.size() - 1] ^= 0x01;
    testutil::spit(victim, bytes);
    CHECK_THROWS_AS(read_dataset(tmp.path / "d"), DataError);
  }

  {
    TempDir tmp("version");
    write_dataset(samples, tmp.path / "d", codec);
    nlohmann::json manifest = read_manifest(tmp.path / "d");
    manifest["version"] = kManifestVersion + 1;
    testutil::spit(tmp.path / "d" / "manifest.json", manifest.dump(2));
    CHECK_THROWS_AS(read_dataset(tmp.path / "d"), DataError);
  }

  CHECK_THROWS_AS(read_dataset("does_not_exist_anywhere"), DataError);
}

TEST_CASE("generate_samples is deterministic and worker-invariant") {
  GenSpec spec;
  spec.regime_mix = "indoor";
  spec.n = 3;
  spec.height = 16;
  spec.width = 16;
  spec.seed = 11;
  spec.workers = 1;
  std::vector<RenderedSample> a = generate_samples(spec);
  spec.workers = 3;
  std::vector<RenderedSample> b = generate_samples(spec);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(testutil::bitwise_equal(a[i].rgb, b[i].rgb));
    CHECK(testutil::bitwise_equal(a[i].depth.values, b[i].depth.values));
    CHECK(a[i].camera.vertical_fov_deg == b[i].camera.vertical_fov_deg);
  }
  CHECK_FALSE(testutil::bitwise_equal(a[0].rgb, a[1].rgb));

  GenSpec bad = spec;
  bad.n = 0;
  CHECK_THROWS_AS(generate_samples(bad), UsageError);
  bad = spec;
  bad.regime_mix = "underwater";
  CHECK_THROWS_AS(generate_samples(bad), UsageError);
}

}  // TEST_SUITE
