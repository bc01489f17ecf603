#include "diffdepth/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "diffdepth/sha256.hpp"
#include "diffdepth/version.hpp"

namespace diffdepth {

namespace {

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Reads "P6"/"P5"/"Pf" headers: magic, dims, maxval/scale, one whitespace
// byte, then raster. '#' comments allowed between tokens.
struct PnmHeader {
  std::string magic;
  int width = 0, height = 0;
  double scale = 0.0;  // maxval for P5/P6, scale factor for Pf
  std::size_t data_offset = 0;
};

std::string next_token(const std::string& s, std::size_t& pos) {
  while (pos < s.size()) {
    if (s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])))
    ++pos;
  if (start == pos) throw DataError("truncated PNM header");
  return s.substr(start, pos - start);
}

PnmHeader parse_pnm_header(const std::string& bytes, const char* expect_magic,
                           const std::string& name) {
  PnmHeader h;
  std::size_t pos = 0;
  h.magic = next_token(bytes, pos);
  if (h.magic != expect_magic)
    throw DataError(name + ": expected " + expect_magic + ", got " + h.magic);
  h.width = std::stoi(next_token(bytes, pos));
  h.height = std::stoi(next_token(bytes, pos));
  h.scale = std::stod(next_token(bytes, pos));
  if (h.width < 1 || h.height < 1)
    throw DataError(name + ": bad dimensions");
  h.data_offset = pos + 1;  // single whitespace byte after the last token
  return h;
}

unsigned char quantize_unit(float v) {
  const double u = (static_cast<double>(v) + 1.0) * 0.5 * 255.0;
  return static_cast<unsigned char>(std::clamp(std::lround(u), 0l, 255l));
}

std::string ppm_bytes(const Image3& rgb) {
  const int h = rgb.height(), w = rgb.width();
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) +
                    "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(3) * h * w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      out.push_back(static_cast<char>(quantize_unit(rgb.r(i, j))));
      out.push_back(static_cast<char>(quantize_unit(rgb.g(i, j))));
      out.push_back(static_cast<char>(quantize_unit(rgb.b(i, j))));
    }
  return out;
}

std::string pfm_bytes(const Grid& values) {
  const int h = static_cast<int>(values.rows());
  const int w = static_cast<int>(values.cols());
  std::string out = "Pf\n" + std::to_string(w) + " " + std::to_string(h) +
                    "\n-1.0\n";
  out.reserve(out.size() + sizeof(float) * static_cast<std::size_t>(h) * w);
  static_assert(std::endian::native == std::endian::little,
                "PFM writer assumes a little-endian host");
  for (int i = h - 1; i >= 0; --i)  // bottom row first
    for (int j = 0; j < w; ++j) {
      const float v = values(i, j);
      char buf[sizeof(float)];
      std::memcpy(buf, &v, sizeof(float));
      out.append(buf, sizeof(float));
    }
  return out;
}

std::string pgm_bytes(const Mask& mask) {
  const int h = static_cast<int>(mask.rows());
  const int w = static_cast<int>(mask.cols());
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) +
                    "\n255\n";
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      out.push_back(static_cast<char>(mask(i, j) ? 255 : 0));
  return out;
}

std::string sample_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return buf;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Image3& rgb) {
  write_bytes(path, ppm_bytes(rgb));
}

Image3 read_ppm(const std::filesystem::path& path) {
  const std::string bytes = read_bytes(path);
  const PnmHeader h = parse_pnm_header(bytes, "P6", path.string());
  if (h.scale != 255.0) throw DataError(path.string() + ": maxval must be 255");
  const std::size_t need = static_cast<std::size_t>(3) * h.width * h.height;
  if (bytes.size() < h.data_offset + need)
    throw DataError(path.string() + ": truncated pixel data");
  Image3 img = Image3::zeros(h.height, h.width);
  std::size_t p = h.data_offset;
  for (int i = 0; i < h.height; ++i)
    for (int j = 0; j < h.width; ++j) {
      img.r(i, j) = static_cast<float>(
          2.0 * (static_cast<unsigned char>(bytes[p++]) / 255.0) - 1.0);
      img.g(i, j) = static_cast<float>(
          2.0 * (static_cast<unsigned char>(bytes[p++]) / 255.0) - 1.0);
      img.b(i, j) = static_cast<float>(
          2.0 * (static_cast<unsigned char>(bytes[p++]) / 255.0) - 1.0);
    }
  return img;
}

void write_pfm(const std::filesystem::path& path, const Grid& values) {
  write_bytes(path, pfm_bytes(values));
}

Grid read_pfm(const std::filesystem::path& path) {
  const std::string bytes = read_bytes(path);
  const PnmHeader h = parse_pnm_header(bytes, "Pf", path.string());
  const bool little_endian = h.scale < 0.0;
  const std::size_t need =
      sizeof(float) * static_cast<std::size_t>(h.width) * h.height;
  if (bytes.size() < h.data_offset + need)
    throw DataError(path.string() + ": truncated pixel data");
  Grid out(h.height, h.width);
  std::size_t p = h.data_offset;
  for (int i = h.height - 1; i >= 0; --i)
    for (int j = 0; j < h.width; ++j) {
      char buf[sizeof(float)];
      std::memcpy(buf, bytes.data() + p, sizeof(float));
      if (!little_endian) std::reverse(buf, buf + sizeof(float));
      float v;
      std::memcpy(&v, buf, sizeof(float));
      out(i, j) = v;
      p += sizeof(float);
    }
  return out;
}

void write_pgm_mask(const std::filesystem::path& path, const Mask& mask) {
  write_bytes(path, pgm_bytes(mask));
}

Mask read_pgm_mask(const std::filesystem::path& path) {
  const std::string bytes = read_bytes(path);
  const PnmHeader h = parse_pnm_header(bytes, "P5", path.string());
  if (h.scale != 255.0) throw DataError(path.string() + ": maxval must be 255");
  const std::size_t need = static_cast<std::size_t>(h.width) * h.height;
  if (bytes.size() < h.data_offset + need)
    throw DataError(path.string() + ": truncated pixel data");
  Mask out(h.height, h.width);
  std::size_t p = h.data_offset;
  for (int i = 0; i < h.height; ++i)
    for (int j = 0; j < h.width; ++j)
      out(i, j) = static_cast<unsigned char>(bytes[p++]) != 0;
  return out;
}

void write_dataset(const std::vector<RenderedSample>& samples,
                   const std::filesystem::path& dir,
                   const DepthCodecConfig& codec_hint,
                   const nlohmann::json& provenance) {
  if (samples.empty()) throw DataError("write_dataset: no samples");
  codec_hint.validate();
  std::filesystem::create_directories(dir);

  nlohmann::ordered_json manifest;
  manifest["version"] = kManifestVersion;
  manifest["code_version"] = kVersion;
  if (!provenance.is_null()) manifest["provenance"] = provenance;
  manifest["codec_hint"] = {{"mode", to_string(codec_hint.mode)},
                            {"d_min", codec_hint.d_min},
                            {"d_max", codec_hint.d_max}};
  manifest["samples"] = nlohmann::ordered_json::array();

  for (std::size_t k = 0; k < samples.size(); ++k) {
    const RenderedSample& s = samples[k];
    validate_depth_map(s.depth, "write_dataset");
    if (s.rgb.height() != s.depth.height() || s.rgb.width() != s.depth.width())
      throw DataError("write_dataset: rgb/depth shape mismatch");

    const std::string id = sample_id(k);
    const std::string rgb_name = "rgb_" + id + ".ppm";
    const std::string depth_name = "depth_" + id + ".pfm";
    const std::string valid_name = "valid_" + id + ".pgm";

    Grid stored = s.depth.values;
    for (int i = 0; i < s.depth.height(); ++i)
      for (int j = 0; j < s.depth.width(); ++j)
        if (!s.depth.valid(i, j)) stored(i, j) = 0.0f;

    const std::string rgb_data = ppm_bytes(s.rgb);
    const std::string depth_data = pfm_bytes(stored);
    const std::string valid_data = pgm_bytes(s.depth.valid);
    write_bytes(dir / rgb_name, rgb_data);
    write_bytes(dir / depth_name, depth_data);
    write_bytes(dir / valid_name, valid_data);

    manifest["samples"].push_back(
        {{"id", id},
         {"rgb_file", rgb_name},
         {"depth_file", depth_name},
         {"valid_file", valid_name},
         {"height", s.rgb.height()},
         {"width", s.rgb.width()},
         {"vertical_fov_deg", s.camera.vertical_fov_deg},
         {"regime", to_string(s.regime)},
         {"scene_id", s.scene_id},
         {"render_seed", s.render_seed},
         {"sha256",
          {{"rgb", sha256_hex(rgb_data)},
           {"depth", sha256_hex(depth_data)},
           {"valid", sha256_hex(valid_data)}}}});
  }
  write_bytes(dir / "manifest.json", manifest.dump(2) + "\n");
}

nlohmann::json read_manifest(const std::filesystem::path& dir) {
  const std::filesystem::path path = dir / "manifest.json";
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_bytes(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (!manifest.contains("version") || !manifest["version"].is_number_integer())
    throw DataError(path.string() + ": missing manifest version");
  if (manifest["version"].get<int>() != kManifestVersion)
    throw DataError(path.string() + ": unsupported manifest version " +
                    manifest["version"].dump());
  return manifest;
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const nlohmann::json manifest = read_manifest(dir);
  Dataset ds;
  try {
    const auto& hint = manifest.at("codec_hint");
    ds.codec_hint.mode =
        depth_encoding_from_string(hint.at("mode").get<std::string>());
    ds.codec_hint.d_min = hint.at("d_min").get<double>();
    ds.codec_hint.d_max = hint.at("d_max").get<double>();

    for (const auto& entry : manifest.at("samples")) {
      const std::string id = entry.at("id").get<std::string>();
      auto checked_read = [&](const char* key, const char* sum_key) {
        const std::filesystem::path p =
            dir / entry.at(key).get<std::string>();
        if (!std::filesystem::exists(p))
          throw DataError("sample " + id + ": missing file " + p.string());
        const std::string expect =
            entry.at("sha256").at(sum_key).get<std::string>();
        if (sha256_file_hex(p) != expect)
          throw DataError("sample " + id + ": checksum mismatch for " +
                          p.string());
        return p;
      };

      RenderedSample s;
      s.rgb = read_ppm(checked_read("rgb_file", "rgb"));
      Grid depth_vals = read_pfm(checked_read("depth_file", "depth"));
      s.depth.valid = read_pgm_mask(checked_read("valid_file", "valid"));
      s.depth.values = depth_vals;
      s.camera = {entry.at("height").get<int>(), entry.at("width").get<int>(),
                  entry.at("vertical_fov_deg").get<double>()};
      s.regime = regime_from_string(entry.at("regime").get<std::string>());
      s.scene_id = entry.value("scene_id", id);
      s.render_seed = entry.value("render_seed", std::uint64_t{0});

      if (s.rgb.height() != s.camera.height_px ||
          s.rgb.width() != s.camera.width_px ||
          s.depth.values.rows() != s.camera.height_px ||
          s.depth.values.cols() != s.camera.width_px ||
          s.depth.valid.rows() != s.camera.height_px ||
          s.depth.valid.cols() != s.camera.width_px)
        throw DataError("sample " + id + ": file shape disagrees with manifest");
      validate_depth_map(s.depth, "sample " + id);
      ds.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(dir.string() + "/manifest.json: " + e.what());
  }
  if (ds.samples.empty()) throw DataError(dir.string() + ": empty dataset");
  return ds;
}

}  // namespace diffdepth
