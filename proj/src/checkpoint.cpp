#include "diffdepth/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "diffdepth/sha256.hpp"
#include "diffdepth/version.hpp"

namespace diffdepth {

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs assume a little-endian host");

void ParamBlobWriter::add(const std::string& name, const float* data,
                          std::size_t n) {
  index.push_back({{"name", name}, {"count", n}});
  bytes.append(reinterpret_cast<const char*>(data), n * sizeof(float));
}

void ParamBlobWriter::finish(const std::filesystem::path& dir,
                             nlohmann::ordered_json& meta) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path blob_path = dir / "params.bin";
  std::ofstream out(blob_path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("checkpoint: cannot write " + blob_path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("checkpoint: write failed " + blob_path.string());
  meta["params"] = index;
  meta["blob"] = "params.bin";
  meta["blob_sha256"] = sha256_hex(bytes);
}

ParamBlobReader::ParamBlobReader(const std::filesystem::path& dir,
                                 const nlohmann::json& meta) {
  const std::filesystem::path blob_path =
      dir / meta.at("blob").get<std::string>();
  std::ifstream in(blob_path, std::ios::binary);
  if (!in) throw DataError("checkpoint: missing blob " + blob_path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  bytes = ss.str();
  if (sha256_hex(bytes) != meta.at("blob_sha256").get<std::string>())
    throw DataError("checkpoint: blob checksum mismatch in " + dir.string());
  index = meta.at("params");
}

void ParamBlobReader::copy(const std::string& name, float* dst,
                           std::size_t n) {
  if (entry >= index.size())
    throw DataError("checkpoint: parameter index exhausted at " + name);
  const auto& e = index[entry];
  if (e.at("name").get<std::string>() != name ||
      e.at("count").get<std::size_t>() != n)
    throw DataError("checkpoint: parameter mismatch: model wants '" + name +
                    "' x" + std::to_string(n) + ", file has '" +
                    e.at("name").get<std::string>() + "' x" +
                    e.at("count").dump());
  if (offset + n * sizeof(float) > bytes.size())
    throw DataError("checkpoint: blob truncated at " + name);
  std::memcpy(dst, bytes.data() + offset, n * sizeof(float));
  offset += n * sizeof(float);
  ++entry;
}

void ParamBlobReader::finish() const {
  if (entry != index.size() || offset != bytes.size())
    throw DataError("checkpoint: unused trailing parameters in blob");
}

}  // namespace detail

void save_checkpoint(const std::filesystem::path& dir, const Denoiser& model,
                     const DepthCodecConfig& codec,
                     const nlohmann::json& extra) {
  const DenoiserConfig& cfg = model.config();
  nlohmann::ordered_json meta;
  meta["format_version"] = kCheckpointVersion;
  meta["code_version"] = kVersion;
  meta["kind"] = "denoiser";
  meta["schedule"] = std::string(CosineSchedule::name());
  meta["denoiser"] = {{"base_channels", cfg.base_channels},
                      {"depth_levels", cfg.depth_levels},
                      {"embed_dim", cfg.embed_dim},
                      {"fov_conditioning", cfg.fov_conditioning},
                      {"parameterization", to_string(cfg.parameterization)}};
  meta["codec"] = {{"mode", to_string(codec.mode)},
                   {"d_min", codec.d_min},
                   {"d_max", codec.d_max}};
  if (!extra.is_null()) meta["extra"] = extra;

  detail::ParamBlobWriter blob;
  model.for_each_param(
      [&](const std::string& name, const float* p, const float*,
          std::size_t n) { blob.add(name, p, n); });
  blob.finish(dir, meta);

  std::ofstream out(dir / "metadata.json", std::ios::trunc);
  if (!out)
    throw DataError("checkpoint: cannot write metadata in " + dir.string());
  out << meta.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  const std::filesystem::path meta_path = dir / "metadata.json";
  std::ifstream in(meta_path);
  if (!in) throw DataError("checkpoint: missing " + meta_path.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(std::string(
        (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
    if (meta.at("format_version").get<int>() != kCheckpointVersion)
      throw DataError("checkpoint: unsupported format version " +
                      meta.at("format_version").dump());
    if (meta.value("kind", "denoiser") != "denoiser")
      throw DataError("checkpoint: not a denoiser checkpoint");
    if (meta.at("schedule").get<std::string>() !=
        std::string(CosineSchedule::name()))
      throw DataError("checkpoint: unknown schedule " +
                      meta.at("schedule").dump());

    DenoiserConfig cfg;
    const auto& d = meta.at("denoiser");
    cfg.base_channels = d.at("base_channels").get<int>();
    cfg.depth_levels = d.at("depth_levels").get<int>();
    cfg.embed_dim = d.at("embed_dim").get<int>();
    cfg.fov_conditioning = d.at("fov_conditioning").get<bool>();
    cfg.parameterization =
        parameterization_from_string(d.at("parameterization").get<std::string>());

    LoadedCheckpoint loaded{Denoiser(cfg, 0), DepthCodecConfig{}, nullptr};
    const auto& c = meta.at("codec");
    loaded.codec.mode = depth_encoding_from_string(c.at("mode").get<std::string>());
    loaded.codec.d_min = c.at("d_min").get<double>();
    loaded.codec.d_max = c.at("d_max").get<double>();
    loaded.codec.validate();
    loaded.extra = meta.value("extra", nlohmann::json(nullptr));

    detail::ParamBlobReader blob(dir, meta);
    loaded.model.for_each_param(
        [&](const std::string& name, float* p, float*, std::size_t n) {
          blob.copy(name, p, n);
        });
    blob.finish();
    return loaded;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(meta_path.string() + ": " + e.what());
  }
}

}  // namespace diffdepth
