// Python bindings for the main operations: depth codec, camera math,
// procedural data generation, metrics, training, and inference. Arrays cross
// the boundary as row-major numpy buffers and are copied into Eigen storage.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include <json.hpp>

#include "diffdepth/camera.hpp"
#include "diffdepth/checkpoint.hpp"
#include "diffdepth/config.hpp"
#include "diffdepth/datagen.hpp"
#include "diffdepth/dataset_io.hpp"
#include "diffdepth/depth_codec.hpp"
#include "diffdepth/error.hpp"
#include "diffdepth/metrics.hpp"
#include "diffdepth/render.hpp"
#include "diffdepth/rng.hpp"
#include "diffdepth/schedule.hpp"
#include "diffdepth/scene.hpp"
#include "diffdepth/training.hpp"
#include "diffdepth/version.hpp"

namespace py = pybind11;
namespace dd = diffdepth;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using BoolArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;

dd::Grid grid_from_array(const FloatArray& a, const char* name) {
  if (a.ndim() != 2)
    throw dd::UsageError(std::string(name) + ": expected a 2-d float array");
  auto r = a.unchecked<2>();
  dd::Grid g(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    for (py::ssize_t j = 0; j < a.shape(1); ++j) g(static_cast<int>(i),
                                                   static_cast<int>(j)) = r(i, j);
  return g;
}

dd::Mask mask_from_array(const BoolArray& a, const char* name) {
  if (a.ndim() != 2)
    throw dd::UsageError(std::string(name) + ": expected a 2-d bool array");
  auto r = a.unchecked<2>();
  dd::Mask m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    for (py::ssize_t j = 0; j < a.shape(1); ++j) m(static_cast<int>(i),
                                                   static_cast<int>(j)) = r(i, j);
  return m;
}

dd::Image3 image_from_array(const FloatArray& a, const char* name) {
  if (a.ndim() != 3 || a.shape(2) != 3)
    throw dd::UsageError(std::string(name) + ": expected an (H, W, 3) array");
  auto r = a.unchecked<3>();
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  dd::Image3 img = dd::Image3::zeros(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      img.r(i, j) = r(i, j, 0);
      img.g(i, j) = r(i, j, 1);
      img.b(i, j) = r(i, j, 2);
    }
  return img;
}

py::array_t<float> array_from_grid(const dd::Grid& g) {
  py::array_t<float> a({static_cast<py::ssize_t>(g.rows()),
                        static_cast<py::ssize_t>(g.cols())});
  auto w = a.mutable_unchecked<2>();
  for (int i = 0; i < g.rows(); ++i)
    for (int j = 0; j < g.cols(); ++j) w(i, j) = g(i, j);
  return a;
}

py::array_t<bool> array_from_mask(const dd::Mask& m) {
  py::array_t<bool> a({static_cast<py::ssize_t>(m.rows()),
                       static_cast<py::ssize_t>(m.cols())});
  auto w = a.mutable_unchecked<2>();
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) w(i, j) = m(i, j);
  return a;
}

py::array_t<float> array_from_image(const dd::Image3& img) {
  py::array_t<float> a({static_cast<py::ssize_t>(img.height()),
                        static_cast<py::ssize_t>(img.width()),
                        static_cast<py::ssize_t>(3)});
  auto w = a.mutable_unchecked<3>();
  for (int i = 0; i < img.height(); ++i)
    for (int j = 0; j < img.width(); ++j) {
      w(i, j, 0) = img.r(i, j);
      w(i, j, 1) = img.g(i, j);
      w(i, j, 2) = img.b(i, j);
    }
  return a;
}

dd::DepthCodecConfig codec_config(const std::string& mode, double d_min,
                                  double d_max) {
  dd::DepthCodecConfig cfg{dd::depth_encoding_from_string(mode), d_min, d_max};
  cfg.validate();
  return cfg;
}

py::dict report_dict(const dd::MetricReport& r) {
  py::dict d;
  d["rel"] = r.rel;
  d["rmse"] = r.rmse;
  d["delta1"] = r.delta1;
  d["delta2"] = r.delta2;
  d["delta3"] = r.delta3;
  d["log10"] = r.log10_err;
  d["sq_rel"] = r.sq_rel;
  d["rms_log"] = r.rms_log;
  d["n_pixels"] = r.n_pixels;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Diffusion-based metric depth estimation on procedural RGB-D";
  m.attr("__version__") = dd::kVersion;

  py::register_exception<dd::UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<dd::DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<dd::NumericError>(m, "NumericError",
                                           PyExc_ArithmeticError);

  m.def("fov_to_cond", &dd::fov_to_cond, py::arg("vertical_fov_deg"),
        "The scalar conditioning signal tan(theta / 2).");
  m.def("focal_from_fov", &dd::focal_from_fov, py::arg("vertical_fov_deg"),
        py::arg("height_px"));
  m.def("fov_from_focal", &dd::fov_from_focal, py::arg("focal_px"),
        py::arg("height_px"));
  m.def("perturb_fov_cond", &dd::perturb_fov_cond, py::arg("cond"),
        py::arg("factor"));

  m.def(
      "alpha_sigma",
      [](double t) {
        const auto [a, s] = dd::CosineSchedule{}.eval(t);
        return py::make_tuple(a, s);
      },
      py::arg("t"), "Cosine schedule (alpha, sigma) at diffusion time t.");

  m.def(
      "encode_depth",
      [](const FloatArray& depth, const BoolArray& valid,
         const std::string& mode, double d_min, double d_max) {
        const dd::DepthMap dm{grid_from_array(depth, "depth"),
                              mask_from_array(valid, "valid")};
        return array_from_grid(
            dd::encode(dm, codec_config(mode, d_min, d_max)).values);
      },
      py::arg("depth"), py::arg("valid"), py::arg("mode") = "log",
      py::arg("d_min") = 0.5, py::arg("d_max") = 80.0,
      "Encode metric depth into [-1, 1]; invalid pixels become 0.");

  m.def(
      "decode_depth",
      [](const FloatArray& encoded, const std::string& mode, double d_min,
         double d_max) {
        return array_from_grid(dd::decode(grid_from_array(encoded, "encoded"),
                                          codec_config(mode, d_min, d_max))
                                   .values);
      },
      py::arg("encoded"), py::arg("mode") = "log", py::arg("d_min") = 0.5,
      py::arg("d_max") = 80.0);

  m.def(
      "infill_depth",
      [](const FloatArray& depth, const BoolArray& valid) {
        const dd::DepthMap dm{grid_from_array(depth, "depth"),
                              mask_from_array(valid, "valid")};
        return array_from_grid(dd::infill_nearest(dm).values);
      },
      py::arg("depth"), py::arg("valid"),
      "Fill invalid pixels from the nearest valid one.");

  m.def(
      "render_sample",
      [](const std::string& regime, std::uint64_t seed, int height, int width,
         double fov_deg) {
        const dd::Regime r = dd::regime_from_string(regime);
        const dd::Scene scene = dd::generate_scene(r, dd::derive_seed(seed, 0));
        const dd::RenderedSample s =
            dd::render(scene, dd::CameraSpec{height, width, fov_deg},
                       dd::derive_seed(seed, 1));
        py::dict d;
        d["rgb"] = array_from_image(s.rgb);
        d["depth"] = array_from_grid(s.depth.values);
        d["valid"] = array_from_mask(s.depth.valid);
        d["fov_deg"] = s.camera.vertical_fov_deg;
        d["regime"] = dd::to_string(s.regime);
        d["scene_id"] = s.scene_id;
        return d;
      },
      py::arg("regime") = "indoor", py::arg("seed") = 0,
      py::arg("height") = 64, py::arg("width") = 64, py::arg("fov_deg") = 70.0,
      "Render one procedural RGB-D sample.");

  m.def(
      "generate_dataset",
      [](const std::string& out_dir, int n, const std::string& regime_mix,
         int height, int width, double fov_lo, double fov_hi,
         std::uint64_t seed, int workers) {
        dd::GenSpec spec;
        spec.regime_mix = regime_mix;
        spec.n = n;
        spec.height = height;
        spec.width = width;
        spec.fov_lo = fov_lo;
        spec.fov_hi = fov_hi;
        spec.seed = seed;
        spec.workers = workers;
        spec.validate();
        const auto samples = dd::generate_samples(spec);
        dd::write_dataset(samples, out_dir, dd::DepthCodecConfig{});
        return static_cast<int>(samples.size());
      },
      py::arg("out_dir"), py::arg("n"), py::arg("regime_mix") = "mixed",
      py::arg("height") = 64, py::arg("width") = 64, py::arg("fov_lo") = 55.0,
      py::arg("fov_hi") = 85.0, py::arg("seed") = 0, py::arg("workers") = 1,
      "Write a procedural RGB-D dataset directory; returns the sample count.");

  m.def(
      "evaluate_depth",
      [](const FloatArray& pred, const FloatArray& gt, const BoolArray& valid,
         double min_depth, double max_depth) {
        const dd::EvalProtocol proto{min_depth, max_depth};
        proto.validate();
        const dd::DepthMap gtm{grid_from_array(gt, "gt"),
                               mask_from_array(valid, "valid")};
        return report_dict(
            dd::evaluate_pair(grid_from_array(pred, "pred"), gtm, proto));
      },
      py::arg("pred"), py::arg("gt"), py::arg("valid"),
      py::arg("min_depth") = 0.5, py::arg("max_depth") = 80.0,
      "Standard pooled depth metrics over the valid in-protocol pixels.");

  m.def(
      "train",
      [](const std::string& data_dir, const std::string& out_dir,
         const std::string& config_json) {
        const dd::TrainConfig cfg =
            dd::train_config_from_json(nlohmann::json::parse(config_json));
        const dd::Dataset data = dd::read_dataset(data_dir);
        dd::Denoiser model(cfg.denoiser, dd::derive_seed(cfg.seed, 6));
        const dd::TrainOutput out = dd::train_denoiser(model, data, cfg, out_dir);
        py::dict d;
        d["final_loss"] = out.final_loss;
        d["steps_run"] = out.steps_run;
        return d;
      },
      py::arg("data_dir"), py::arg("out_dir"), py::arg("config_json") = "{}",
      "Train a denoiser on a dataset directory and checkpoint it to out_dir.");

  m.def(
      "infer",
      [](const std::string& checkpoint_dir, const FloatArray& rgb,
         std::optional<double> fov_deg, int steps, int n_samples,
         std::uint64_t seed, double fov_perturb) {
        const dd::LoadedCheckpoint ck = dd::load_checkpoint(checkpoint_dir);
        std::optional<double> cond;
        if (fov_deg) cond = dd::fov_to_cond(*fov_deg);
        dd::InferOptions opt;
        opt.steps = steps;
        opt.n_samples = n_samples;
        opt.seed = seed;
        opt.fov_perturb = fov_perturb;
        const dd::DepthMap out = dd::infer_depth(
            ck.model, image_from_array(rgb, "rgb"), cond, ck.codec, opt);
        return array_from_grid(out.values);
      },
      py::arg("checkpoint_dir"), py::arg("rgb"),
      py::arg("fov_deg") = std::nullopt, py::arg("steps") = 8,
      py::arg("n_samples") = 1, py::arg("seed") = 0,
      py::arg("fov_perturb") = 1.0,
      "Predict metric depth for one RGB image using a trained checkpoint.");
}
