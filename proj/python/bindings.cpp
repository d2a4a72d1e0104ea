#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "svpsf/config.hpp"
#include "svpsf/deconv.hpp"
#include "svpsf/degrade.hpp"
#include "svpsf/depth.hpp"
#include "svpsf/error.hpp"
#include "svpsf/estimator.hpp"
#include "svpsf/psf_map.hpp"

namespace py = pybind11;
using namespace svpsf;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  const int h = static_cast<int>(a.shape(0));
  const int w = static_cast<int>(a.shape(1));
  return Image(w, h, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Image& img) {
  Array a({img.height(), img.width()});
  std::copy(img.pixels().begin(), img.pixels().end(), a.mutable_data());
  return a;
}

Array grid_array(const std::vector<double>& v, int w, int h) {
  Array a({h, w});
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

std::vector<Psf> to_bank(const std::vector<Array>& kernels) {
  std::vector<Psf> bank;
  for (const auto& k : kernels) bank.push_back({to_image(k), 1.0});
  return bank;
}

MaskSet masks_for(const Image& img, std::size_t count, int grid_w, int patch, int stride) {
  if (grid_w < 1 || count % grid_w != 0) throw py::value_error("kernel count is not a multiple of grid_w");
  const int grid_h = static_cast<int>(count / grid_w);
  return build_masks(img.width(), img.height(), grid_w, grid_h, patch, patch, stride);
}

py::dict params_dict(const PsfParams& p) {
  py::dict d;
  d["model"] = std::string(to_string(p.model));
  d["a"] = p.a;
  d["a0"] = p.a0;
  return d;
}

ParamMap map_from_arrays(PsfModel model, const std::vector<Array>& params, int image_w, int image_h, int patch,
                         int stride) {
  ParamMap m = make_param_map(image_w, image_h, model, {patch, patch, stride, 0.5});
  if (static_cast<int>(params.size()) != param_count(model)) throw py::value_error("one array per model parameter");
  for (const auto& a : params)
    if (a.ndim() != 2 || a.shape(0) != m.grid_h || a.shape(1) != m.grid_w)
      throw py::value_error("parameter arrays must have shape (grid_h, grid_w)");
  for (std::size_t i = 0; i < m.cells.size(); ++i) {
    m.cells[i].a.clear();
    for (const auto& a : params) m.cells[i].a.push_back(a.data()[i]);
  }
  return m;
}

}  // namespace

PYBIND11_MODULE(_svpsf, m) {
  m.attr("__version__") = kVersion;
  py::register_exception<Error>(m, "SvpsfError", PyExc_RuntimeError);

  m.def(
      "render_psf",
      [](const std::string& model, std::vector<double> a, int kernel_side, int pupil_side) {
        const PupilConfig pupil{pupil_side, 0.5, 1.0};
        return to_array(render_psf({parse_psf_model(model), std::move(a), 0.0}, kernel_side, pupil).kernel);
      },
      py::arg("model"), py::arg("params"), py::arg("kernel_side") = 63, py::arg("pupil_side") = 256,
      "Normalized PSF kernel for a model name (Z-1, Z-2, Z-3, G-1, G-2) and parameters a1..aN.");

  m.def(
      "convolve", [](const Array& image, const Array& kernel) { return to_array(convolve(to_image(image), {to_image(kernel), 1.0})); },
      py::arg("image"), py::arg("kernel"), "Same-size convolution with reflect boundary.");

  m.def(
      "add_noise",
      [](const Array& image, double beta, double sigma, std::uint64_t seed) {
        return to_array(add_noise(to_image(image), {beta, sigma, seed}));
      },
      py::arg("image"), py::arg("beta") = 1.0, py::arg("sigma") = 0.0, py::arg("seed") = 0);

  m.def(
      "sv_convolve",
      [](const Array& image, const std::vector<Array>& kernels, int grid_w, int patch, int stride) {
        const Image img = to_image(image);
        return to_array(sv_convolve(img, to_bank(kernels), masks_for(img, kernels.size(), grid_w, patch, stride)));
      },
      py::arg("image"), py::arg("kernels"), py::arg("grid_w"), py::arg("patch"), py::arg("stride"),
      "Overlap-add blur with one kernel per window cell, row-major.");

  m.def(
      "deconvolve",
      [](const Array& image, const std::vector<Array>& kernels, int grid_w, int patch, int stride, double lambda_tv,
         int iterations, bool clamp) {
        const Image img = to_image(image);
        const DeconvConfig cfg{lambda_tv, iterations, 1e-6, clamp};
        const auto bank = to_bank(kernels);
        const MaskSet masks = masks_for(img, kernels.size(), grid_w, patch, stride);
        Image out;
        {
          py::gil_scoped_release release;
          out = tv_rl_deconvolve(img, bank, masks, cfg);
        }
        return to_array(out);
      },
      py::arg("image"), py::arg("kernels"), py::arg("grid_w"), py::arg("patch"), py::arg("stride"),
      py::arg("lambda_tv") = 0.1, py::arg("iterations") = 20, py::arg("clamp") = true,
      "TV-regularized Richardson-Lucy with a spatially-variant kernel bank.");

  m.def(
      "snr", [](const Array& ref, const Array& test) { return snr(to_image(ref), to_image(test)); }, py::arg("ref"),
      py::arg("test"));
  m.def(
      "ssim", [](const Array& ref, const Array& test) { return ssim(to_image(ref), to_image(test)); }, py::arg("ref"),
      py::arg("test"));

  py::class_<RegressorModel>(m, "Regressor")
      .def_property_readonly("model", [](const RegressorModel& r) { return std::string(to_string(r.model())); })
      .def_property_readonly("input_side", &RegressorModel::input_side)
      .def(
          "forward", [](const RegressorModel& r, const Array& patch) { return r.forward(to_image(patch)); },
          py::arg("patch"), "Raw outputs (a0, normalized a1..aN).")
      .def(
          "estimate", [](const RegressorModel& r, const Array& patch) { return params_dict(r.estimate(to_image(patch))); },
          py::arg("patch"))
      .def(
          "map_params",
          [](const RegressorModel& r, const Array& image, int stride, bool infill) {
            ParamMap map = map_params(to_image(image), r, {r.input_side(), r.input_side(), stride, 0.5});
            if (infill) map = infill_invalid(map);
            py::dict d;
            d["grid_w"] = map.grid_w;
            d["grid_h"] = map.grid_h;
            std::vector<double> a0;
            for (const auto& c : map.cells) a0.push_back(c.a0);
            d["a0"] = grid_array(a0, map.grid_w, map.grid_h);
            py::list params;
            for (int k = 0; k < param_count(map.model); ++k) {
              std::vector<double> v;
              for (const auto& c : map.cells) v.push_back(c.a[k]);
              params.append(grid_array(v, map.grid_w, map.grid_h));
            }
            d["params"] = params;
            return d;
          },
          py::arg("image"), py::arg("stride") = 32, py::arg("infill") = true);

  m.def(
      "load_model", [](const std::string& path) { return load_model(path); }, py::arg("path"));

  m.def(
      "depth_from_params",
      [](const std::vector<Array>& params, int image_w, int image_h, int patch, int stride) {
        const ParamMap map = map_from_arrays(PsfModel::Zernike3, params, image_w, image_h, patch, stride);
        const DepthMap d = depth_from_params(map);
        return grid_array(d.z, d.grid_w, d.grid_h);
      },
      py::arg("params"), py::arg("image_w"), py::arg("image_h"), py::arg("patch"), py::arg("stride"),
      "Signed depth from Z-3 parameter grids [defocus, cylinder, axis].");

  m.def(
      "calibrate_depth",
      [](const Array& est, const Array& gt) {
        auto as_map = [](const Array& a) {
          const Image img = to_image(a);
          return DepthMap{img.width(), img.height(), img.vector(), DepthUnits::ModelUnits, std::nullopt};
        };
        const auto r = calibrate_depth(as_map(est), as_map(gt));
        py::dict d;
        d["alpha"] = r.alpha;
        d["beta"] = r.beta;
        d["r2"] = r.r2;
        d["abs_err_um"] = r.abs_err_um;
        d["rel_err_pct"] = r.rel_err_pct;
        return d;
      },
      py::arg("est"), py::arg("gt"));

  m.def(
      "simulate_astigmatic_scene",
      [](double tilt_deg, double field_um, bool diagonal, std::uint64_t seed, int image_size) {
        TiltedPlaneSpec spec;
        spec.tilt_deg = tilt_deg;
        spec.field_um = field_um;
        spec.axis = diagonal ? TiltAxis::Diagonal : TiltAxis::Rows;
        spec.seed = seed;
        spec.image_size = image_size;
        const AstigmaticScene s = simulate_astigmatic_scene(spec);
        py::dict d;
        d["sharp"] = to_array(s.sharp);
        d["blurred"] = to_array(s.blurred);
        d["depth"] = grid_array(s.depth.z, s.depth.grid_w, s.depth.grid_h);
        d["depth_range_um"] = spec.depth_range_um();
        return d;
      },
      py::arg("tilt_deg") = 3.0, py::arg("field_um") = 655.0, py::arg("diagonal") = false, py::arg("seed") = 1,
      py::arg("image_size") = 256);
}
