#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "dlen/checkpoint.hpp"
#include "dlen/cli.hpp"
#include "dlen/image.hpp"
#include "dlen/metrics.hpp"
#include "dlen/parallel.hpp"
#include "dlen/suites.hpp"
#include "dlen/train.hpp"
#include "dlen/wavelet.hpp"

namespace py = pybind11;
using namespace dlen;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

// HxWx3 float array <-> ImageBuffer.
ImageBuffer to_image(const FloatArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("expected an HxWx3 array");
  ImageBuffer img(static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), img.pixels.begin());
  return img;
}

FloatArray to_array(const ImageBuffer& img) {
  FloatArray a({img.height, img.width, std::size_t{3}});
  std::copy(img.pixels.begin(), img.pixels.end(), a.mutable_data());
  return a;
}

template <typename T, typename A>
Tensor<T> to_tensor_nd(const A& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor<T>::from_data(shape, std::vector<T>(a.data(), a.data() + a.size()));
}

template <typename T>
py::array_t<T> tensor_array(const Tensor<T>& t) {
  py::array_t<T> a(t.shape());
  std::copy(t.data().begin(), t.data().end(), a.mutable_data());
  return a;
}

// Channel-first output of one image as HxWxC.
FloatArray output_array(const Tensor<float>& t) {
  const std::size_t c = t.dim(1), h = t.dim(2), w = t.dim(3);
  FloatArray a({h, w, c});
  float* dst = a.mutable_data();
  auto src = t.data();
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t k = 0; k < c; ++k) dst[(y * w + x) * c + k] = src[(k * h + y) * w + x];
  return a;
}

struct Model {
  DlenModel<float> inner;
};

DlenConfig make_config(std::uint32_t width, std::uint32_t seb_width, bool use_lwn, bool use_seab,
                       std::uint32_t train_size) {
  DlenConfig c;
  c.width = width;
  c.seb_width = seb_width ? seb_width : default_seb_width(width);
  c.use_lwn = use_lwn;
  c.use_seab = use_seab;
  c.train_height = c.train_width = train_size;
  return c;
}

py::dict config_dict(const DlenConfig& c) {
  py::dict d;
  d["width"] = c.width;
  d["seb_width"] = c.seb_width;
  d["ilb_blocks"] = c.ilb_blocks;
  d["ilb_heads"] = c.ilb_heads;
  d["seb_blocks"] = c.seb_blocks;
  d["seb_heads"] = c.seb_heads;
  d["refine_blocks"] = c.refine_blocks;
  d["ffn_expansion"] = c.ffn_expansion;
  d["use_lwn"] = c.use_lwn;
  d["use_seab"] = c.use_seab;
  d["train_height"] = c.train_height;
  d["train_width"] = c.train_width;
  return d;
}

}  // namespace

PYBIND11_MODULE(_dlen, m) {
  m.doc() = "Low-light enhancement model, metrics and image utilities";

  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<NotFoundError>(m, "NotFoundError", PyExc_FileNotFoundError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);

  m.def("load_image", [](const std::filesystem::path& p) { return to_array(load_image(p)); });
  m.def("save_image", [](const FloatArray& a, const std::filesystem::path& p) {
    save_image(to_image(a), p);
  });
  m.def("procedural_image", [](std::size_t w, std::size_t h, std::uint64_t seed) {
    return to_array(procedural_image(w, h, seed));
  }, py::arg("width"), py::arg("height"), py::arg("seed") = 0);
  m.def("synth_lowlight",
        [](const FloatArray& a, double gamma, double gain, double noise, std::uint64_t seed) {
          return to_array(synth_lowlight(to_image(a), gamma, gain, noise, seed));
        },
        py::arg("image"), py::arg("gamma") = 2.0, py::arg("gain") = 0.4, py::arg("noise") = 0.02,
        py::arg("seed") = 0);

  m.def("psnr", [](const FloatArray& a, const FloatArray& b, double range) {
    return psnr(to_image(a), to_image(b), range);
  }, py::arg("a"), py::arg("b"), py::arg("range") = 1.0);
  m.def("ssim", [](const FloatArray& a, const FloatArray& b, bool windowed, double range) {
    return windowed ? ssim_windowed(to_image(a), to_image(b), range)
                    : ssim_global(to_image(a), to_image(b), range);
  }, py::arg("a"), py::arg("b"), py::arg("windowed") = true, py::arg("range") = 1.0);

  // NCHW float64 arrays with the Haar filter pair.
  m.def("dwt2d", [](const DoubleArray& x) {
    auto s = dwt2d(to_tensor_nd<double>(x), WaveletFilterPair<double>::haar());
    return py::make_tuple(tensor_array(s.ll), tensor_array(s.lh), tensor_array(s.hl),
                          tensor_array(s.hh));
  });
  m.def("idwt2d", [](const DoubleArray& ll, const DoubleArray& lh, const DoubleArray& hl,
                     const DoubleArray& hh) {
    SubbandTensor<double> s{to_tensor_nd<double>(ll), to_tensor_nd<double>(lh),
                            to_tensor_nd<double>(hl), to_tensor_nd<double>(hh),
                            static_cast<std::size_t>(ll.shape(2) * 2),
                            static_cast<std::size_t>(ll.shape(3) * 2)};
    return tensor_array(idwt2d(s, WaveletFilterPair<double>::haar()));
  });

  py::class_<Model>(m, "Model")
      .def(py::init([](std::uint32_t width, std::uint32_t seb_width, bool use_lwn, bool use_seab,
                       std::uint32_t train_size, std::uint64_t seed) {
             return Model{init_params<float>(
                 make_config(width, seb_width, use_lwn, use_seab, train_size), seed)};
           }),
           py::arg("width") = 16, py::arg("seb_width") = 0, py::arg("use_lwn") = true,
           py::arg("use_seab") = true, py::arg("train_size") = 128, py::arg("seed") = 0)
      .def_static("load", [](const std::filesystem::path& p) {
        return Model{load_checkpoint<float>(p)};
      })
      .def("save", [](Model& self, const std::filesystem::path& p) {
        save_checkpoint(self.inner, p);
      })
      .def("to_bytes", [](Model& self) {
        auto b = serialize_checkpoint(self.inner);
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
      })
      .def_static("from_bytes", [](const py::bytes& data) {
        std::string s = data;
        return Model{deserialize_checkpoint<float>(std::vector<std::uint8_t>(s.begin(), s.end()))};
      })
      .def_property_readonly("config", [](const Model& self) { return config_dict(self.inner.config); })
      .def("parameter_count", [](Model& self) { return self.inner.parameter_count(); })
      .def("parameter_names", [](Model& self) {
        std::vector<std::string> names;
        for (auto& p : self.inner.parameters()) names.push_back(p.name);
        return names;
      })
      .def("enhance", [](const Model& self, const FloatArray& a) {
        EnhancedOutput<float> out;
        {
          py::gil_scoped_release release;
          out = enhance_image(self.inner, to_image(a));
        }
        py::dict d;
        d["i_en"] = output_array(out.i_en);
        d["i_lu"] = output_array(out.i_lu);
        d["i_flb"] = output_array(out.i_flb);
        if (out.i_feb.defined()) d["i_feb"] = output_array(out.i_feb);
        d["l_tilde"] = output_array(out.l_tilde);
        return d;
      })
      .def("train",
           [](Model& self, const std::vector<FloatArray>& low, const std::vector<FloatArray>& high,
              std::size_t iters, std::size_t batch, std::size_t crop, double lr,
              std::uint64_t seed, bool augment) {
             if (low.size() != high.size()) throw py::value_error("low/high length mismatch");
             std::vector<ImagePair> pairs;
             for (std::size_t i = 0; i < low.size(); ++i)
               pairs.push_back({to_image(low[i]), to_image(high[i])});
             TrainOptions t;
             t.iters = iters;
             t.batch = batch;
             t.crop = crop;
             t.seed = seed;
             t.augment = augment;
             t.adam.lr = lr;
             std::vector<double> losses;
             py::gil_scoped_release release;
             train_model(self.inner, pairs, t, [&](std::size_t, double l) { losses.push_back(l); });
             return losses;
           },
           py::arg("low"), py::arg("high"), py::arg("iters") = 100, py::arg("batch") = 4,
           py::arg("crop") = 128, py::arg("lr") = 2e-4, py::arg("seed") = 0,
           py::arg("augment") = true);

  m.def("selftest", [](std::uint64_t seed) {
    std::vector<py::tuple> rows;
    for (const auto& r : selftest_suite(seed)) rows.push_back(py::make_tuple(r.name, r.pass, r.detail));
    return rows;
  }, py::arg("seed") = 0);

  // Runs the command-line tool in-process; returns (exit code, stdout, stderr).
  m.def("cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = cli_main(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  });
  m.def("set_num_threads", &set_num_threads);
}
