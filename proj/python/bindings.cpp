#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "dslite/audio.hpp"
#include "dslite/augment.hpp"
#include "dslite/bench.hpp"
#include "dslite/cli.hpp"
#include "dslite/error.hpp"
#include "dslite/eval.hpp"
#include "dslite/frontend.hpp"
#include "dslite/model_store.hpp"
#include "dslite/nn/predict.hpp"

namespace py = pybind11;
using namespace dslite;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) { return {a.data(), a.data() + a.size()}; }

Array to_array(const std::vector<double>& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Array image_array(const ImageTensor& img) {
  Array out({3, img.height, img.width});
  std::copy(img.values.begin(), img.values.end(), out.mutable_data());
  return out;
}

ImageTensor image_from(const Array& a) {
  if (a.ndim() != 3 || a.shape(0) != 3) throw ConfigError("expected an array of shape (3, height, width)");
  ImageTensor img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)), ImageStage::kNormalized);
  std::copy(a.data(), a.data() + a.size(), img.values.begin());
  return img;
}

PredictionSet prediction_set(const std::vector<int>& truth, const std::vector<int>& pred, int classes) {
  if (truth.size() != pred.size()) throw DataError("truth and prediction lengths differ");
  PredictionSet p{classes, {}};
  for (std::size_t i = 0; i < truth.size(); ++i) p.items.push_back({std::to_string(i), truth[i], pred[i], {}});
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spectrogram-image audio classification toolkit";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  auto data = py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<ChecksumError>(m, "ChecksumError", data.ptr());
  py::register_exception<FingerprintMismatch>(m, "FingerprintMismatch", data.ptr());
  py::register_exception<InvariantError>(m, "InvariantError", base.ptr());

  m.attr("SAMPLE_RATE") = kSampleRateHz;
  m.attr("IMAGE_SIDE") = kImageSide;

  m.def("load_wav", [](const std::filesystem::path& p) {
    const AudioBuffer b = load_wav(p);
    return to_array(b.samples);
  });
  m.def("save_wav", [](const std::filesystem::path& p, const Array& samples) { save_wav(p, to_vector(samples)); });
  m.def(
      "chunk_signal",
      [](const Array& samples, double chunk_len_s, double hop_s) {
        AudioBuffer b;
        b.samples = to_vector(samples);
        py::list out;
        for (const auto& c : chunk_signal(b, chunk_len_s, hop_s)) {
          out.append(py::make_tuple(c.start_s, to_array(c.samples)));
        }
        return out;
      },
      py::arg("samples"), py::arg("chunk_len_s") = 3.0, py::arg("hop_s") = 3.0);
  m.def(
      "render_chunk",
      [](const Array& samples, bool normalized) {
        const Frontend& fe = *[] {
          static const Frontend f;
          return &f;
        }();
        const Chunk c{to_vector(samples), 0.0, static_cast<double>(samples.size()) / kSampleRateHz};
        return image_array(normalized ? fe.render_chunk(c) : fe.render_raw(c));
      },
      py::arg("samples"), py::arg("normalized") = true,
      "Render one chunk to a (3, 224, 224) image; raw RGB in [0, 255] when normalized is false.");

  py::class_<nn::Model>(m, "Model")
      .def_property_readonly("labels", [](const nn::Model& x) { return x.class_labels; })
      .def_property_readonly("classes", &nn::Model::classes)
      .def_property_readonly("feature_width", &nn::Model::feature_width)
      .def_property_readonly("input_shape", [](const nn::Model& x) { return x.input_shape; })
      .def("parameter_count", &nn::Model::parameter_count, py::arg("trainable_only") = false)
      .def("predict",
           [](const nn::Model& x, const Array& image) {
             const ImageTensor img = image_from(image);
             return nn::predict_images(x, std::span(&img, 1)).front();
           })
      .def("features", [](const nn::Model& x, const Array& image) { return nn::extract_features(x, image_from(image)); })
      .def("save", [](const nn::Model& x, const std::filesystem::path& p,
                      const std::string& precision) { save_model(x, p, parse_precision(precision)); },
           py::arg("path"), py::arg("precision") = "f32");
  m.def("load_model", [](const std::filesystem::path& p) { return load_model(p); });
  m.def("describe", [](const std::filesystem::path& p) { return describe_archive(inspect_archive(p)); });
  m.def("count_flops", [](const nn::Model& x) { return count_flops(x); });
  m.def("count_params", &count_params);
  m.def(
      "predict_file",
      [](const nn::Model& x, const std::string& path, double chunk_len_s, double hop_s) {
        const auto fp = nn::predict_file(x, Frontend(), path, chunk_len_s, hop_s);
        py::dict d;
        d["label"] = x.class_labels.at(static_cast<std::size_t>(fp.label));
        d["probs"] = fp.probs;
        d["chunk_probs"] = fp.chunk_probs;
        d["chunk_starts_s"] = fp.chunk_starts_s;
        return d;
      },
      py::arg("model"), py::arg("path"), py::arg("chunk_len_s") = 3.0, py::arg("hop_s") = 3.0);

  m.def(
      "uar", [](const std::vector<int>& t, const std::vector<int>& p, int c) { return uar(prediction_set(t, p, c)); },
      py::arg("truth"), py::arg("pred"), py::arg("classes"));
  m.def(
      "bootstrap_ci",
      [](const std::vector<int>& t, const std::vector<int>& p, int c, int n, double level, std::uint64_t seed) {
        const Interval ci = bootstrap_ci(prediction_set(t, p, c), n, level, seed);
        return py::make_tuple(ci.low, ci.high);
      },
      py::arg("truth"), py::arg("pred"), py::arg("classes"), py::arg("n_resamples") = 1000, py::arg("level") = 0.95,
      py::arg("seed") = 0);
  m.def(
      "policy_lambda",
      [](double r, double a, double s) {
        AugmentationPolicy pol;
        pol.a = a;
        pol.s = s;
        pol.validate();
        return policy_lambda(r, pol);
      },
      py::arg("r"), py::arg("a") = 0.5, py::arg("s") = 10.0);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      "Run the command line in-process; returns (exit_code, stdout, stderr).");
}
