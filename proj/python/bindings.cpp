#include <map>
#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "signrec/cli.hpp"
#include "signrec/optim.hpp"
#include "signrec/pipeline.hpp"
#include "signrec/synth.hpp"

namespace py = pybind11;
using namespace signrec;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const FloatArray& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray to_array(const Tensor& t) {
  FloatArray out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.raw(), t.raw() + t.size(), out.mutable_data());
  return out;
}

FrameSequence to_frames(const FloatArray& video) {
  if (video.ndim() != 4) throw InputError("frames must be a T x H x W x C array");
  const auto t = static_cast<std::size_t>(video.shape(0));
  const Shape frame{static_cast<std::size_t>(video.shape(1)),
                    static_cast<std::size_t>(video.shape(2)),
                    static_cast<std::size_t>(video.shape(3))};
  const std::size_t per = shape_volume(frame);
  FrameSequence seq;
  for (std::size_t i = 0; i < t; ++i) {
    seq.frames.emplace_back(frame, std::vector<float>(video.data() + i * per,
                                                       video.data() + (i + 1) * per));
  }
  return seq;
}

py::dict entry_to_dict(const ManifestEntry& e) {
  py::dict d;
  d["id"] = e.id;
  d["payload_path"] = e.payload_path.string();
  d["label"] = e.label;
  d["signer"] = e.signer;
  d["place"] = e.place;
  return d;
}

py::list entries_to_list(const std::vector<ManifestEntry>& entries) {
  py::list out;
  for (const auto& e : entries) out.append(entry_to_dict(e));
  return out;
}

py::dict prediction_to_dict(const Prediction& p, const LabelVocabulary& vocab) {
  py::dict d;
  d["class_index"] = p.class_index;
  d["label"] = vocab.name(p.class_index);
  d["probs"] = to_array(p.probs);
  return d;
}

// Float32 ADAM over named numpy parameters, updated in place.
class PyAdam {
 public:
  PyAdam(double lr, double beta1, double beta2, double epsilon)
      : config_{lr, beta1, beta2, epsilon} {}

  void step(const std::string& name, py::array_t<float, py::array::c_style> param,
            const FloatArray& grad) {
    Tensor p = to_tensor(param);
    auto it = states_.find(name);
    if (it == states_.end()) it = states_.emplace(name, AdamState<float>(p.shape(), config_)).first;
    adam_step(p, to_tensor(grad), it->second, name);
    std::copy(p.raw(), p.raw() + p.size(), param.mutable_data());
  }

  std::size_t steps(const std::string& name) const {
    const auto it = states_.find(name);
    return it == states_.end() ? 0 : it->second.t;
  }

 private:
  AdamConfig config_;
  std::map<std::string, AdamState<float>> states_;
};

}  // namespace

PYBIND11_MODULE(_signrec, m) {
  m.doc() = "Video sign-language recognition core: tensors, layers, training and file formats";

  auto base = py::register_exception<Error>(m, "SignrecError", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<IndexError>(m, "IndexError", base.ptr());
  py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  auto format = py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<TypeTagError>(m, "TypeTagError", format.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  // tensor_core
  m.def("matmul", [](const FloatArray& a, const FloatArray& b) {
    return to_array(matmul(to_tensor(a), to_tensor(b)));
  }, py::arg("a"), py::arg("b"));
  m.def("conv2d", [](const FloatArray& x, const FloatArray& k, const FloatArray& b) {
    return to_array(conv2d_forward(to_tensor(x), to_tensor(k), to_tensor(b)));
  }, py::arg("input"), py::arg("kernels"), py::arg("bias"),
     "Valid stride-1 convolution; input H x W x C, kernels kh x kw x C x F.");
  m.def("maxpool2d", [](const FloatArray& x) { return to_array(maxpool2d(to_tensor(x)).output); },
        py::arg("input"));
  m.def("relu", [](const FloatArray& x) { return to_array(relu(to_tensor(x))); }, py::arg("x"));
  m.def("softmax", [](const FloatArray& z) { return to_array(softmax(to_tensor(z))); },
        py::arg("logits"));
  m.def("cross_entropy", [](const FloatArray& p, std::size_t label) {
    return cross_entropy(to_tensor(p), label);
  }, py::arg("probs"), py::arg("label"));

  // layers
  m.def("lstm_forward", [](const FloatArray& xs, const FloatArray& w, const FloatArray& u,
                           const FloatArray& b) {
    const LstmParams<float> p{to_tensor(w), to_tensor(u), to_tensor(b)};
    return to_array(lstm_forward(to_tensor(xs), p).h_last);
  }, py::arg("xs"), py::arg("input_weight"), py::arg("recurrent_weight"), py::arg("bias"),
     "Final hidden state of a single LSTM layer, gate order (i, f, g, o).");

  // optim
  py::class_<PyAdam>(m, "Adam")
      .def(py::init<double, double, double, double>(), py::arg("lr") = 1e-3,
           py::arg("beta1") = 0.9, py::arg("beta2") = 0.999, py::arg("epsilon") = 1e-8)
      .def("step", &PyAdam::step, py::arg("name"), py::arg("param"), py::arg("grad"),
           "Updates `param` in place; state is kept per name.")
      .def("steps", &PyAdam::steps, py::arg("name"));

  // data
  m.def("subsample_indices", &subsample_indices, py::arg("length"), py::arg("n"));
  m.def("read_feature_file", [](const fs::path& p) { return to_array(read_feature_file(p).vectors); },
        py::arg("path"));
  m.def("write_feature_file", [](const fs::path& p, const FloatArray& a) {
    if (a.ndim() != 2) throw InputError("features must be a T x D array");
    write_feature_file(p, FeatureSequence{to_tensor(a)});
  }, py::arg("path"), py::arg("features"));
  m.def("load_frames", [](const fs::path& dir) {
    const auto seq = load_frames(dir);
    const auto& s = seq.frames.front().shape();
    FloatArray out({static_cast<py::ssize_t>(seq.length()), static_cast<py::ssize_t>(s[0]),
                    static_cast<py::ssize_t>(s[1]), static_cast<py::ssize_t>(s[2])});
    float* dst = out.mutable_data();
    for (const auto& f : seq.frames) dst = std::copy(f.raw(), f.raw() + f.size(), dst);
    return out;
  }, py::arg("directory"));
  m.def("load_manifest", [](const fs::path& p) {
    const auto manifest = load_manifest(p);
    py::dict d;
    d["vocabulary"] = manifest.vocabulary.names();
    d["entries"] = entries_to_list(manifest.entries);
    return d;
  }, py::arg("path"));
  m.def("stratified_split", [](const fs::path& manifest_path, double ratio, std::uint64_t seed) {
    const auto manifest = load_manifest(manifest_path);
    const auto split = stratified_split(manifest.entries, manifest.vocabulary, ratio, seed);
    return py::make_tuple(entries_to_list(split.train), entries_to_list(split.eval));
  }, py::arg("manifest"), py::arg("ratio") = 0.8, py::arg("seed") = 0);
  m.def("gen_synthetic", [](const fs::path& out, std::size_t classes, std::size_t per_class,
                            std::size_t signers, std::size_t places, std::size_t frames,
                            std::size_t size, std::uint64_t seed) {
    SynthConfig cfg{classes, per_class, signers, places, frames, size, size, seed};
    gen_synthetic(out, cfg);
    return (out / "manifest.jsonl").string();
  }, py::arg("out"), py::arg("classes") = 9, py::arg("per_class") = 100, py::arg("signers") = 2,
     py::arg("places") = 5, py::arg("frames") = 20, py::arg("size") = 64, py::arg("seed") = 0,
     "Writes a synthetic gesture corpus and returns its manifest path.");

  // pipeline
  py::class_<MicroCnnModel>(m, "MicroCnn")
      .def_property_readonly("labels", [](const MicroCnnModel& mdl) { return mdl.vocabulary.names(); })
      .def_property_readonly("feature_width", &MicroCnnModel::feature_width)
      .def("predict", [](const MicroCnnModel& mdl, const FloatArray& video) {
        return prediction_to_dict(predict_video_cnn(mdl, to_frames(video)), mdl.vocabulary);
      }, py::arg("frames"), "Mean per-frame probabilities of a T x H x W x C video.")
      .def("features", [](const MicroCnnModel& mdl, const FloatArray& video, const std::string& source) {
        return to_array(extract_features_micro(mdl, to_frames(video),
                                               feature_source_from_string(source)).vectors);
      }, py::arg("frames"), py::arg("source") = "bottleneck");
  py::class_<CnnLstmModel>(m, "CnnLstm")
      .def_property_readonly("labels", [](const CnnLstmModel& mdl) { return mdl.vocabulary.names(); })
      .def_property_readonly("hidden_size", &CnnLstmModel::hidden_size)
      .def_property_readonly("input_size", &CnnLstmModel::input_size)
      .def("predict", [](const CnnLstmModel& mdl, const FloatArray& features) {
        if (features.ndim() != 2) throw InputError("features must be a T x D array");
        return prediction_to_dict(predict_sequence_lstm(mdl, FeatureSequence{to_tensor(features)}),
                                  mdl.vocabulary);
      }, py::arg("features"));
  m.def("load_model", [](const fs::path& p) -> py::object {
    auto any = load_model(p);
    if (auto* cnn = std::get_if<MicroCnnModel>(&any)) return py::cast(std::move(*cnn));
    return py::cast(std::get<CnnLstmModel>(std::move(any)));
  }, py::arg("path"));

  // cli
  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Runs a signrec command; returns (exit_code, stdout, stderr).");
}
