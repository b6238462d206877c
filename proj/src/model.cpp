#include "signrec/model.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "signrec/binary_io.hpp"
#include "signrec/random.hpp"

namespace signrec {

using json = nlohmann::json;

std::size_t micro_cnn_feature_width(const InputSpec& input) {
  if (input.height < 10 || input.width < 10 || input.channels == 0) {
    throw ShapeError("MicroCnn needs at least 10x10 input, got " +
                     shape_to_string({input.height, input.width, input.channels}));
  }
  auto block = [](std::size_t n) { return (n - kConvKernel + 1) / 2; };
  return block(block(input.height)) * block(block(input.width)) * kConv2Filters;
}

MicroCnnModel make_micro_cnn(const InputSpec& input, LabelVocabulary vocabulary,
                             std::uint64_t seed) {
  const std::size_t features = micro_cnn_feature_width(input);
  const std::size_t classes = vocabulary.size();
  if (classes == 0) throw ValidationError("MicroCnn needs at least one class");
  return MicroCnnModel{
      input,
      init_conv<float>(kConvKernel, kConvKernel, input.channels, kConv1Filters,
                       derive_seed(seed, 1)),
      init_conv<float>(kConvKernel, kConvKernel, kConv1Filters, kConv2Filters,
                       derive_seed(seed, 2)),
      init_dense<float>(features, classes, derive_seed(seed, 3)),
      std::move(vocabulary)};
}

std::string to_string(FeatureSource source) {
  return source == FeatureSource::bottleneck ? "bottleneck" : "softmax_probs";
}

FeatureSource feature_source_from_string(const std::string& name) {
  if (name == "bottleneck") return FeatureSource::bottleneck;
  if (name == "softmax_probs") return FeatureSource::softmax_probs;
  throw ValidationError("unknown feature source '" + name + "'");
}

CnnLstmModel make_cnn_lstm(std::size_t input_size, std::size_t hidden_size,
                           LabelVocabulary vocabulary, FeatureSource source,
                           std::uint64_t seed) {
  if (input_size == 0 || hidden_size == 0) {
    throw ValidationError("LSTM input and hidden sizes must be >= 1");
  }
  const std::size_t classes = vocabulary.size();
  if (classes == 0) throw ValidationError("CnnLstm needs at least one class");
  return CnnLstmModel{init_lstm<float>(input_size, hidden_size, derive_seed(seed, 1)),
                      init_dense<float>(hidden_size, classes, derive_seed(seed, 2)),
                      std::move(vocabulary), source};
}

std::vector<NamedParameter> named_parameters(MicroCnnModel& m) {
  return {{"conv1.kernels", &m.conv1.kernels}, {"conv1.bias", &m.conv1.bias},
          {"conv2.kernels", &m.conv2.kernels}, {"conv2.bias", &m.conv2.bias},
          {"head.weight", &m.head.weight},     {"head.bias", &m.head.bias}};
}

std::vector<NamedParameter> named_parameters(CnnLstmModel& m) {
  return {{"lstm.input_weight", &m.lstm.input_weight},
          {"lstm.recurrent_weight", &m.lstm.recurrent_weight},
          {"lstm.bias", &m.lstm.bias},
          {"head.weight", &m.head.weight},
          {"head.bias", &m.head.bias}};
}

MicroCnnTrace micro_cnn_forward(const MicroCnnModel& model, const Tensor& frame) {
  const Shape expected{model.input.height, model.input.width, model.input.channels};
  if (frame.shape() != expected) {
    throw ShapeError("frame " + shape_to_string(frame.shape()) +
                     " does not match model input " + shape_to_string(expected));
  }
  MicroCnnTrace tr;
  tr.conv1_pre = conv2d_forward(frame, model.conv1.kernels, model.conv1.bias);
  auto pool1 = maxpool2d(relu(tr.conv1_pre));
  tr.pool1 = std::move(pool1.output);
  tr.pool1_cache = std::move(pool1.cache);
  tr.conv2_pre = conv2d_forward(tr.pool1, model.conv2.kernels, model.conv2.bias);
  auto pool2 = maxpool2d(relu(tr.conv2_pre));
  tr.features = pool2.output.reshaped({pool2.output.size()});
  tr.pool2_cache = std::move(pool2.cache);
  tr.logits = dense_forward(tr.features, model.head);
  return tr;
}

MicroCnnGrads::MicroCnnGrads(const MicroCnnModel& m)
    : conv1_kernels(m.conv1.kernels.shape()),
      conv1_bias(m.conv1.bias.shape()),
      conv2_kernels(m.conv2.kernels.shape()),
      conv2_bias(m.conv2.bias.shape()),
      head_weight(m.head.weight.shape()),
      head_bias(m.head.bias.shape()) {}

std::vector<Tensor*> MicroCnnGrads::as_list() {
  return {&conv1_kernels, &conv1_bias, &conv2_kernels,
          &conv2_bias,    &head_weight, &head_bias};
}

void micro_cnn_backward(const MicroCnnModel& model, const Tensor& frame,
                        const MicroCnnTrace& tr, const Tensor& grad_logits,
                        MicroCnnGrads& grads) {
  auto head = dense_backward(grad_logits, tr.features, model.head);
  grads.head_weight += head.grad_weight;
  grads.head_bias += head.grad_bias;

  Tensor g = maxpool2d_backward(head.grad_input, tr.pool2_cache);
  g = relu_backward(g, tr.conv2_pre);
  auto c2 = conv2d_backward(g, tr.pool1, model.conv2.kernels);
  grads.conv2_kernels += c2.grad_kernels;
  grads.conv2_bias += c2.grad_bias;

  g = maxpool2d_backward(c2.grad_input, tr.pool1_cache);
  g = relu_backward(g, tr.conv1_pre);
  auto c1 = conv2d_backward(g, frame, model.conv1.kernels, /*need_input_grad=*/false);
  grads.conv1_kernels += c1.grad_kernels;
  grads.conv1_bias += c1.grad_bias;
}

// ---- persistence -----------------------------------------------------------

namespace {

constexpr char kModelMagic[4] = {'G', 'M', 'D', 'L'};

std::string type_name(std::uint8_t tag) {
  switch (tag) {
    case 1: return "MicroCnn";
    case 2: return "CnnLstm";
    default: return "unknown(" + std::to_string(tag) + ")";
  }
}

void write_model_file(const fs::path& path, ModelType type, const json& hyper,
                      const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file " + path.string());
  BinaryWriter w(out);
  w.bytes(kModelMagic, 4);
  w.u32(kModelFileVersion);
  w.u8(static_cast<std::uint8_t>(type));
  const std::string block = hyper.dump();
  w.u32(static_cast<std::uint32_t>(block.size()));
  w.bytes(block.data(), block.size());
  for (const auto& [name, t] : tensors) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u8(static_cast<std::uint8_t>(t->rank()));
    for (std::size_t d : t->shape()) w.u32(static_cast<std::uint32_t>(d));
    w.f32_array(t->data());
  }
  if (!out) throw IoError("failed writing model file " + path.string());
}

struct RawModelFile {
  ModelType type;
  json hyper;
  std::map<std::string, Tensor> tensors;
};

std::uint8_t read_header(BinaryReader& r, const fs::path& path) {
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kModelMagic, 4) != 0) {
    throw FormatError("bad magic in model file " + path.string());
  }
  const std::uint32_t version = r.u32();
  if (version != kModelFileVersion) {
    throw FormatError("unsupported model file version " + std::to_string(version));
  }
  const std::uint8_t tag = r.u8();
  if (tag != 1 && tag != 2) {
    throw FormatError("unknown model type tag " + std::to_string(tag) + " in " +
                      path.string());
  }
  return tag;
}

RawModelFile read_model_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file " + path.string());
  BinaryReader r(in, path.string());
  RawModelFile raw;
  raw.type = static_cast<ModelType>(read_header(r, path));
  const std::uint32_t block_size = r.u32();
  if (block_size > fs::file_size(path)) {
    throw FormatError("truncated file: " + path.string());
  }
  std::string block(block_size, '\0');
  r.bytes(block.data(), block.size());
  try {
    raw.hyper = json::parse(block);
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt hyperparameter block: ") + e.what());
  }
  const std::size_t count = raw.hyper.value("tensor_count", std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::string name(r.u16(), '\0');
    r.bytes(name.data(), name.size());
    const std::uint8_t ndim = r.u8();
    Shape shape(ndim);
    for (auto& d : shape) {
      d = r.u32();
      if (d == 0) throw FormatError("zero dimension for tensor '" + name + "'");
    }
    if (shape_volume(shape) > fs::file_size(path) / sizeof(float)) {
      throw FormatError("truncated file: " + path.string());
    }
    std::vector<float> values(shape_volume(shape));
    r.f32_array(values);
    raw.tensors.insert_or_assign(name, Tensor(std::move(shape), std::move(values)));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes in model file " + path.string());
  }
  return raw;
}

void assign_tensors(RawModelFile& raw, const std::vector<NamedParameter>& params) {
  if (raw.tensors.size() != params.size()) {
    throw FormatError("model file holds " + std::to_string(raw.tensors.size()) +
                      " tensors, expected " + std::to_string(params.size()));
  }
  for (const auto& [name, dst] : params) {
    auto it = raw.tensors.find(name);
    if (it == raw.tensors.end()) throw FormatError("model file lacks tensor '" + name + "'");
    if (it->second.shape() != dst->shape()) {
      throw FormatError("tensor '" + name + "' has shape " +
                        shape_to_string(it->second.shape()) + ", expected " +
                        shape_to_string(dst->shape()));
    }
    *dst = std::move(it->second);
  }
}

template <typename Model>
void save_impl(const Model& model, ModelType type, json hyper,
               const fs::path& path) {
  // Only read through these pointers.
  auto params = named_parameters(const_cast<Model&>(model));
  hyper["tensor_count"] = params.size();
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (const auto& [name, t] : params) tensors.emplace_back(name, t);
  write_model_file(path, type, hyper, tensors);
}

MicroCnnModel decode_micro_cnn(RawModelFile& raw) {
  try {
    const auto& in = raw.hyper.at("input");
    InputSpec spec{in.at("height").get<std::size_t>(), in.at("width").get<std::size_t>(),
                   in.at("channels").get<std::size_t>()};
    auto model = make_micro_cnn(
        spec, LabelVocabulary(raw.hyper.at("vocabulary").get<std::vector<std::string>>()), 0);
    assign_tensors(raw, named_parameters(model));
    return model;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad MicroCnn hyperparameters: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("bad MicroCnn hyperparameters: ") + e.what());
  }
}

CnnLstmModel decode_cnn_lstm(RawModelFile& raw) {
  try {
    auto model = make_cnn_lstm(
        raw.hyper.at("input_size").get<std::size_t>(),
        raw.hyper.at("hidden_size").get<std::size_t>(),
        LabelVocabulary(raw.hyper.at("vocabulary").get<std::vector<std::string>>()),
        feature_source_from_string(raw.hyper.at("feature_source").get<std::string>()), 0);
    assign_tensors(raw, named_parameters(model));
    return model;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad CnnLstm hyperparameters: ") + e.what());
  }
}

}  // namespace

std::string to_string(ModelType type) {
  return type_name(static_cast<std::uint8_t>(type));
}

void save_model(const MicroCnnModel& model, const fs::path& path) {
  json hyper = {{"vocabulary", model.vocabulary.names()},
                {"input",
                 {{"height", model.input.height},
                  {"width", model.input.width},
                  {"channels", model.input.channels}}}};
  save_impl(model, ModelType::micro_cnn, std::move(hyper), path);
}

void save_model(const CnnLstmModel& model, const fs::path& path) {
  json hyper = {{"vocabulary", model.vocabulary.names()},
                {"input_size", model.input_size()},
                {"hidden_size", model.hidden_size()},
                {"feature_source", to_string(model.feature_source)}};
  save_impl(model, ModelType::cnn_lstm, std::move(hyper), path);
}

ModelType peek_model_type(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file " + path.string());
  BinaryReader r(in, path.string());
  return static_cast<ModelType>(read_header(r, path));
}

AnyModel load_model(const fs::path& path) {
  auto raw = read_model_file(path);
  if (raw.type == ModelType::micro_cnn) return decode_micro_cnn(raw);
  return decode_cnn_lstm(raw);
}

MicroCnnModel load_micro_cnn(const fs::path& path) {
  auto raw = read_model_file(path);
  if (raw.type != ModelType::micro_cnn) {
    throw TypeTagError("model file " + path.string() + " holds a " +
                       to_string(raw.type) + " model, expected MicroCnn");
  }
  return decode_micro_cnn(raw);
}

CnnLstmModel load_cnn_lstm(const fs::path& path) {
  auto raw = read_model_file(path);
  if (raw.type != ModelType::cnn_lstm) {
    throw TypeTagError("model file " + path.string() + " holds a " +
                       to_string(raw.type) + " model, expected CnnLstm");
  }
  return decode_cnn_lstm(raw);
}

}  // namespace signrec
