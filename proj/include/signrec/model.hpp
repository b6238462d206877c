#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "signrec/data.hpp"
#include "signrec/layers.hpp"
#include "signrec/ops.hpp"

namespace signrec {

struct InputSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channels = 1;

  friend bool operator==(const InputSpec&, const InputSpec&) = default;
};

inline constexpr std::size_t kConv1Filters = 8;
inline constexpr std::size_t kConv2Filters = 16;
inline constexpr std::size_t kConvKernel = 3;

// Width of the flattened features after conv -> relu -> pool twice.
std::size_t micro_cnn_feature_width(const InputSpec& input);

/// Two conv blocks (3x3x8, 3x3x16, each followed by ReLU and 2x2 max-pool)
/// and a dense softmax head over the flattened pooled features.
struct MicroCnnModel {
  InputSpec input;
  ConvParams<float> conv1;
  ConvParams<float> conv2;
  DenseParams<float> head;
  LabelVocabulary vocabulary;

  std::size_t num_classes() const { return head.out_features(); }
  std::size_t feature_width() const { return head.in_features(); }
};

MicroCnnModel make_micro_cnn(const InputSpec& input, LabelVocabulary vocabulary,
                             std::uint64_t seed);

enum class FeatureSource : std::uint8_t { bottleneck, softmax_probs };

std::string to_string(FeatureSource source);
FeatureSource feature_source_from_string(const std::string& name);

/// Single LSTM layer over per-frame feature vectors, read out from the final
/// hidden state through a dense softmax head.
struct CnnLstmModel {
  LstmParams<float> lstm;
  DenseParams<float> head;
  LabelVocabulary vocabulary;
  FeatureSource feature_source = FeatureSource::bottleneck;

  std::size_t num_classes() const { return head.out_features(); }
  std::size_t input_size() const { return lstm.input_size(); }
  std::size_t hidden_size() const { return lstm.hidden_size(); }
};

CnnLstmModel make_cnn_lstm(std::size_t input_size, std::size_t hidden_size,
                           LabelVocabulary vocabulary, FeatureSource source,
                           std::uint64_t seed);

using NamedParameter = std::pair<std::string, Tensor*>;
std::vector<NamedParameter> named_parameters(MicroCnnModel& model);
std::vector<NamedParameter> named_parameters(CnnLstmModel& model);

/// Intermediate activations of one MicroCnn forward pass.
struct MicroCnnTrace {
  Tensor conv1_pre;
  PoolCache pool1_cache;
  Tensor pool1;
  Tensor conv2_pre;
  PoolCache pool2_cache;
  Tensor features;  // flattened second pool output
  Tensor logits;
};

MicroCnnTrace micro_cnn_forward(const MicroCnnModel& model, const Tensor& frame);

struct MicroCnnGrads {
  Tensor conv1_kernels, conv1_bias;
  Tensor conv2_kernels, conv2_bias;
  Tensor head_weight, head_bias;

  explicit MicroCnnGrads(const MicroCnnModel& model);
  std::vector<Tensor*> as_list();
};

// Accumulates the gradient of the loss whose logit gradient is grad_logits.
void micro_cnn_backward(const MicroCnnModel& model, const Tensor& frame,
                        const MicroCnnTrace& trace, const Tensor& grad_logits,
                        MicroCnnGrads& grads);

// ---- Model files ---------------------------------------------------------
//
// "GMDL", u32 version, u8 type tag, u32-length-prefixed JSON hyperparameter
// block, then named tensors (u16 name length, name, u8 ndim, u32 dims,
// f32 payload). All integers little-endian.

enum class ModelType : std::uint8_t { micro_cnn = 1, cnn_lstm = 2 };

inline constexpr std::uint32_t kModelFileVersion = 1;

std::string to_string(ModelType type);

void save_model(const MicroCnnModel& model, const fs::path& path);
void save_model(const CnnLstmModel& model, const fs::path& path);

using AnyModel = std::variant<MicroCnnModel, CnnLstmModel>;

ModelType peek_model_type(const fs::path& path);
AnyModel load_model(const fs::path& path);
MicroCnnModel load_micro_cnn(const fs::path& path);  // TypeTagError on mismatch
CnnLstmModel load_cnn_lstm(const fs::path& path);    // TypeTagError on mismatch

}  // namespace signrec
