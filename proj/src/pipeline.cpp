#include "signrec/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "signrec/optim.hpp"
#include "signrec/random.hpp"

namespace signrec {

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("learning rate must be > 0");
  if (hidden_size < 1) throw ValidationError("hidden size must be >= 1");
  if (clip_norm && !(*clip_norm > 0.0)) throw ValidationError("clip norm must be > 0");
}

namespace {

// Applies one optimizer step per named parameter from batch-summed grads.
class ParameterUpdater {
 public:
  ParameterUpdater(std::vector<NamedParameter> params, const TrainConfig& cfg)
      : params_(std::move(params)), cfg_(cfg) {
    AdamConfig adam;
    adam.lr = cfg.lr;
    for (const auto& [name, t] : params_) states_.emplace_back(t->shape(), adam);
  }

  void apply(const std::vector<Tensor*>& grads, std::size_t batch) {
    const float scale = 1.0f / static_cast<float>(batch);
    for (auto* g : grads) *g *= scale;
    if (cfg_.clip_norm) {
      clip_global_norm<float>(std::span<Tensor* const>(grads), *cfg_.clip_norm);
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& [name, param] = params_[i];
      if (cfg_.optimizer == OptimizerKind::adam) {
        adam_step(*param, *grads[i], states_[i], name);
      } else {
        sgd_step(*param, *grads[i], cfg_.lr);
      }
    }
  }

 private:
  std::vector<NamedParameter> params_;
  std::vector<AdamState<float>> states_;
  TrainConfig cfg_;
};

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                     std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 1000 + epoch));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

void check_labels(std::span<const std::size_t> labels, std::size_t classes) {
  for (std::size_t l : labels) {
    if (l >= classes) {
      throw ValidationError("label index " + std::to_string(l) +
                            " outside vocabulary of " + std::to_string(classes));
    }
  }
}

void check_finite_loss(double batch_loss, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(batch_loss)) {
    throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                       ", batch " + std::to_string(batch));
  }
}

// Runs `epochs` of mini-batch training. `example_step(i, accumulate)` returns
// the loss of example i and, when accumulate is set, adds its gradient.
template <typename StepFn, typename ZeroFn>
TrainHistory run_training(std::size_t n_examples, const TrainConfig& cfg,
                          ParameterUpdater& updater, const std::vector<Tensor*>& grads,
                          StepFn&& example_step, ZeroFn&& zero_grads) {
  TrainHistory history;
  double initial = 0.0;
  for (std::size_t i = 0; i < n_examples; ++i) initial += example_step(i, false);
  history.initial_loss = initial / static_cast<double>(n_examples);
  check_finite_loss(history.initial_loss, 0, 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(n_examples, cfg.seed, epoch);
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n_examples; start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(n_examples, start + cfg.batch_size);
      zero_grads();
      double batch_loss = 0.0;
      for (std::size_t j = start; j < end; ++j) batch_loss += example_step(order[j], true);
      check_finite_loss(batch_loss, epoch, batch_index);
      updater.apply(grads, end - start);
      epoch_loss += batch_loss;
    }
    history.epoch_losses.push_back(epoch_loss / static_cast<double>(n_examples));
  }
  return history;
}

}  // namespace

CnnTrainResult train_cnn(std::span<const LabeledVideo> videos,
                         const LabelVocabulary& vocabulary, const TrainConfig& cfg) {
  cfg.validate();
  if (videos.empty()) throw InputError("train_cnn: empty training set");
  std::vector<std::pair<std::size_t, std::size_t>> examples;
  std::vector<std::size_t> labels;
  const Shape frame_shape = videos.front().frames.frames.at(0).shape();
  if (frame_shape.size() != 3) throw ShapeError("frames must be H x W x C");
  for (std::size_t v = 0; v < videos.size(); ++v) {
    labels.push_back(videos[v].label);
    const auto& frames = videos[v].frames.frames;
    if (frames.empty()) throw InputError("train_cnn: video with no frames");
    for (std::size_t t = 0; t < frames.size(); ++t) {
      if (frames[t].shape() != frame_shape) {
        throw ShapeError("train_cnn: frame " + shape_to_string(frames[t].shape()) +
                         " differs from the first frame " + shape_to_string(frame_shape));
      }
      examples.emplace_back(v, t);
    }
  }
  check_labels(labels, vocabulary.size());

  CnnTrainResult result{
      make_micro_cnn({frame_shape[0], frame_shape[1], frame_shape[2]}, vocabulary,
                     derive_seed(cfg.seed, 0xC0)),
      {}};
  MicroCnnModel& model = result.model;
  MicroCnnGrads grads(model);
  const auto grad_list = grads.as_list();
  ParameterUpdater updater(named_parameters(model), cfg);

  auto step = [&](std::size_t i, bool accumulate) {
    const auto& [v, t] = examples[i];
    const Tensor& frame = videos[v].frames.frames[t];
    const std::size_t label = videos[v].label;
    const auto trace = micro_cnn_forward(model, frame);
    const Tensor probs = softmax(trace.logits);
    if (accumulate) {
      micro_cnn_backward(model, frame, trace, softmax_cross_entropy_grad(probs, label),
                         grads);
    }
    return static_cast<double>(cross_entropy(probs, label));
  };
  auto zero = [&] {
    for (auto* g : grad_list) g->fill(0.0f);
  };
  result.history = run_training(examples.size(), cfg, updater, grad_list, step, zero);
  return result;
}

LstmTrainResult train_lstm(std::span<const LabeledSequence> sequences,
                           const LabelVocabulary& vocabulary, const TrainConfig& cfg) {
  cfg.validate();
  if (sequences.empty()) throw InputError("train_lstm: empty training set");
  const std::size_t width = sequences.front().features.width();
  std::vector<std::size_t> labels;
  for (const auto& s : sequences) {
    if (s.features.vectors.rank() != 2 || s.features.width() != width) {
      throw ValidationError("train_lstm: ragged feature widths (" +
                            shape_to_string(s.features.vectors.shape()) + " vs D=" +
                            std::to_string(width) + ")");
    }
    labels.push_back(s.label);
  }
  check_labels(labels, vocabulary.size());

  LstmTrainResult result{make_cnn_lstm(width, cfg.hidden_size, vocabulary,
                                       cfg.feature_source, derive_seed(cfg.seed, 0x15)),
                         {}};
  CnnLstmModel& model = result.model;
  Tensor g_input(model.lstm.input_weight.shape());
  Tensor g_recurrent(model.lstm.recurrent_weight.shape());
  Tensor g_bias(model.lstm.bias.shape());
  Tensor g_head_w(model.head.weight.shape());
  Tensor g_head_b(model.head.bias.shape());
  const std::vector<Tensor*> grad_list{&g_input, &g_recurrent, &g_bias, &g_head_w,
                                       &g_head_b};
  ParameterUpdater updater(named_parameters(model), cfg);

  auto step = [&](std::size_t i, bool accumulate) {
    const auto& s = sequences[i];
    auto fwd = lstm_forward(s.features.vectors, model.lstm);
    const Tensor logits = dense_forward(fwd.h_last, model.head);
    const Tensor probs = softmax(logits);
    if (accumulate) {
      auto head = dense_backward(softmax_cross_entropy_grad(probs, s.label), fwd.h_last,
                                 model.head);
      g_head_w += head.grad_weight;
      g_head_b += head.grad_bias;
      auto lstm = lstm_backward(head.grad_input, fwd.caches, model.lstm,
                                /*need_input_grad=*/false);
      g_input += lstm.grad_input_weight;
      g_recurrent += lstm.grad_recurrent_weight;
      g_bias += lstm.grad_bias;
    }
    return static_cast<double>(cross_entropy(probs, s.label));
  };
  auto zero = [&] {
    for (auto* g : grad_list) g->fill(0.0f);
  };
  result.history = run_training(sequences.size(), cfg, updater, grad_list, step, zero);
  return result;
}

Prediction predict_video_cnn(const MicroCnnModel& model, const FrameSequence& seq) {
  if (seq.frames.empty()) throw InputError("predict_video_cnn: empty frame sequence");
  Tensor mean({model.num_classes()});
  for (const auto& frame : seq.frames) {
    mean += softmax(micro_cnn_forward(model, frame).logits);
  }
  mean *= 1.0f / static_cast<float>(seq.frames.size());
  return {argmax(mean), std::move(mean)};
}

Prediction predict_sequence_lstm(const CnnLstmModel& model, const FeatureSequence& seq) {
  if (seq.vectors.empty()) throw InputError("predict_sequence_lstm: empty sequence");
  Tensor probs = softmax(dense_forward(lstm_forward(seq.vectors, model.lstm).h_last,
                                       model.head));
  return {argmax(probs), std::move(probs)};
}

FeatureSequence extract_features_micro(const MicroCnnModel& model,
                                       const FrameSequence& seq, FeatureSource source) {
  if (seq.frames.empty()) throw InputError("extract_features_micro: empty sequence");
  const std::size_t width = source == FeatureSource::bottleneck ? model.feature_width()
                                                                : model.num_classes();
  Tensor vectors({seq.frames.size(), width});
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    auto trace = micro_cnn_forward(model, seq.frames[t]);
    const Tensor row = source == FeatureSource::bottleneck ? std::move(trace.features)
                                                           : softmax(trace.logits);
    std::copy(row.data().begin(), row.data().end(), vectors.raw() + t * width);
  }
  return {std::move(vectors)};
}

Metrics compute_metrics(std::size_t classes, std::span<const std::size_t> truth,
                        std::span<const std::size_t> predicted) {
  if (truth.empty()) throw InputError("evaluate: empty evaluation set");
  if (truth.size() != predicted.size()) {
    throw ShapeError("evaluate: truth and prediction counts differ");
  }
  Metrics m;
  m.total = truth.size();
  m.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= classes || predicted[i] >= classes) {
      throw IndexError("evaluate: class index outside vocabulary");
    }
    ++m.confusion[truth[i]][predicted[i]];
  }
  std::size_t trace = 0;
  m.precision.assign(classes, 0.0);
  m.recall.assign(classes, 0.0);
  for (std::size_t k = 0; k < classes; ++k) {
    trace += m.confusion[k][k];
    std::size_t row = 0, col = 0;
    for (std::size_t j = 0; j < classes; ++j) {
      row += m.confusion[k][j];
      col += m.confusion[j][k];
    }
    if (col) m.precision[k] = static_cast<double>(m.confusion[k][k]) / col;
    if (row) m.recall[k] = static_cast<double>(m.confusion[k][k]) / row;
  }
  m.accuracy = static_cast<double>(trace) / static_cast<double>(m.total);
  return m;
}

nlohmann::json Metrics::to_json() const {
  return {{"accuracy", accuracy},
          {"total", total},
          {"confusion", confusion},
          {"precision", precision},
          {"recall", recall}};
}

Metrics evaluate(const MicroCnnModel& model, std::span<const LabeledVideo> videos) {
  std::vector<std::size_t> truth, predicted;
  for (const auto& v : videos) {
    truth.push_back(v.label);
    predicted.push_back(predict_video_cnn(model, v.frames).class_index);
  }
  return compute_metrics(model.num_classes(), truth, predicted);
}

Metrics evaluate(const CnnLstmModel& model, std::span<const LabeledSequence> sequences) {
  std::vector<std::size_t> truth, predicted;
  for (const auto& s : sequences) {
    if (s.features.width() != model.input_size()) {
      throw ShapeError("evaluate: feature width " + std::to_string(s.features.width()) +
                       " does not match model input " +
                       std::to_string(model.input_size()));
    }
    truth.push_back(s.label);
    predicted.push_back(predict_sequence_lstm(model, s.features).class_index);
  }
  return compute_metrics(model.num_classes(), truth, predicted);
}

std::vector<LabeledVideo> load_videos(const std::vector<ManifestEntry>& entries,
                                      const LabelVocabulary& vocabulary,
                                      std::size_t frames) {
  std::vector<LabeledVideo> videos;
  videos.reserve(entries.size());
  for (const auto& e : entries) {
    videos.push_back({subsample_frames(load_frames(e.payload_path), frames),
                      vocabulary.index_of(e.label)});
  }
  return videos;
}

std::vector<LabeledSequence> extract_sequences(const MicroCnnModel& cnn,
                                               std::span<const LabeledVideo> videos,
                                               FeatureSource source) {
  std::vector<LabeledSequence> out;
  out.reserve(videos.size());
  for (const auto& v : videos) {
    out.push_back({extract_features_micro(cnn, v.frames, source), v.label});
  }
  return out;
}

std::vector<LabeledSequence> load_feature_sequences(
    const std::vector<ManifestEntry>& entries, const LabelVocabulary& vocabulary,
    const std::optional<fs::path>& features_dir) {
  std::vector<LabeledSequence> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    const fs::path path =
        features_dir ? *features_dir / (e.id + ".gfea") : e.payload_path;
    if (fs::is_directory(path)) {
      throw ValidationError("entry '" + e.id +
                            "' has no feature file (payload is a frame directory)");
    }
    out.push_back({read_feature_file(path), vocabulary.index_of(e.label)});
  }
  return out;
}

std::string format_confusion_table(const Metrics& metrics,
                                   const LabelVocabulary& vocabulary) {
  std::ostringstream os;
  std::size_t name_width = 4;
  for (const auto& n : vocabulary.names()) name_width = std::max(name_width, n.size());
  os << "accuracy " << std::fixed << std::setprecision(4) << metrics.accuracy << " ("
     << metrics.total << " videos)\n";
  os << std::setw(static_cast<int>(name_width)) << "true" << " |";
  for (std::size_t k = 0; k < metrics.confusion.size(); ++k) os << std::setw(5) << k;
  os << "   recall\n";
  for (std::size_t k = 0; k < metrics.confusion.size(); ++k) {
    const std::string name = k < vocabulary.size() ? vocabulary.name(k) : std::to_string(k);
    os << std::setw(static_cast<int>(name_width)) << name << " |";
    for (std::size_t c : metrics.confusion[k]) os << std::setw(5) << c;
    os << "   " << std::setprecision(3) << metrics.recall[k] << '\n';
  }
  return os.str();
}

}  // namespace signrec
