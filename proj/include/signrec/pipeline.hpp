#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "signrec/data.hpp"
#include "signrec/model.hpp"

namespace signrec {

inline constexpr std::size_t kDefaultFramesPerVideo = 20;

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  FeatureSource feature_source = FeatureSource::bottleneck;
  std::size_t hidden_size = kDefaultLstmHidden;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::optional<double> clip_norm;  // global-norm clipping, off by default

  void validate() const;
};

/// Mean training loss before any update, then the mean loss over each
/// epoch's batches (measured before each batch's update).
struct TrainHistory {
  double initial_loss = 0.0;
  std::vector<double> epoch_losses;
};

struct LabeledVideo {
  FrameSequence frames;
  std::size_t label = 0;
};

struct LabeledSequence {
  FeatureSequence features;
  std::size_t label = 0;
};

struct CnnTrainResult {
  MicroCnnModel model;
  TrainHistory history;
};

struct LstmTrainResult {
  CnnLstmModel model;
  TrainHistory history;
};

// Every frame of every video is an independent example. Mini-batch training
// of softmax cross-entropy; deterministic given cfg.seed.
CnnTrainResult train_cnn(std::span<const LabeledVideo> videos,
                         const LabelVocabulary& vocabulary, const TrainConfig& cfg);

// Classifies from the final hidden state. Deterministic given cfg.seed.
LstmTrainResult train_lstm(std::span<const LabeledSequence> sequences,
                           const LabelVocabulary& vocabulary, const TrainConfig& cfg);

struct Prediction {
  std::size_t class_index = 0;
  Tensor probs;
};

// Mean of per-frame softmax probabilities; argmax with lowest-index ties.
Prediction predict_video_cnn(const MicroCnnModel& model, const FrameSequence& seq);
Prediction predict_sequence_lstm(const CnnLstmModel& model, const FeatureSequence& seq);

// One vector per frame: the flattened pooled features (bottleneck) or the
// softmax output (softmax_probs).
FeatureSequence extract_features_micro(const MicroCnnModel& model,
                                       const FrameSequence& seq, FeatureSource source);

struct Metrics {
  double accuracy = 0.0;
  std::size_t total = 0;
  std::vector<std::vector<std::size_t>> confusion;  // rows true, cols predicted
  std::vector<double> precision;                    // 0 where undefined
  std::vector<double> recall;

  nlohmann::json to_json() const;
};

Metrics compute_metrics(std::size_t classes, std::span<const std::size_t> truth,
                        std::span<const std::size_t> predicted);

Metrics evaluate(const MicroCnnModel& model, std::span<const LabeledVideo> videos);
Metrics evaluate(const CnnLstmModel& model, std::span<const LabeledSequence> sequences);

// Loads each entry's frame directory and subsamples it to `frames` frames.
std::vector<LabeledVideo> load_videos(const std::vector<ManifestEntry>& entries,
                                      const LabelVocabulary& vocabulary,
                                      std::size_t frames = kDefaultFramesPerVideo);

std::vector<LabeledSequence> extract_sequences(const MicroCnnModel& cnn,
                                               std::span<const LabeledVideo> videos,
                                               FeatureSource source);

// Reads features from `features_dir`/<id>.gfea when given, else from the
// entry's payload path (which must then be a GFEA file).
std::vector<LabeledSequence> load_feature_sequences(
    const std::vector<ManifestEntry>& entries, const LabelVocabulary& vocabulary,
    const std::optional<fs::path>& features_dir);

std::string format_confusion_table(const Metrics& metrics,
                                   const LabelVocabulary& vocabulary);

}  // namespace signrec
