#include "signrec/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "signrec/pipeline.hpp"
#include "signrec/synth.hpp"

namespace signrec {

using json = nlohmann::json;

namespace {

struct GenOptions {
  std::string out;
  std::size_t classes = 9;
  std::size_t per_class = 100;
  std::size_t signers = 2;
  std::size_t places = 5;
  std::size_t frames = 20;
  std::size_t size = 64;
  std::uint64_t seed = 0;
};

struct TrainOptions {
  std::string manifest;
  std::string arch = "cnn";
  std::string features;
  std::string cnn_model;
  std::size_t epochs = 10;
  std::size_t batch = 16;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::string out_model;
  std::size_t hidden = kDefaultLstmHidden;
  std::string feature_source = "bottleneck";
  std::size_t frames = kDefaultFramesPerVideo;
  double split = 0.8;
};

struct EvalOptions {
  std::string model;
  std::string manifest;
  std::string cnn_model;
  std::string features;
  std::size_t frames = kDefaultFramesPerVideo;
  std::string subset = "all";
  double split = 0.8;
  std::uint64_t seed = 0;
};

struct PredictOptions {
  std::string model;
  std::string frames_dir;
  std::string features_file;
  std::string cnn_model;
  std::size_t frames = kDefaultFramesPerVideo;
};

fs::path run_record_path(const fs::path& model_path) {
  fs::path p = model_path;
  p.replace_extension(".run.json");
  return p;
}

json history_to_json(const TrainHistory& h) {
  return {{"initial_loss", h.initial_loss}, {"epoch_losses", h.epoch_losses}};
}

// Feature sequences for the LSTM path: GFEA files when available, otherwise
// computed with a trained MicroCnn.
std::vector<LabeledSequence> lstm_inputs(const std::vector<ManifestEntry>& entries,
                                         const LabelVocabulary& vocabulary,
                                         const std::string& features_dir,
                                         const std::string& cnn_model_path,
                                         FeatureSource source, std::size_t frames) {
  if (!features_dir.empty()) return load_feature_sequences(entries, vocabulary, fs::path(features_dir));
  const bool payloads_are_features = std::all_of(
      entries.begin(), entries.end(),
      [](const ManifestEntry& e) { return e.payload_path.extension() == ".gfea"; });
  if (payloads_are_features) return load_feature_sequences(entries, vocabulary, std::nullopt);
  if (cnn_model_path.empty()) {
    throw ValidationError("cnn-lstm needs --features, GFEA payloads or --cnn-model");
  }
  const MicroCnnModel cnn = load_micro_cnn(cnn_model_path);
  const auto videos = load_videos(entries, vocabulary, frames);
  return extract_sequences(cnn, videos, source);
}

int cmd_gen_synth(const GenOptions& o, std::ostream& out, std::ostream& err) {
  SynthConfig cfg;
  cfg.classes = o.classes;
  cfg.per_class = o.per_class;
  cfg.signers = o.signers;
  cfg.places = o.places;
  cfg.frames = o.frames;
  cfg.height = o.size;
  cfg.width = o.size;
  cfg.seed = o.seed;
  if (o.frames == 0 || o.size == 0) throw ValidationError("--frames and --size must be >= 1");
  const Manifest m = gen_synthetic(o.out, cfg);
  const fs::path manifest_path = fs::path(o.out) / "manifest.jsonl";
  err << "wrote " << m.entries.size() << " videos to " << o.out << "\n";
  out << json{{"manifest", manifest_path.string()},
              {"videos", m.entries.size()},
              {"classes", m.vocabulary.size()},
              {"class_counts", m.class_counts()}}
             .dump()
      << "\n";
  return kExitOk;
}

int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  const auto started = std::chrono::steady_clock::now();
  if (o.arch != "cnn" && o.arch != "cnn-lstm") {
    throw ValidationError("--arch must be cnn or cnn-lstm, got '" + o.arch + "'");
  }
  TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.lr = o.lr;
  cfg.seed = o.seed;
  cfg.hidden_size = o.hidden;
  cfg.feature_source = feature_source_from_string(o.feature_source);
  cfg.validate();
  if (o.frames == 0) throw ValidationError("--frames must be >= 1");

  const Manifest manifest = load_manifest(o.manifest);
  const Split split = stratified_split(manifest.entries, manifest.vocabulary, o.split, o.seed);
  err << "training " << o.arch << " on " << split.train.size() << " videos, evaluating on "
      << split.eval.size() << "\n";

  TrainHistory history;
  Metrics metrics;
  if (o.arch == "cnn") {
    const auto train = load_videos(split.train, manifest.vocabulary, o.frames);
    const auto eval = load_videos(split.eval, manifest.vocabulary, o.frames);
    auto result = train_cnn(train, manifest.vocabulary, cfg);
    metrics = evaluate(result.model, eval);
    save_model(result.model, o.out_model);
    history = std::move(result.history);
  } else {
    const auto train = lstm_inputs(split.train, manifest.vocabulary, o.features, o.cnn_model,
                                   cfg.feature_source, o.frames);
    const auto eval = lstm_inputs(split.eval, manifest.vocabulary, o.features, o.cnn_model,
                                  cfg.feature_source, o.frames);
    auto result = train_lstm(train, manifest.vocabulary, cfg);
    metrics = evaluate(result.model, eval);
    save_model(result.model, o.out_model);
    history = std::move(result.history);
  }
  for (std::size_t e = 0; e < history.epoch_losses.size(); ++e) {
    err << "epoch " << e << " loss " << history.epoch_losses[e] << "\n";
  }
  err << format_confusion_table(metrics, manifest.vocabulary);

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  json config = {{"manifest", o.manifest},  {"arch", o.arch},
                 {"features", o.features},  {"cnn_model", o.cnn_model},
                 {"epochs", o.epochs},      {"batch", o.batch},
                 {"lr", o.lr},              {"hidden", o.hidden},
                 {"feature_source", o.feature_source},
                 {"frames", o.frames},      {"split", o.split},
                 {"out_model", o.out_model}};
  json record = {{"command", "train"},
                 {"config", config},
                 {"seeds", {{"train", o.seed}, {"split", o.seed}}},
                 {"history", history_to_json(history)},
                 {"metrics", metrics.to_json()},
                 {"wall_time_seconds", wall}};
  const fs::path record_path = run_record_path(o.out_model);
  std::ofstream rec(record_path);
  if (!rec) throw IoError("cannot write run record " + record_path.string());
  rec << record.dump(2) << "\n";

  out << json{{"model", o.out_model},
              {"run_record", record_path.string()},
              {"history", history_to_json(history)},
              {"metrics", metrics.to_json()}}
             .dump()
      << "\n";
  return kExitOk;
}

int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
  const AnyModel model = load_model(o.model);
  const Manifest manifest = load_manifest(o.manifest);
  std::vector<ManifestEntry> entries;
  if (o.subset == "all") {
    entries = manifest.entries;
  } else if (o.subset == "train" || o.subset == "eval") {
    Split split = stratified_split(manifest.entries, manifest.vocabulary, o.split, o.seed);
    entries = o.subset == "train" ? std::move(split.train) : std::move(split.eval);
  } else {
    throw ValidationError("--subset must be all, train or eval");
  }

  Metrics metrics;
  const LabelVocabulary* vocab = nullptr;
  if (const auto* cnn = std::get_if<MicroCnnModel>(&model)) {
    if (!o.features.empty()) throw ValidationError("a MicroCnn model consumes frames, not --features");
    if (cnn->vocabulary != manifest.vocabulary) {
      throw ValidationError("model vocabulary does not match the manifest");
    }
    metrics = evaluate(*cnn, load_videos(entries, manifest.vocabulary, o.frames));
    vocab = &cnn->vocabulary;
  } else {
    const auto& lstm = std::get<CnnLstmModel>(model);
    if (lstm.vocabulary != manifest.vocabulary) {
      throw ValidationError("model vocabulary does not match the manifest");
    }
    metrics = evaluate(lstm, lstm_inputs(entries, manifest.vocabulary, o.features, o.cnn_model,
                                         lstm.feature_source, o.frames));
    vocab = &lstm.vocabulary;
  }
  err << format_confusion_table(metrics, *vocab);
  json result = metrics.to_json();
  result["model_type"] = std::holds_alternative<MicroCnnModel>(model) ? "MicroCnn" : "CnnLstm";
  out << result.dump() << "\n";
  return kExitOk;
}

int cmd_predict(const PredictOptions& o, std::ostream& out, std::ostream& err) {
  if (o.frames_dir.empty() == o.features_file.empty()) {
    throw ValidationError("give exactly one of --frames-dir or --features-file");
  }
  const AnyModel model = load_model(o.model);
  Prediction pred;
  const LabelVocabulary* vocab = nullptr;
  if (const auto* cnn = std::get_if<MicroCnnModel>(&model)) {
    if (o.frames_dir.empty()) {
      throw ValidationError("model is a MicroCnn; it needs --frames-dir, not --features-file");
    }
    pred = predict_video_cnn(*cnn, subsample_frames(load_frames(o.frames_dir), o.frames));
    vocab = &cnn->vocabulary;
  } else {
    const auto& lstm = std::get<CnnLstmModel>(model);
    FeatureSequence seq;
    if (!o.features_file.empty()) {
      seq = read_feature_file(o.features_file);
    } else {
      if (o.cnn_model.empty()) {
        throw ValidationError("a CnnLstm model with --frames-dir needs --cnn-model");
      }
      seq = extract_features_micro(load_micro_cnn(o.cnn_model),
                                   subsample_frames(load_frames(o.frames_dir), o.frames),
                                   lstm.feature_source);
    }
    if (seq.width() != lstm.input_size()) {
      throw ValidationError("feature width " + std::to_string(seq.width()) +
                            " does not match model input " + std::to_string(lstm.input_size()));
    }
    pred = predict_sequence_lstm(lstm, seq);
    vocab = &lstm.vocabulary;
  }
  err << "predicted '" << vocab->name(pred.class_index) << "' (p = "
      << pred.probs[pred.class_index] << ")\n";
  std::vector<float> probs(pred.probs.data().begin(), pred.probs.data().end());
  out << json{{"class_index", pred.class_index},
              {"label", vocab->name(pred.class_index)},
              {"probs", probs}}
             .dump()
      << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Video sign-language recognition: synthetic corpora, CNN and CNN-LSTM training"};
  app.name("signrec");
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-synth", "Generate a synthetic gesture corpus");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--classes", gen.classes, "Number of classes")->capture_default_str();
  gen_cmd->add_option("--per-class", gen.per_class, "Videos per class")->capture_default_str();
  gen_cmd->add_option("--signers", gen.signers, "Signer count")->capture_default_str();
  gen_cmd->add_option("--places", gen.places, "Place count")->capture_default_str();
  gen_cmd->add_option("--frames", gen.frames, "Frames per video")->capture_default_str();
  gen_cmd->add_option("--size", gen.size, "Frame height and width")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write it with its run record");
  train_cmd->add_option("--manifest", train.manifest, "Corpus manifest")->required();
  train_cmd->add_option("--arch", train.arch, "cnn or cnn-lstm")->capture_default_str();
  train_cmd->add_option("--features", train.features, "Directory of <id>.gfea feature files");
  train_cmd->add_option("--cnn-model", train.cnn_model, "MicroCnn used to compute LSTM features");
  train_cmd->add_option("--epochs", train.epochs)->capture_default_str();
  train_cmd->add_option("--batch", train.batch)->capture_default_str();
  train_cmd->add_option("--lr", train.lr)->capture_default_str();
  train_cmd->add_option("--seed", train.seed, "Training and split seed")->capture_default_str();
  train_cmd->add_option("--out-model", train.out_model, "Output model path")->required();
  train_cmd->add_option("--hidden", train.hidden, "LSTM hidden size")->capture_default_str();
  train_cmd->add_option("--feature-source", train.feature_source, "bottleneck or softmax_probs")
      ->capture_default_str();
  train_cmd->add_option("--frames", train.frames, "Frames sampled per video")->capture_default_str();
  train_cmd->add_option("--split", train.split, "Training fraction per class")->capture_default_str();

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a manifest");
  eval_cmd->add_option("--model", eval.model)->required();
  eval_cmd->add_option("--manifest", eval.manifest)->required();
  eval_cmd->add_option("--cnn-model", eval.cnn_model);
  eval_cmd->add_option("--features", eval.features);
  eval_cmd->add_option("--frames", eval.frames)->capture_default_str();
  eval_cmd->add_option("--subset", eval.subset, "all, train or eval")->capture_default_str();
  eval_cmd->add_option("--split", eval.split)->capture_default_str();
  eval_cmd->add_option("--seed", eval.seed, "Split seed")->capture_default_str();

  PredictOptions predict;
  auto* predict_cmd = app.add_subcommand("predict", "Classify one video");
  predict_cmd->add_option("--model", predict.model)->required();
  predict_cmd->add_option("--frames-dir", predict.frames_dir);
  predict_cmd->add_option("--features-file", predict.features_file);
  predict_cmd->add_option("--cnn-model", predict.cnn_model);
  predict_cmd->add_option("--frames", predict.frames)->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, err, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen_synth(gen, out, err);
    if (*train_cmd) return cmd_train(train, out, err);
    if (*eval_cmd) return cmd_eval(eval, out, err);
    if (*predict_cmd) return cmd_predict(predict, out, err);
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace signrec
