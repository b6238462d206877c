#include "signrec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "signrec/random.hpp"

namespace signrec {

FrameSequence render_gesture(const GestureRender& params, std::size_t frames,
                             std::size_t height, std::size_t width) {
  if (frames == 0 || height == 0 || width == 0) {
    throw InputError("render_gesture: frames and image size must be >= 1");
  }
  const double cx = (static_cast<double>(width) - 1.0) / 2.0 + params.jitter_x;
  const double cy = (static_cast<double>(height) - 1.0) / 2.0 + params.jitter_y;
  const double sweep = kSweepFraction *
                       static_cast<double>(std::min(height, width)) * params.speed;
  const double dir_x = std::cos(params.angle);
  const double dir_y = std::sin(params.angle);
  const double background = kPlaceBrightnessStep * params.place;
  const double inv_two_sigma_sq = 1.0 / (2.0 * kBlobSigma * kBlobSigma);

  Rng rng(mix_seed(params.noise_seed));
  std::uniform_real_distribution<double> noise(-kNoiseAmplitude, kNoiseAmplitude);

  FrameSequence seq;
  seq.frames.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const double progress =
        frames == 1 ? 0.0
                    : 2.0 * static_cast<double>(t) / static_cast<double>(frames - 1) - 1.0;
    const double bx = cx + progress * sweep * dir_x;
    const double by = cy + progress * sweep * dir_y;
    Tensor frame({height, width, 1});
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double dx = static_cast<double>(x) - bx;
        const double dy = static_cast<double>(y) - by;
        const double blob = std::exp(-(dx * dx + dy * dy) * inv_two_sigma_sq);
        double v = params.signer == 0 ? background + blob
                                      : 1.0 - background - blob;
        v = std::clamp(v + noise(rng), 0.0, 1.0);
        // Quantize to 8 bits so in-memory frames equal their PGM round-trip.
        frame(y, x, 0) = static_cast<float>(std::lround(v * 255.0)) / 255.0f;
      }
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

LabelVocabulary synthetic_vocabulary(std::size_t classes) {
  const auto esl = LabelVocabulary::esl_default();
  std::vector<std::string> names;
  for (std::size_t k = 0; k < classes; ++k) {
    if (classes <= esl.size()) {
      names.push_back(esl.name(k));
    } else {
      char buf[32];
      std::snprintf(buf, sizeof buf, "gesture_%02zu", k);
      names.emplace_back(buf);
    }
  }
  return LabelVocabulary(std::move(names));
}

namespace {

void write_video(const fs::path& dir, const FrameSequence& seq) {
  fs::create_directories(dir);
  for (std::size_t t = 0; t < seq.length(); ++t) {
    write_pnm(dir / frame_filename(t, 1), seq.frames[t]);
  }
}

void prepare_out_dir(const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir / "videos", ec);
  if (ec || !fs::is_directory(out_dir / "videos")) {
    throw IoError("cannot create output directory " + out_dir.string() +
                  (ec ? ": " + ec.message() : std::string()));
  }
}

}  // namespace

Manifest gen_synthetic(const fs::path& out_dir, const SynthConfig& config) {
  if (config.classes == 0 || config.per_class == 0 || config.signers == 0 ||
      config.places == 0) {
    throw ValidationError("gen_synthetic: class, video, signer and place counts must be >= 1");
  }
  prepare_out_dir(out_dir);
  Manifest manifest;
  manifest.vocabulary = synthetic_vocabulary(config.classes);
  std::size_t video_index = 0;
  for (std::size_t k = 0; k < config.classes; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(config.classes);
    for (std::size_t j = 0; j < config.per_class; ++j, ++video_index) {
      Rng rng(derive_seed(config.seed, video_index));
      std::uniform_real_distribution<double> speed(kSpeedMin, kSpeedMax);
      std::uniform_real_distribution<double> jitter(-kJitterPixels, kJitterPixels);
      GestureRender params;
      params.angle = angle;
      params.speed = speed(rng);
      params.jitter_x = jitter(rng);
      params.jitter_y = jitter(rng);
      params.signer = static_cast<int>(j % config.signers);
      params.place = static_cast<int>(j * config.places / config.per_class);
      params.noise_seed = rng();

      char id[48];
      std::snprintf(id, sizeof id, "c%02zu_v%04zu", k, j);
      const fs::path dir = out_dir / "videos" / id;
      write_video(dir, render_gesture(params, config.frames, config.height,
                                      config.width));
      manifest.entries.push_back(
          {id, dir, manifest.vocabulary.name(k), params.signer, params.place});
    }
  }
  save_manifest(out_dir / "manifest.jsonl", manifest);
  return manifest;
}

Manifest gen_temporal_pairs(const fs::path& out_dir, std::size_t pairs,
                            std::size_t frames, std::size_t height,
                            std::size_t width, std::uint64_t seed) {
  if (pairs == 0) throw ValidationError("gen_temporal_pairs: pairs must be >= 1");
  prepare_out_dir(out_dir);
  Manifest manifest;
  manifest.vocabulary = LabelVocabulary({"forward", "reverse"});
  for (std::size_t p = 0; p < pairs; ++p) {
    Rng rng(derive_seed(seed, p));
    std::uniform_real_distribution<double> speed(kSpeedMin, kSpeedMax);
    std::uniform_real_distribution<double> jitter(-kJitterPixels, kJitterPixels);
    GestureRender params;
    params.angle = 0.0;
    params.speed = speed(rng);
    params.jitter_x = jitter(rng);
    params.jitter_y = jitter(rng);
    params.signer = static_cast<int>(p % 2);
    params.place = static_cast<int>(p % 5);
    params.noise_seed = rng();

    FrameSequence seq = render_gesture(params, frames, height, width);
    char id[48];
    std::snprintf(id, sizeof id, "fwd_%04zu", p);
    fs::path dir = out_dir / "videos" / id;
    write_video(dir, seq);
    manifest.entries.push_back({id, dir, "forward", params.signer, params.place});

    std::reverse(seq.frames.begin(), seq.frames.end());
    std::snprintf(id, sizeof id, "rev_%04zu", p);
    dir = out_dir / "videos" / id;
    write_video(dir, seq);
    manifest.entries.push_back({id, dir, "reverse", params.signer, params.place});
  }
  save_manifest(out_dir / "manifest.jsonl", manifest);
  return manifest;
}

}  // namespace signrec
