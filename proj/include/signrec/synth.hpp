#pragma once

#include <cstddef>
#include <cstdint>

#include "signrec/data.hpp"

namespace signrec {

// Corpus shape defaults mirror the reference dataset: 9 classes x 100
// videos, 2 signers, 5 places (20 videos per place per class).
struct SynthConfig {
  std::size_t classes = 9;
  std::size_t per_class = 100;
  std::size_t signers = 2;
  std::size_t places = 5;
  std::size_t frames = 20;
  std::size_t height = 64;
  std::size_t width = 64;
  std::uint64_t seed = 0;
};

inline constexpr double kBlobSigma = 4.0;
inline constexpr double kNoiseAmplitude = 0.1;
inline constexpr double kPlaceBrightnessStep = 0.05;
inline constexpr double kSpeedMin = 0.8;
inline constexpr double kSpeedMax = 1.2;
inline constexpr double kJitterPixels = 3.0;
// Half-length of the sweep at unit speed, as a fraction of min(H, W).
inline constexpr double kSweepFraction = 0.35;

/// Motion and appearance parameters of one rendered gesture video.
struct GestureRender {
  double angle = 0.0;  // radians; blob travels along (cos, sin) through the centre
  double speed = 1.0;
  double jitter_x = 0.0;
  double jitter_y = 0.0;
  int signer = 0;  // 0: bright blob on dark, 1: dark blob on bright
  int place = 0;   // background brightness offset 0.05 * place
  std::uint64_t noise_seed = 0;
};

FrameSequence render_gesture(const GestureRender& params, std::size_t frames,
                             std::size_t height, std::size_t width);

// Vocabulary used by the generator: the ESL words when classes <= 9,
// otherwise generated names.
LabelVocabulary synthetic_vocabulary(std::size_t classes);

// Writes out_dir/videos/<id>/frame_XXXX.pgm and out_dir/manifest.jsonl.
// Class k moves along angle 2*pi*k/classes. Video streams are derived from
// (seed, video index), so output is bit-identical for a given config.
Manifest gen_synthetic(const fs::path& out_dir, const SynthConfig& config);

// Two-class corpus whose classes hold the same frames in opposite temporal
// order: every "forward" video has a "reverse" twin. Written like
// gen_synthetic. `pairs` twins are produced (2 * pairs videos).
Manifest gen_temporal_pairs(const fs::path& out_dir, std::size_t pairs,
                            std::size_t frames, std::size_t height,
                            std::size_t width, std::uint64_t seed);

}  // namespace signrec
