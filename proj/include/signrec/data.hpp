#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "signrec/tensor.hpp"

namespace signrec {

namespace fs = std::filesystem;

/// Ordered class names; a class's index is its position.
class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  explicit LabelVocabulary(std::vector<std::string> names);

  // The nine Egyptian Sign Language words of the reference corpus.
  static LabelVocabulary esl_default();

  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(std::size_t index) const { return names_.at(index); }
  std::optional<std::size_t> find(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;  // throws ValidationError

  friend bool operator==(const LabelVocabulary&, const LabelVocabulary&) = default;

 private:
  std::vector<std::string> names_;
};

struct ManifestEntry {
  std::string id;
  fs::path payload_path;  // frame directory or .gfea file
  std::string label;
  int signer = 0;
  int place = 0;
};

struct Manifest {
  LabelVocabulary vocabulary;
  std::vector<ManifestEntry> entries;

  // Entry count per vocabulary index.
  std::vector<std::size_t> class_counts() const;
};

// JSON-lines manifest. The optional first record {"vocabulary": [...]}
// declares the classes; without it the vocabulary is the sorted unique
// labels. Relative payload paths resolve against the manifest's directory.
Manifest load_manifest(const fs::path& path);

// Writes payload paths relative to the manifest's directory when possible.
void save_manifest(const fs::path& path, const Manifest& manifest);

/// A video as T frames of identical H x W x C shape, values in [0, 1].
struct FrameSequence {
  std::vector<Tensor> frames;

  std::size_t length() const noexcept { return frames.size(); }
  void validate() const;
};

/// A video as T feature vectors of width D, stored as one T x D tensor.
struct FeatureSequence {
  Tensor vectors;

  std::size_t length() const { return vectors.dim(0); }
  std::size_t width() const { return vectors.dim(1); }
};

// Uniform temporal sampling: index i maps to floor(i * T / n).
std::vector<std::size_t> subsample_indices(std::size_t length, std::size_t n);
FrameSequence subsample_frames(const FrameSequence& seq, std::size_t n);

// Binary PGM (P5, one channel) or PPM (P6, three channels), maxval 255.
Tensor read_pnm(const fs::path& path);
void write_pnm(const fs::path& path, const Tensor& image);

// Reads frame_0000.pgm/.ppm onward from a directory.
FrameSequence load_frames(const fs::path& dir);
std::string frame_filename(std::size_t index, std::size_t channels);

inline constexpr std::uint32_t kFeatureFileVersion = 1;

FeatureSequence read_feature_file(const fs::path& path);
void write_feature_file(const fs::path& path, const FeatureSequence& seq);

struct Split {
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> eval;
};

// Per class, round(n * (1 - ratio)) entries go to eval (clamped to
// [1, n - 1]). Both sides keep manifest order.
Split stratified_split(const std::vector<ManifestEntry>& entries,
                       const LabelVocabulary& vocabulary, double ratio,
                       std::uint64_t seed);

}  // namespace signrec
