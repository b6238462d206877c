#include "signrec/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "signrec/binary_io.hpp"
#include "signrec/random.hpp"

namespace signrec {

using json = nlohmann::json;

LabelVocabulary::LabelVocabulary(std::vector<std::string> names)
    : names_(std::move(names)) {
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (!seen.insert(n).second) {
      throw ValidationError("duplicate class name in vocabulary: '" + n + "'");
    }
  }
}

LabelVocabulary LabelVocabulary::esl_default() {
  return LabelVocabulary({"similar", "differ", "doctor", "free", "I love you",
                          "judge", "Sunday", "Talk", "Travel"});
}

std::optional<std::size_t> LabelVocabulary::find(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::size_t LabelVocabulary::index_of(const std::string& name) const {
  if (auto idx = find(name)) return *idx;
  throw ValidationError("label '" + name + "' is not in the vocabulary");
}

std::vector<std::size_t> Manifest::class_counts() const {
  std::vector<std::size_t> counts(vocabulary.size(), 0);
  for (const auto& e : entries) ++counts[vocabulary.index_of(e.label)];
  return counts;
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();

  std::optional<LabelVocabulary> declared;
  Manifest manifest;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char ch) { return std::isspace(ch); })) {
      continue;
    }
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    if (!record.is_object()) throw ParseError("record is not an object", line_no);
    if (record.contains("vocabulary")) {
      if (declared || !manifest.entries.empty()) {
        throw ParseError("vocabulary record must be the first line", line_no);
      }
      try {
        declared = LabelVocabulary(record.at("vocabulary").get<std::vector<std::string>>());
      } catch (const json::exception& e) {
        throw ParseError(std::string("bad vocabulary: ") + e.what(), line_no);
      }
      continue;
    }
    ManifestEntry entry;
    try {
      entry.id = record.at("id").get<std::string>();
      entry.payload_path = record.at("payload_path").get<std::string>();
      entry.label = record.at("label").get<std::string>();
      entry.signer = record.value("signer", 0);
      entry.place = record.value("place", 0);
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad entry: ") + e.what(), line_no);
    }
    if (!ids.insert(entry.id).second) {
      throw ValidationError("duplicate id '" + entry.id + "' at line " +
                            std::to_string(line_no));
    }
    if (entry.payload_path.is_relative()) entry.payload_path = base / entry.payload_path;
    if (!fs::exists(entry.payload_path)) {
      throw ValidationError("payload for '" + entry.id + "' does not exist: " +
                            entry.payload_path.string());
    }
    if (declared && !declared->find(entry.label)) {
      throw ValidationError("entry '" + entry.id + "' has label '" + entry.label +
                            "' outside the declared vocabulary");
    }
    manifest.entries.push_back(std::move(entry));
  }
  if (manifest.entries.empty()) {
    throw ValidationError("manifest " + path.string() + " has no entries");
  }
  if (declared) {
    manifest.vocabulary = std::move(*declared);
  } else {
    std::set<std::string> labels;
    for (const auto& e : manifest.entries) labels.insert(e.label);
    manifest.vocabulary = LabelVocabulary({labels.begin(), labels.end()});
  }
  return manifest;
}

void save_manifest(const fs::path& path, const Manifest& manifest) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  const fs::path base = path.parent_path();
  out << json{{"vocabulary", manifest.vocabulary.names()}}.dump() << '\n';
  for (const auto& e : manifest.entries) {
    fs::path payload = e.payload_path;
    if (!base.empty() && payload.is_absolute() == fs::path(base).is_absolute()) {
      auto rel = payload.lexically_relative(base);
      if (!rel.empty() && *rel.begin() != "..") payload = rel;
    }
    json record = {{"id", e.id},
                   {"payload_path", payload.generic_string()},
                   {"label", e.label},
                   {"signer", e.signer},
                   {"place", e.place}};
    out << record.dump() << '\n';
  }
  if (!out) throw IoError("failed writing manifest " + path.string());
}

void FrameSequence::validate() const {
  if (frames.empty()) throw InputError("frame sequence is empty");
  for (const auto& f : frames) {
    if (f.shape() != frames.front().shape()) {
      throw ValidationError("inconsistent frame dimensions: " +
                            shape_to_string(frames.front().shape()) + " vs " +
                            shape_to_string(f.shape()));
    }
  }
}

std::vector<std::size_t> subsample_indices(std::size_t length, std::size_t n) {
  if (length == 0 || n == 0) {
    throw InputError("subsample: length and target count must be >= 1");
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i * length / n;
  return idx;
}

FrameSequence subsample_frames(const FrameSequence& seq, std::size_t n) {
  FrameSequence out;
  out.frames.reserve(n);
  for (std::size_t i : subsample_indices(seq.length(), n)) {
    out.frames.push_back(seq.frames[i]);
  }
  return out;
}

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_pnm_token(std::istream& in) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  return token;
}

std::size_t parse_dim(const std::string& token, const fs::path& path) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(token, &pos);
    if (pos != token.size() || v <= 0) throw std::invalid_argument(token);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw FormatError("bad PNM header value '" + token + "' in " + path.string());
  }
}

}  // namespace

Tensor read_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  const std::string magic = next_pnm_token(in);
  std::size_t channels;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw FormatError("not a binary PGM/PPM file: " + path.string());
  }
  const std::size_t width = parse_dim(next_pnm_token(in), path);
  const std::size_t height = parse_dim(next_pnm_token(in), path);
  const std::size_t maxval = parse_dim(next_pnm_token(in), path);
  if (maxval != 255) {
    throw FormatError("unsupported PNM maxval " + std::to_string(maxval) +
                      " in " + path.string());
  }
  std::vector<unsigned char> bytes(width * height * channels);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw FormatError("truncated image payload in " + path.string());
  }
  Tensor image({height, width, channels});
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    image[i] = static_cast<float>(bytes[i]) / 255.0f;
  }
  return image;
}

void write_pnm(const fs::path& path, const Tensor& image) {
  if (image.rank() != 3 || (image.dim(2) != 1 && image.dim(2) != 3)) {
    throw ShapeError("write_pnm: expected H x W x {1,3}, got " +
                     shape_to_string(image.shape()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image " + path.string());
  out << (image.dim(2) == 1 ? "P5" : "P6") << '\n'
      << image.dim(1) << ' ' << image.dim(0) << "\n255\n";
  std::vector<unsigned char> bytes(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const float v = std::clamp(image[i], 0.0f, 1.0f);
    bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing image " + path.string());
}

std::string frame_filename(std::size_t index, std::size_t channels) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04zu.%s", index,
                channels == 3 ? "ppm" : "pgm");
  return buf;
}

FrameSequence load_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw ValidationError("frame directory does not exist: " + dir.string());
  }
  std::map<std::size_t, fs::path> found;
  for (const auto& item : fs::directory_iterator(dir)) {
    const std::string name = item.path().filename().string();
    const std::string ext = item.path().extension().string();
    if (name.rfind("frame_", 0) != 0 || (ext != ".pgm" && ext != ".ppm")) continue;
    const std::string digits = item.path().stem().string().substr(6);
    if (digits.empty() ||
        !std::all_of(digits.begin(), digits.end(),
                     [](unsigned char ch) { return std::isdigit(ch); })) {
      continue;
    }
    const std::size_t index = std::stoul(digits);
    if (!found.emplace(index, item.path()).second) {
      throw ValidationError("frame index " + std::to_string(index) +
                            " appears twice in " + dir.string());
    }
  }
  if (found.empty()) throw ValidationError("no frames found in " + dir.string());
  FrameSequence seq;
  std::size_t expected = 0;
  for (const auto& [index, path] : found) {
    if (index != expected) {
      throw ValidationError("missing frame index " + std::to_string(expected) +
                            " in " + dir.string());
    }
    seq.frames.push_back(read_pnm(path));
    ++expected;
  }
  seq.validate();
  return seq;
}

namespace {
constexpr char kFeatureMagic[4] = {'G', 'F', 'E', 'A'};
}

FeatureSequence read_feature_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature file " + path.string());
  BinaryReader reader(in, path.string());
  char magic[4];
  reader.bytes(magic, 4);
  if (std::memcmp(magic, kFeatureMagic, 4) != 0) {
    throw FormatError("bad magic in feature file " + path.string());
  }
  const std::uint32_t version = reader.u32();
  if (version != kFeatureFileVersion) {
    throw FormatError("unsupported feature file version " +
                      std::to_string(version) + " in " + path.string());
  }
  const std::uint32_t steps = reader.u32();
  const std::uint32_t width = reader.u32();
  if (steps == 0 || width == 0) {
    throw FormatError("feature file " + path.string() + " declares an empty sequence");
  }
  const std::size_t count = static_cast<std::size_t>(steps) * width;
  if (count > fs::file_size(path) / sizeof(float)) {
    throw FormatError("truncated file: " + path.string() + " (header declares " +
                      std::to_string(steps) + " x " + std::to_string(width) + ")");
  }
  std::vector<float> values(count);
  reader.f32_array(values);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after payload in " + path.string());
  }
  return FeatureSequence{Tensor({steps, width}, std::move(values))};
}

void write_feature_file(const fs::path& path, const FeatureSequence& seq) {
  if (seq.vectors.rank() != 2) {
    throw ShapeError("feature sequence must be T x D, got " +
                     shape_to_string(seq.vectors.shape()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write feature file " + path.string());
  BinaryWriter writer(out);
  writer.bytes(kFeatureMagic, 4);
  writer.u32(kFeatureFileVersion);
  writer.u32(static_cast<std::uint32_t>(seq.length()));
  writer.u32(static_cast<std::uint32_t>(seq.width()));
  writer.f32_array(seq.vectors.data());
  if (!out) throw IoError("failed writing feature file " + path.string());
}

Split stratified_split(const std::vector<ManifestEntry>& entries,
                       const LabelVocabulary& vocabulary, double ratio,
                       std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ValidationError("split ratio must lie in (0, 1), got " +
                          std::to_string(ratio));
  }
  std::vector<std::vector<std::size_t>> by_class(vocabulary.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    by_class[vocabulary.index_of(entries[i].label)].push_back(i);
  }
  std::vector<bool> to_eval(entries.size(), false);
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    auto& members = by_class[k];
    if (members.empty()) continue;
    if (members.size() < 2) {
      throw ValidationError("class '" + vocabulary.name(k) +
                            "' has fewer than 2 entries; cannot split");
    }
    const double n = static_cast<double>(members.size());
    auto n_eval = static_cast<std::size_t>(std::llround(n * (1.0 - ratio)));
    n_eval = std::clamp<std::size_t>(n_eval, 1, members.size() - 1);
    Rng rng(derive_seed(seed, k));
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t j = 0; j < n_eval; ++j) to_eval[members[j]] = true;
  }
  Split split;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    (to_eval[i] ? split.eval : split.train).push_back(entries[i]);
  }
  return split;
}

}  // namespace signrec
