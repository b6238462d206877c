#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <numbers>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "signrec/data.hpp"
#include "signrec/synth.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

namespace signrec {
namespace {

using testing::TempDir;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string entry_line(const std::string& id, const std::string& label,
                       const std::string& payload = "payload") {
  return R"({"id":")" + id + R"(","payload_path":")" + payload + R"(","label":")" + label +
         R"(","signer":0,"place":0})" + "\n";
}

TEST(ManifestTest, NineHundredEntryCorpusHasHundredPerClass) {
  TempDir dir;
  fs::create_directories(dir / "payload");
  const auto vocab = LabelVocabulary::esl_default();
  std::string text = R"({"vocabulary":["similar","differ","doctor","free","I love you","judge","Sunday","Talk","Travel"]})"
                     "\n";
  for (std::size_t k = 0; k < 9; ++k)
    for (std::size_t j = 0; j < 100; ++j)
      text += entry_line("v" + std::to_string(k) + "_" + std::to_string(j), vocab.name(k));
  write_text(dir / "m.jsonl", text);
  const auto m = load_manifest(dir / "m.jsonl");
  EXPECT_EQ(m.entries.size(), 900u);
  EXPECT_EQ(m.vocabulary, vocab);
  EXPECT_EQ(m.class_counts(), std::vector<std::size_t>(9, 100));
}

TEST(ManifestTest, EmptyFileIsValidationError) {
  TempDir dir;
  write_text(dir / "m.jsonl", "");
  EXPECT_THROW(load_manifest(dir / "m.jsonl"), ValidationError);
}

TEST(ManifestTest, DuplicateIdIsNamed) {
  TempDir dir;
  fs::create_directories(dir / "payload");
  write_text(dir / "m.jsonl", entry_line("clip7", "a") + entry_line("clip7", "b"));
  try {
    load_manifest(dir / "m.jsonl");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("clip7"), std::string::npos);
  }
}

TEST(ManifestTest, MalformedLineReportsLineNumber) {
  TempDir dir;
  fs::create_directories(dir / "payload");
  write_text(dir / "m.jsonl", entry_line("x", "a") + "\n{not json\n");
  try {
    load_manifest(dir / "m.jsonl");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  write_text(dir / "m.jsonl", entry_line("x", "a") + R"({"id":"y"})" + "\n");
  EXPECT_THROW(load_manifest(dir / "m.jsonl"), ParseError);
}

TEST(ManifestTest, UnknownLabelAgainstDeclaredVocabulary) {
  TempDir dir;
  fs::create_directories(dir / "payload");
  write_text(dir / "m.jsonl", R"({"vocabulary":["a","b"]})" "\n" + entry_line("x", "c"));
  EXPECT_THROW(load_manifest(dir / "m.jsonl"), ValidationError);
}

TEST(ManifestTest, MissingPayloadIsValidationError) {
  TempDir dir;
  write_text(dir / "m.jsonl", entry_line("x", "a", "nowhere"));
  EXPECT_THROW(load_manifest(dir / "m.jsonl"), ValidationError);
}

TEST(ManifestTest, VocabularyInferredAsSortedUniqueLabels) {
  TempDir dir;
  fs::create_directories(dir / "payload");
  write_text(dir / "m.jsonl", entry_line("1", "zeta") + entry_line("2", "alpha") +
                                  entry_line("3", "zeta"));
  const auto m = load_manifest(dir / "m.jsonl");
  EXPECT_EQ(m.vocabulary.names(), (std::vector<std::string>{"alpha", "zeta"}));
  EXPECT_EQ(m.entries[0].payload_path, dir / "payload");
}

TEST(ManifestTest, SaveThenLoadPreservesEntries) {
  TempDir dir;
  fs::create_directories(dir / "videos" / "a");
  Manifest m{LabelVocabulary({"x", "y"}), {{"a", dir / "videos" / "a", "y", 1, 4}}};
  save_manifest(dir / "m.jsonl", m);
  EXPECT_NE(read_bytes(dir / "m.jsonl").find("\"videos/a\""), std::string::npos);
  const auto back = load_manifest(dir / "m.jsonl");
  EXPECT_EQ(back.vocabulary, m.vocabulary);
  ASSERT_EQ(back.entries.size(), 1u);
  EXPECT_EQ(back.entries[0].signer, 1);
  EXPECT_EQ(back.entries[0].place, 4);
  EXPECT_EQ(back.entries[0].payload_path, dir / "videos" / "a");
}

TEST(SubsampleTest, DocumentedIndexPatterns) {
  std::vector<std::size_t> identity(20);
  std::iota(identity.begin(), identity.end(), 0);
  EXPECT_EQ(subsample_indices(20, 20), identity);
  std::vector<std::size_t> every_fifth;
  for (std::size_t i = 0; i < 20; ++i) every_fifth.push_back(5 * i);
  EXPECT_EQ(subsample_indices(100, 20), every_fifth);
  EXPECT_EQ(subsample_indices(3, 5), (std::vector<std::size_t>{0, 0, 1, 1, 2}));
}

TEST(SubsampleTest, IndicesAreMonotoneAndInRange) {
  for (std::size_t t = 1; t <= 40; ++t) {
    for (std::size_t n = 1; n <= 40; ++n) {
      const auto idx = subsample_indices(t, n);
      ASSERT_EQ(idx.size(), n);
      EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
      EXPECT_LT(idx.back(), t);
      EXPECT_EQ(idx.front(), 0u);
    }
  }
}

TEST(SubsampleTest, FramesFollowIndices) {
  FrameSequence seq;
  for (int t = 0; t < 3; ++t) seq.frames.push_back(Tensor({1, 1, 1}, static_cast<float>(t)));
  const auto out = subsample_frames(seq, 5);
  std::vector<float> values;
  for (const auto& f : out.frames) values.push_back(f[0]);
  EXPECT_EQ(values, (std::vector<float>{0, 0, 1, 1, 2}));
}

void write_raw_pgm(const fs::path& path, std::size_t w, std::size_t h,
                   const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << "P5\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

TEST(FramesTest, PgmBytesAreScaledToUnitRange) {
  TempDir dir;
  write_raw_pgm(dir / "frame_0000.pgm", 2, 2, {0, 255, 0, 255});
  const auto seq = load_frames(dir.path());
  ASSERT_EQ(seq.length(), 1u);
  EXPECT_EQ(seq.frames[0], Tensor({2, 2, 1}, std::vector<float>{0, 1, 0, 1}));
}

TEST(FramesTest, MixedDimensionsAreRejected) {
  TempDir dir;
  write_raw_pgm(dir / "frame_0000.pgm", 64, 64, std::vector<unsigned char>(64 * 64));
  write_raw_pgm(dir / "frame_0001.pgm", 32, 32, std::vector<unsigned char>(32 * 32));
  EXPECT_THROW(load_frames(dir.path()), ValidationError);
}

TEST(FramesTest, MissingIndexIsRejected) {
  TempDir dir;
  write_raw_pgm(dir / "frame_0000.pgm", 2, 2, {1, 2, 3, 4});
  write_raw_pgm(dir / "frame_0002.pgm", 2, 2, {1, 2, 3, 4});
  EXPECT_THROW(load_frames(dir.path()), ValidationError);
}

TEST(FramesTest, TwentyFramesLoadInIndexOrder) {
  TempDir dir;
  for (std::size_t t = 0; t < 20; ++t) {
    write_pnm(dir / frame_filename(19 - t, 1), Tensor({3, 2, 1}, static_cast<float>(19 - t) / 255.0f));
  }
  const auto seq = load_frames(dir.path());
  ASSERT_EQ(seq.length(), 20u);
  for (std::size_t t = 0; t < 20; ++t) EXPECT_FLOAT_EQ(seq.frames[t][0], t / 255.0f);
}

TEST(FramesTest, PpmRoundTripKeepsChannels) {
  TempDir dir;
  Tensor image({2, 3, 3});
  for (std::size_t i = 0; i < image.size(); ++i) image[i] = static_cast<float>(i * 13) / 255.0f;
  write_pnm(dir / "frame_0000.ppm", image);
  const auto back = read_pnm(dir / "frame_0000.ppm");
  EXPECT_EQ(back, image);
}

TEST(FramesTest, CommentsInHeaderAreSkipped) {
  TempDir dir;
  std::ofstream out(dir / "frame_0000.pgm", std::ios::binary);
  out << "P5\n# made by hand\n1 1\n255\n" << static_cast<char>(51);
  out.close();
  EXPECT_FLOAT_EQ(read_pnm(dir / "frame_0000.pgm")[0], 0.2f);
}

TEST(FeatureFileTest, RoundTripIsBitIdentical) {
  TempDir dir;
  std::mt19937_64 rng(20);
  const FeatureSequence seq{testing::random_tensor<float>({20, 2048}, rng, -50, 50)};
  write_feature_file(dir / "a.gfea", seq);
  EXPECT_EQ(fs::file_size(dir / "a.gfea"), 16u + 20u * 2048u * 4u);
  const auto back = read_feature_file(dir / "a.gfea");
  EXPECT_EQ(back.vectors.shape(), seq.vectors.shape());
  EXPECT_EQ(std::memcmp(back.vectors.raw(), seq.vectors.raw(), seq.vectors.size() * 4), 0);
}

TEST(FeatureFileTest, RoundTripPreservesAwkwardFiniteValues) {
  TempDir dir;
  const std::vector<float> values{-0.0f, std::numeric_limits<float>::denorm_min(),
                                  std::numeric_limits<float>::max(),
                                  -std::numeric_limits<float>::min(), 1e-30f, 3.0f};
  for (std::size_t t = 1; t <= 6; ++t) {
    const FeatureSequence seq{Tensor({t, 6 / t * 1}, std::vector<float>(values.begin(),
                                                                       values.begin() + t * (6 / t)))};
    write_feature_file(dir / "b.gfea", seq);
    const auto back = read_feature_file(dir / "b.gfea");
    EXPECT_EQ(std::memcmp(back.vectors.raw(), seq.vectors.raw(), seq.vectors.size() * 4), 0);
  }
}

TEST(FeatureFileTest, HeaderLayoutIsLittleEndian) {
  TempDir dir;
  write_feature_file(dir / "c.gfea", FeatureSequence{Tensor({2, 3}, 1.0f)});
  const std::string bytes = read_bytes(dir / "c.gfea");
  EXPECT_EQ(bytes.substr(0, 4), "GFEA");
  EXPECT_EQ(bytes.substr(4, 12), std::string("\x01\0\0\0\x02\0\0\0\x03\0\0\0", 12));
  EXPECT_EQ(bytes.substr(16, 4), std::string("\0\0\x80\x3f", 4));  // 1.0f
}

TEST(FeatureFileTest, BadMagicIsFormatError) {
  TempDir dir;
  write_feature_file(dir / "d.gfea", FeatureSequence{Tensor({2, 3}, 1.0f)});
  std::string bytes = read_bytes(dir / "d.gfea");
  bytes.replace(0, 4, "XXXX");
  std::ofstream(dir / "d.gfea", std::ios::binary) << bytes;
  EXPECT_THROW(read_feature_file(dir / "d.gfea"), FormatError);
}

TEST(FeatureFileTest, BadVersionIsFormatError) {
  TempDir dir;
  write_feature_file(dir / "e.gfea", FeatureSequence{Tensor({2, 3}, 1.0f)});
  std::string bytes = read_bytes(dir / "e.gfea");
  bytes[4] = 2;
  std::ofstream(dir / "e.gfea", std::ios::binary) << bytes;
  EXPECT_THROW(read_feature_file(dir / "e.gfea"), FormatError);
}

TEST(FeatureFileTest, ShortPayloadIsTruncationError) {
  TempDir dir;
  write_feature_file(dir / "f.gfea", FeatureSequence{Tensor({10, 2048}, 0.5f)});
  std::string bytes = read_bytes(dir / "f.gfea");
  bytes[8] = 20;  // header now claims T = 20
  std::ofstream(dir / "f.gfea", std::ios::binary) << bytes;
  try {
    read_feature_file(dir / "f.gfea");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
  }
}

std::vector<ManifestEntry> balanced_entries(std::size_t classes, std::size_t per_class,
                                            LabelVocabulary& vocab) {
  std::vector<std::string> names;
  std::vector<ManifestEntry> entries;
  for (std::size_t k = 0; k < classes; ++k) names.push_back("class" + std::to_string(k));
  for (std::size_t j = 0; j < per_class; ++j)
    for (std::size_t k = 0; k < classes; ++k)
      entries.push_back({names[k] + "_" + std::to_string(j), "", names[k], 0, 0});
  vocab = LabelVocabulary(names);
  return entries;
}

TEST(SplitTest, EightyTwentyPerClass) {
  LabelVocabulary vocab;
  const auto entries = balanced_entries(9, 100, vocab);
  const auto split = stratified_split(entries, vocab, 0.8, 3);
  std::vector<std::size_t> train(9), eval(9);
  for (const auto& e : split.train) ++train[vocab.index_of(e.label)];
  for (const auto& e : split.eval) ++eval[vocab.index_of(e.label)];
  EXPECT_EQ(train, std::vector<std::size_t>(9, 80));
  EXPECT_EQ(eval, std::vector<std::size_t>(9, 20));
}

TEST(SplitTest, DeterministicPartitionOfTheInput) {
  LabelVocabulary vocab;
  const auto entries = balanced_entries(4, 13, vocab);
  const auto a = stratified_split(entries, vocab, 0.7, 11);
  const auto b = stratified_split(entries, vocab, 0.7, 11);
  auto ids = [](const std::vector<ManifestEntry>& v) {
    std::vector<std::string> out;
    for (const auto& e : v) out.push_back(e.id);
    return out;
  };
  EXPECT_EQ(ids(a.train), ids(b.train));
  EXPECT_EQ(ids(a.eval), ids(b.eval));
  EXPECT_NE(ids(a.eval), ids(stratified_split(entries, vocab, 0.7, 12).eval));

  const auto train_ids = ids(a.train), eval_ids = ids(a.eval);
  const std::set<std::string> train(train_ids.begin(), train_ids.end());
  std::set<std::string> all;
  for (const auto& id : eval_ids) EXPECT_FALSE(train.count(id)) << id;
  for (const auto& e : entries) all.insert(e.id);
  EXPECT_EQ(a.train.size() + a.eval.size(), entries.size());
  std::set<std::string> joined = train;
  for (const auto& id : eval_ids) joined.insert(id);
  EXPECT_EQ(joined, all);
}

TEST(SplitTest, EvalCountsWithinOneOfRoundedShare) {
  LabelVocabulary vocab;
  for (std::size_t per_class : {2u, 3u, 7u, 10u, 33u}) {
    const auto entries = balanced_entries(3, per_class, vocab);
    for (double ratio : {0.1, 0.5, 0.8, 0.95}) {
      const auto split = stratified_split(entries, vocab, ratio, 1);
      std::vector<long> eval(3, 0);
      for (const auto& e : split.eval) ++eval[vocab.index_of(e.label)];
      const double target = std::round(per_class * (1.0 - ratio));
      for (long n : eval) {
        EXPECT_LE(std::abs(n - target), 1.0);
        EXPECT_GE(n, 1);
        EXPECT_LT(n, static_cast<long>(per_class));
      }
    }
  }
}

TEST(SplitTest, RejectsTinyClassesAndBadRatios) {
  LabelVocabulary vocab;
  auto entries = balanced_entries(2, 1, vocab);
  EXPECT_THROW(stratified_split(entries, vocab, 0.8, 0), ValidationError);
  entries = balanced_entries(2, 5, vocab);
  EXPECT_THROW(stratified_split(entries, vocab, 1.0, 0), ValidationError);
  EXPECT_THROW(stratified_split(entries, vocab, 0.0, 0), ValidationError);
}

TEST(SynthTest, MicroCorpusLayout) {
  TempDir dir;
  SynthConfig cfg;
  cfg.classes = 2;
  cfg.per_class = 2;
  const auto m = gen_synthetic(dir.path(), cfg);
  ASSERT_EQ(m.entries.size(), 4u);
  for (const auto& e : m.entries) {
    const auto seq = load_frames(e.payload_path);
    EXPECT_EQ(seq.length(), 20u);
    EXPECT_EQ(seq.frames[0].shape(), (Shape{64, 64, 1}));
  }
  const auto back = load_manifest(dir / "manifest.jsonl");
  EXPECT_EQ(back.entries.size(), 4u);
  EXPECT_EQ(back.vocabulary.names(), (std::vector<std::string>{"similar", "differ"}));
}

TEST(SynthTest, DefaultsMirrorReferenceCorpusCounts) {
  TempDir dir;
  SynthConfig cfg;
  cfg.frames = 2;  // counts do not depend on length; keeps the test quick
  cfg.height = cfg.width = 16;
  const auto m = gen_synthetic(dir.path(), cfg);
  EXPECT_EQ(m.entries.size(), 900u);
  EXPECT_EQ(m.vocabulary, LabelVocabulary::esl_default());
  EXPECT_EQ(m.class_counts(), std::vector<std::size_t>(9, 100));
  std::map<std::pair<std::string, int>, int> per_place;
  std::map<std::pair<std::string, int>, int> per_signer;
  for (const auto& e : m.entries) {
    ++per_place[{e.label, e.place}];
    ++per_signer[{e.label, e.signer}];
  }
  EXPECT_EQ(per_place.size(), 45u);
  for (const auto& [key, n] : per_place) EXPECT_EQ(n, 20);
  EXPECT_EQ(per_signer.size(), 18u);
  for (const auto& [key, n] : per_signer) EXPECT_EQ(n, 50);
}

TEST(SynthTest, SameSeedGivesBitIdenticalCorpus) {
  TempDir a, b, c;
  SynthConfig cfg;
  cfg.classes = 3;
  cfg.per_class = 2;
  cfg.frames = 4;
  cfg.seed = 17;
  const auto ma = gen_synthetic(a.path(), cfg);
  gen_synthetic(b.path(), cfg);
  cfg.seed = 18;
  gen_synthetic(c.path(), cfg);
  EXPECT_EQ(read_bytes(a / "manifest.jsonl"), read_bytes(b / "manifest.jsonl"));
  bool any_difference = false;
  for (const auto& e : ma.entries) {
    for (std::size_t t = 0; t < 4; ++t) {
      const auto rel = fs::path("videos") / e.id / frame_filename(t, 1);
      EXPECT_EQ(read_bytes(a.path() / rel), read_bytes(b.path() / rel));
      any_difference |= read_bytes(a.path() / rel) != read_bytes(c.path() / rel);
    }
  }
  EXPECT_TRUE(any_difference);
}

TEST(SynthTest, SignerFlipsPolarityAndPlaceShiftsBackground) {
  GestureRender bright;
  bright.noise_seed = 1;
  GestureRender dark = bright;
  dark.signer = 1;
  const auto a = render_gesture(bright, 1, 32, 32).frames[0];
  const auto b = render_gesture(dark, 1, 32, 32).frames[0];
  // Centre pixel carries the blob peak; the corner is background.
  EXPECT_GT(a(15, 15, 0), 0.8f);
  EXPECT_LT(a(0, 0, 0), 0.15f);
  EXPECT_LT(b(15, 15, 0), 0.2f);
  EXPECT_GT(b(0, 0, 0), 0.85f);

  GestureRender near_place = bright, far_place = bright;
  near_place.place = 2;
  far_place.place = 4;
  double mean0 = 0, mean4 = 0;
  const auto p0 = render_gesture(near_place, 1, 32, 32).frames[0];
  const auto p4 = render_gesture(far_place, 1, 32, 32).frames[0];
  for (std::size_t i = 0; i < p0.size(); ++i) {
    mean0 += p0[i];
    mean4 += p4[i];
  }
  EXPECT_NEAR((mean4 - mean0) / p0.size(), 0.1, 0.01);
}

// Nearest-template classifier: renders a clean reference video per class
// (nominal speed, no jitter, matching signer/place) and picks the smallest
// squared distance. Recovering the class this way shows the corpus carries
// its label in the motion direction.
TEST(SynthTest, MotionDirectionRecoverableByTemplateMatching) {
  TempDir dir;
  SynthConfig cfg;
  cfg.per_class = 6;
  cfg.frames = 10;
  cfg.height = cfg.width = 32;
  cfg.seed = 5;
  const auto m = gen_synthetic(dir.path(), cfg);
  std::size_t correct = 0;
  for (const auto& e : m.entries) {
    const auto seq = load_frames(e.payload_path);
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cfg.classes; ++k) {
      GestureRender ref;
      ref.angle = 2.0 * std::numbers::pi * k / cfg.classes;
      ref.signer = e.signer;
      ref.place = e.place;
      const auto tmpl = render_gesture(ref, cfg.frames, 32, 32);
      double dist = 0;
      for (std::size_t t = 0; t < cfg.frames; ++t)
        for (std::size_t i = 0; i < tmpl.frames[t].size(); ++i) {
          const double d = seq.frames[t][i] - tmpl.frames[t][i];
          dist += d * d;
        }
      if (dist < best_dist) {
        best_dist = dist;
        best = k;
      }
    }
    correct += m.vocabulary.name(best) == e.label;
  }
  EXPECT_GE(static_cast<double>(correct) / m.entries.size(), 0.95);
}

TEST(SynthTest, TemporalPairsShareFramesInOppositeOrder) {
  TempDir dir;
  const auto m = gen_temporal_pairs(dir.path(), 3, 6, 16, 16, 2);
  ASSERT_EQ(m.entries.size(), 6u);
  for (std::size_t p = 0; p < 3; ++p) {
    const auto fwd = load_frames(m.entries[2 * p].payload_path);
    const auto rev = load_frames(m.entries[2 * p + 1].payload_path);
    EXPECT_EQ(m.entries[2 * p].label, "forward");
    EXPECT_EQ(m.entries[2 * p + 1].label, "reverse");
    for (std::size_t t = 0; t < 6; ++t) EXPECT_EQ(fwd.frames[t], rev.frames[5 - t]);
  }
}

TEST(SynthTest, UnwritableOutputIsIoError) {
  TempDir dir;
  write_text(dir / "file", "x");
  SynthConfig cfg;
  cfg.classes = 1;
  cfg.per_class = 1;
  EXPECT_THROW(gen_synthetic(dir / "file", cfg), IoError);
}

}  // namespace
}  // namespace signrec
