#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <set>

#include "embellish/corpus/cct.hpp"
#include "embellish/corpus/parallel.hpp"
#include "embellish/io.hpp"
#include "../support/fixtures.hpp"

namespace embellish {
namespace {

using testing::data_path;

ParallelCorpus numbered(std::size_t n) {
  ParallelCorpus c;
  for (std::size_t i = 0; i < n; ++i)
    c.push_back(Sentence({"s" + std::to_string(i)}), Sentence({"t" + std::to_string(i)}));
  return c;
}

std::multiset<std::string> token_multiset(const std::vector<Sentence>& sents) {
  std::multiset<std::string> out;
  for (const auto& s : sents) out.insert(s.tokens.begin(), s.tokens.end());
  return out;
}

TEST(LoadParallel, AlignedFiles) {
  testing::TempDir dir;
  io::write_lines(dir / "a.src", {"a b", "c", "d e f"});
  io::write_lines(dir / "a.tgt", {"A B", "C", "D E F"});
  const auto c = load_parallel(dir / "a.src", dir / "a.tgt");
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c.target[2].tokens, (std::vector<std::string>{"D", "E", "F"}));
}

TEST(LoadParallel, MismatchReportsBothCounts) {
  testing::TempDir dir;
  io::write_lines(dir / "a.src", {"a", "b", "c"});
  io::write_lines(dir / "a.tgt", {"a", "b", "c", "d"});
  try {
    load_parallel(dir / "a.src", dir / "a.tgt");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("3 vs 4"), std::string::npos);
  }
}

TEST(LoadParallel, EmptyLineNamesLineNumber) {
  testing::TempDir dir;
  io::write_lines(dir / "a.src", {"a", "", "c"});
  io::write_lines(dir / "a.tgt", {"a", "b", "c"});
  try {
    load_parallel(dir / "a.src", dir / "a.tgt");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
  EXPECT_THROW(load_parallel(dir / "missing.src", dir / "a.tgt"), IoError);
}

TEST(LoadParallel, ReserializationIsByteIdentical) {
  testing::TempDir dir;
  save_parallel(dir / "x.src", dir / "x.tgt",
                load_parallel(data_path("report_inputs.txt"), data_path("report_outputs.txt")));
  EXPECT_EQ(io::read_file(dir / "x.src"), io::read_file(data_path("report_inputs.txt")));
  EXPECT_EQ(io::read_file(dir / "x.tgt"), io::read_file(data_path("report_outputs.txt")));
}

TEST(LoadCct, SmallFixtureCounts) {
  const auto c = load_cct(data_path("cct_small.cct"));
  EXPECT_EQ(c.counts(), (CctCounts{1, 1, 2, 5}));
  EXPECT_EQ(c.counts(), load_manifest(data_path("cct_small.manifest")));
  EXPECT_EQ(c.systems[0].name, "solo");
  EXPECT_EQ(c.systems[0].stories[0].title, "the well");
}

TEST(LoadCct, MiniFixture) {
  const auto c = load_cct(data_path("cct_mini.cct"));
  EXPECT_EQ(c.counts(), (CctCounts{2, 3, 5, 11}));
  EXPECT_EQ(c.counts(), load_manifest(data_path("cct_mini.manifest")));
  EXPECT_EQ(c.systems[1].name, "second teller");
  EXPECT_EQ(to_line(c.systems[1].stories[0].paragraphs[0].sentences[1]), "\" Buy my cloth , \" she said .");
}

TEST(LoadCct, EmptyFile) {
  testing::TempDir dir;
  io::write_file_atomic(dir / "empty.cct", "");
  const auto c = load_cct(dir / "empty.cct");
  EXPECT_TRUE(c.empty());
  for (auto g : {Granularity::system, Granularity::story, Granularity::paragraph, Granularity::sentence})
    EXPECT_TRUE(split_cct(c, g).empty());
}

TEST(LoadCct, Errors) {
  try {
    load_cct(data_path("cct_bad_nesting.cct"));
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  try {
    load_cct(data_path("cct_bad_marker.cct"));
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("####SECTION"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_cct({"just a sentence"}), DataError);
  EXPECT_THROW(parse_cct({"##STORY\tx"}), DataError);
  EXPECT_THROW(load_cct("/nonexistent/file.cct"), IoError);
}

TEST(LoadCct, SpaceSeparatedTitles) {
  const auto c = parse_cct({"#SYSTEM  two words", "##STORY the  end", "###PARAGRAPH", "Fin."});
  EXPECT_EQ(c.systems[0].name, "two words");
  EXPECT_EQ(c.systems[0].stories[0].title, "the end");
}

TEST(LoadCct, FormatRoundTrip) {
  const auto c = load_cct(data_path("cct_mini.cct"));
  const auto again = parse_cct(format_cct(c));
  EXPECT_EQ(again.counts(), c.counts());
  EXPECT_EQ(split_cct(again, Granularity::sentence), split_cct(c, Granularity::sentence));
}

TEST(SplitCct, GranularityCountsAndSums) {
  const auto c = load_cct(data_path("cct_mini.cct"));
  const auto counts = c.counts();
  EXPECT_EQ(split_cct(c, Granularity::system).size(), counts.systems);
  EXPECT_EQ(split_cct(c, Granularity::story).size(), counts.stories);
  EXPECT_EQ(split_cct(c, Granularity::paragraph).size(), counts.paragraphs);
  EXPECT_EQ(split_cct(c, Granularity::sentence).size(), counts.sentences);

  // Every granularity covers the same tokens in document order.
  const auto sentences = split_cct(c, Granularity::sentence);
  std::vector<std::string> flat;
  for (const auto& s : sentences) flat.insert(flat.end(), s.tokens.begin(), s.tokens.end());
  for (auto g : {Granularity::system, Granularity::story, Granularity::paragraph}) {
    std::vector<std::string> other;
    for (const auto& s : split_cct(c, g)) other.insert(other.end(), s.tokens.begin(), s.tokens.end());
    EXPECT_EQ(other, flat);
  }
}

TEST(MakePairUnits, CrossesParagraphBoundaries) {
  const auto c = load_cct(data_path("cct_small.cct"));
  const auto sents = split_cct(c, Granularity::sentence);
  const auto pairs = make_pair_units(c);
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_EQ(pairs[0], concat(sents[0], sents[1]));
  EXPECT_EQ(pairs[1], concat(sents[2], sents[3]));  // spans the paragraph break
  EXPECT_EQ(pairs[2], sents[4]);
  EXPECT_EQ(token_multiset(pairs), token_multiset(sents));
}

TEST(MakePairUnits, SingleSentenceAndAppendix) {
  EXPECT_EQ(make_pair_units(parse_cct({"#SYSTEM\ta", "##STORY\tb", "###PARAGRAPH", "One."})).size(), 1u);
  const auto appendix = load_cct(data_path("appendix_story.cct"));
  const auto pairs = make_pair_units(appendix);
  const auto original = io::read_lines(data_path("appendix_original.txt"));
  ASSERT_EQ(pairs.size(), original.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) EXPECT_EQ(to_line(pairs[i]), original[i]);
}

TEST(Manifest, ParsingAndErrors) {
  testing::TempDir dir;
  io::write_lines(dir / "ok", {"# published counts", "systems=8", "stories=14", "paragraphs=45", "sentences=290"});
  EXPECT_EQ(load_manifest(dir / "ok"), kPublishedCctCounts);
  io::write_lines(dir / "partial", {"systems=8"});
  EXPECT_THROW(load_manifest(dir / "partial"), DataError);
  io::write_lines(dir / "junk", {"systems=8", "stories=x", "paragraphs=45", "sentences=290"});
  EXPECT_THROW(load_manifest(dir / "junk"), DataError);
  io::write_lines(dir / "unknown", {"chapters=3"});
  EXPECT_THROW(load_manifest(dir / "unknown"), DataError);
}

TEST(PublishedCorpus, MatchesPublishedCounts) {
  const char* path = std::getenv("EMBELLISH_CCT_CORPUS");
  if (!path) GTEST_SKIP() << "EMBELLISH_CCT_CORPUS not set";
  const auto c = std::filesystem::is_directory(path) ? convert_cct_directory(path) : load_cct(path);
  EXPECT_EQ(c.counts(), kPublishedCctCounts);
  EXPECT_EQ(split_cct(c, Granularity::story).size(), 14u);
  EXPECT_EQ(split_cct(c, Granularity::sentence).size(), 290u);
  EXPECT_EQ(make_pair_units(c).size(), 145u);
}

TEST(ConvertDirectory, BlankLinesSeparateParagraphs) {
  testing::TempDir dir;
  std::filesystem::create_directories(dir.path() / "teller-b");
  std::filesystem::create_directories(dir.path() / "teller-a");
  io::write_lines(dir / "teller-a/01-first.txt", {"One sentence. Two", "sentences!", "", "\"Three,\" he said. Four?"});
  io::write_lines(dir / "teller-a/02-second.txt", {"Alone."});
  io::write_lines(dir / "teller-b/story.txt", {"Hello there."});
  const auto c = convert_cct_directory(dir.path());
  EXPECT_EQ(c.counts(), (CctCounts{2, 3, 4, 6}));
  EXPECT_EQ(c.systems[0].name, "teller-a");
  EXPECT_EQ(c.systems[0].stories[0].title, "01-first");
  EXPECT_EQ(to_line(c.systems[0].stories[0].paragraphs[1].sentences[0]), "\" Three , \" he said .");
  EXPECT_THROW(convert_cct_directory(dir / "teller-a/02-second.txt"), IoError);
}

TEST(SplitDataset, Sizes) {
  const auto s = split_dataset(numbered(10), {0.8, 0.1, 0.1}, 7);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.valid.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
  const auto h = split_dataset(numbered(100), {0.5, 0.25, 0.25}, 7);
  EXPECT_EQ(h.train.size(), 50u);
  EXPECT_EQ(h.valid.size(), 25u);
  EXPECT_EQ(h.test.size(), 25u);
}

TEST(SplitDataset, DeterministicDisjointExhaustive) {
  const auto c = numbered(57);
  const auto a = split_dataset(c, {0.7, 0.2, 0.1}, 3);
  const auto b = split_dataset(c, {0.7, 0.2, 0.1}, 3);
  EXPECT_EQ(a.train.source, b.train.source);
  EXPECT_EQ(a.valid.source, b.valid.source);
  EXPECT_EQ(a.test.source, b.test.source);
  EXPECT_NE(split_dataset(c, {0.7, 0.2, 0.1}, 4).train.source, a.train.source);

  std::multiset<std::string> seen;
  for (const auto* part : {&a.train, &a.valid, &a.test})
    for (std::size_t i = 0; i < part->size(); ++i) {
      seen.insert(part->source[i].tokens[0]);
      // Alignment survives the shuffle.
      EXPECT_EQ(part->source[i].tokens[0].substr(1), part->target[i].tokens[0].substr(1));
    }
  EXPECT_EQ(seen.size(), c.size());
  EXPECT_EQ(std::set<std::string>(seen.begin(), seen.end()).size(), c.size());
}

TEST(SplitDataset, Errors) {
  EXPECT_THROW(split_dataset(numbered(2), {0.8, 0.1, 0.1}, 1), DataError);
  EXPECT_THROW(split_dataset(numbered(10), {0.8, 0.2, 0.0}, 1), UsageError);
  EXPECT_THROW(split_dataset(numbered(10), {0.8, 0.1, 0.2}, 1), UsageError);
  const auto tiny = split_dataset(numbered(3), {0.98, 0.01, 0.01}, 1);
  EXPECT_EQ(tiny.train.size() + tiny.valid.size() + tiny.test.size(), 3u);
  EXPECT_EQ(tiny.valid.size(), 1u);
  EXPECT_EQ(tiny.test.size(), 1u);
}

TEST(Subsample, SeededOrderedWithoutReplacement) {
  const auto c = numbered(100);
  const auto a = subsample(c, 10, 5);
  EXPECT_EQ(a.size(), 10u);
  EXPECT_EQ(a.source, subsample(c, 10, 5).source);
  std::vector<int> idx;
  for (const auto& s : a.source) idx.push_back(std::stoi(s.tokens[0].substr(1)));
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
  EXPECT_EQ(std::set<int>(idx.begin(), idx.end()).size(), 10u);
  EXPECT_EQ(subsample(c, 500, 5).size(), 100u);
}

}  // namespace
}  // namespace embellish
