#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "embellish/io.hpp"
#include "embellish/random.hpp"
#include "embellish/textpipe.hpp"
#include "../support/fixtures.hpp"

namespace embellish {
namespace {

using Tokens = std::vector<std::string>;

Sentence S(Tokens t) { return Sentence(std::move(t)); }

// Recognizer that tags fixed token positions.
EntityRecognizer spans_of(std::vector<EntitySpan> spans) {
  return [spans](const Sentence&) { return spans; };
}

EntityRecognizer people(std::initializer_list<const char*> names) {
  GazetteerRecognizer r;
  for (auto n : names) r.add(n, EntityCategory::person);
  return r;
}

TEST(Tokenize, SplitsClitics) { EXPECT_EQ(tokenize("You're fired").tokens, (Tokens{"You", "'re", "fired"})); }

TEST(Tokenize, EmptyInput) {
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize("   \t ").empty());
}

TEST(Tokenize, KeepsPlaceholdersWhole) {
  EXPECT_EQ(tokenize("PERSON@1 saw the affair.").tokens, (Tokens{"PERSON@1", "saw", "the", "affair", "."}));
}

TEST(Tokenize, Punctuation) {
  EXPECT_EQ(tokenize("Wait, (really)? Yes: no; done!").tokens,
            (Tokens{"Wait", ",", "(", "really", ")", "?", "Yes", ":", "no", ";", "done", "!"}));
  EXPECT_EQ(tokenize("``Go home,'' he said.").tokens,
            (Tokens{"``", "Go", "home", ",", "''", "he", "said", "."}));
  EXPECT_EQ(tokenize("\"Hi\"").tokens, (Tokens{"\"", "Hi", "\""}));
}

TEST(Tokenize, AllClitics) {
  EXPECT_EQ(tokenize("they're it's we've you'll she'd I'm don't").tokens,
            (Tokens{"they", "'re", "it", "'s", "we", "'ve", "you", "'ll", "she", "'d", "I", "'m", "do", "n't"}));
}

TEST(Tokenize, NumbersKeepInnerSeparators) {
  EXPECT_EQ(tokenize("It cost 3.50 or 1,000.").tokens, (Tokens{"It", "cost", "3.50", "or", "1,000", "."}));
}

TEST(Tokenize, TokenizedTextIsAFixedPoint) {
  for (const auto& line : io::read_lines(testing::data_path("appendix_sentences.txt"))) {
    const auto s = tokenize(line);
    EXPECT_EQ(to_line(s), line);
    for (const auto& t : s.tokens) EXPECT_FALSE(t.empty());
    EXPECT_NO_THROW(validate(s));
  }
  for (const auto& line : io::read_lines(testing::data_path("appendix_original.txt")))
    EXPECT_EQ(to_line(tokenize(line)), line);
}

TEST(Detokenize, Examples) {
  EXPECT_EQ(detokenize(S({"You", "'re", "fired"})), "You're fired");
  EXPECT_EQ(detokenize(S({})), "");
  EXPECT_EQ(detokenize(S({"hello", "."})), "hello.");
  EXPECT_EQ(detokenize(S({"``", "Go", "home", ",", "''", "he", "said", "."})), "``Go home,'' he said.");
  EXPECT_EQ(detokenize(S({"\"", "Hi", "\"", "she", "said"})), "\"Hi\" she said");
  EXPECT_EQ(detokenize(S({"a", "(", "b", ")", "c"})), "a (b) c");
}

TEST(Detokenize, RoundTripsRawText) {
  for (const std::string raw : {"You're fired, said Anna.", "Don't go (please)!", "It cost 3.50 dollars.",
                                "\"Buy my cloth,\" she said."})
    EXPECT_EQ(detokenize(tokenize(raw)), raw);
}

TEST(Validate, RejectsBadTokens) {
  EXPECT_THROW(validate(S({"a", ""})), DataError);
  EXPECT_THROW(validate(S({"a b"})), DataError);
}

TEST(Placeholder, Parsing) {
  EXPECT_TRUE(parse_placeholder("PERSON@1"));
  EXPECT_EQ(parse_placeholder("LOCATION@12")->index, 12);
  EXPECT_FALSE(parse_placeholder("PERSON@0"));
  EXPECT_FALSE(parse_placeholder("PERSON@01"));
  EXPECT_FALSE(parse_placeholder("ANIMAL@1"));
  EXPECT_FALSE(parse_placeholder("person@1"));
  EXPECT_FALSE(parse_placeholder("PERSON@"));
  EXPECT_TRUE(looks_like_placeholder("ANIMAL@1"));
}

TEST(Anonymize, NumbersByFirstAppearance) {
  const auto r = anonymize(S({"Anna", "paid", "Maria"}), people({"Anna", "Maria"}), EntityMap("doc"));
  EXPECT_EQ(r.sentence.tokens, (Tokens{"PERSON@1", "paid", "PERSON@2"}));
  ASSERT_EQ(r.map.entries().size(), 2u);
  EXPECT_EQ(r.map.entries()[0], (EntityEntry{"PERSON@1", {"Anna"}, EntityCategory::person}));
  EXPECT_EQ(r.map.entries()[1], (EntityEntry{"PERSON@2", {"Maria"}, EntityCategory::person}));
}

TEST(Anonymize, NoEntitiesLeavesEverythingUnchanged) {
  const auto r = anonymize(S({"the", "cat", "slept"}), people({"Anna"}), EntityMap("doc"));
  EXPECT_EQ(r.sentence.tokens, (Tokens{"the", "cat", "slept"}));
  EXPECT_TRUE(r.map.empty());
}

TEST(Anonymize, SecondMentionReusesPlaceholder) {
  const auto first = anonymize(S({"Anna", "paid", "Maria"}), people({"Anna", "Maria"}), EntityMap("doc"));
  const auto second = anonymize(S({"then", "Anna", "left"}), people({"Anna", "Maria"}), first.map);
  EXPECT_EQ(second.sentence.tokens, (Tokens{"then", "PERSON@1", "left"}));
  EXPECT_EQ(second.map.entries(), first.map.entries());
}

TEST(Anonymize, CategoriesNumberIndependently) {
  GazetteerRecognizer r;
  r.add("Anna", EntityCategory::person);
  r.add("London", EntityCategory::location);
  r.add("Oscar", EntityCategory::person);
  const auto out = anonymize(S({"Anna", "left", "London", "with", "Oscar"}), r, EntityMap("doc"));
  EXPECT_EQ(out.sentence.tokens, (Tokens{"PERSON@1", "left", "LOCATION@1", "with", "PERSON@2"}));
}

TEST(Anonymize, MultiTokenSpans) {
  const auto r = anonymize(S({"Oscar", "Wilde", "wrote", "."}), spans_of({{0, 2, EntityCategory::person}}),
                           EntityMap("doc"));
  EXPECT_EQ(r.sentence.tokens, (Tokens{"PERSON@1", "wrote", "."}));
  EXPECT_EQ(r.map.entries()[0].surface, (Tokens{"Oscar", "Wilde"}));
}

TEST(Anonymize, OverlappingSpansAreRejectedWithBothNamed) {
  try {
    anonymize(S({"a", "b", "c"}), spans_of({{0, 2, EntityCategory::person}, {1, 3, EntityCategory::misc}}),
              EntityMap("doc"));
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("[0, 2)"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[1, 3)"), std::string::npos);
  }
  EXPECT_THROW(anonymize(S({"a"}), spans_of({{0, 2, EntityCategory::person}}), EntityMap("doc")), DataError);
}

TEST(Anonymize, ExistingPlaceholdersAreReserved) {
  const auto r = anonymize(S({"PERSON@1", "met", "Anna"}), people({"Anna"}), EntityMap("doc"));
  EXPECT_EQ(r.sentence.tokens, (Tokens{"PERSON@1", "met", "PERSON@2"}));
  const auto back = deanonymize(r.sentence, r.map);
  EXPECT_EQ(back.sentence.tokens, (Tokens{"PERSON@1", "met", "Anna"}));
  EXPECT_TRUE(back.warnings.empty());
}

TEST(Deanonymize, Examples) {
  const auto a = anonymize(S({"Anna", "paid", "Maria"}), people({"Anna", "Maria"}), EntityMap("doc"));
  EXPECT_EQ(deanonymize(S({"PERSON@1", "paid", "PERSON@2"}), a.map).sentence.tokens,
            (Tokens{"Anna", "paid", "Maria"}));
  const auto plain = deanonymize(S({"no", "names"}), a.map);
  EXPECT_EQ(plain.sentence.tokens, (Tokens{"no", "names"}));
  EXPECT_TRUE(plain.warnings.empty());

  const auto missing = deanonymize(S({"towards", "LOCATION@9"}), EntityMap("doc"));
  EXPECT_EQ(missing.sentence.tokens, (Tokens{"towards", "LOCATION@9"}));
  ASSERT_EQ(missing.warnings.size(), 1u);
  EXPECT_EQ(missing.warnings[0].position, 1u);
  EXPECT_EQ(missing.warnings[0].placeholder, "LOCATION@9");
}

TEST(Anonymize, RoundTripOverRandomSpans) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Tokens toks;
    const auto n = 1 + uniform_index(rng, 12);
    for (std::size_t i = 0; i < n; ++i) toks.push_back("w" + std::to_string(uniform_index(rng, 5)));
    std::vector<EntitySpan> spans;
    for (std::size_t pos = 0; pos < n;) {
      const auto len = 1 + uniform_index(rng, 3);
      if (uniform_index(rng, 3) == 0 && pos + len <= n)
        spans.push_back({pos, pos + len, kEntityCategories[uniform_index(rng, 4)]});
      pos += len;
    }
    const auto s = S(toks);
    const auto a = anonymize(s, spans_of(spans), EntityMap("doc"));
    const auto back = deanonymize(a.sentence, a.map);
    EXPECT_EQ(back.sentence, s);
    EXPECT_TRUE(back.warnings.empty());

    // Consecutive numbering from 1 within each category.
    std::map<EntityCategory, int> next;
    for (const auto& e : a.map.entries()) EXPECT_EQ(parse_placeholder(e.placeholder)->index, ++next[e.category]);
  }
}

TEST(GazetteerRecognizer, CapitalizedHeuristicSkipsSentenceStarts) {
  GazetteerRecognizer r;
  r.add("London", EntityCategory::location);
  const auto spans = r(S({"Yesterday", "Dolores", "Haze", "visited", "London", ".", "Then", "she", "met", "Bob"}));
  ASSERT_EQ(spans.size(), 3u);
  EXPECT_EQ(spans[0].begin, 1u);
  EXPECT_EQ(spans[0].end, 3u);
  EXPECT_EQ(spans[0].category, EntityCategory::person);
  EXPECT_EQ(spans[1].category, EntityCategory::location);
  EXPECT_EQ(spans[2].begin, 9u);
}

TEST(GazetteerRecognizer, FromFile) {
  const auto r = GazetteerRecognizer::from_file(testing::repo_data_path("gazetteer.tsv"));
  const auto spans = r(S({"Oscar", "went", "to", "Paris"}));
  ASSERT_EQ(spans.size(), 2u);
  EXPECT_EQ(spans[0].category, EntityCategory::person);
  EXPECT_EQ(spans[1].category, EntityCategory::location);

  testing::TempDir dir;
  io::write_lines(dir / "bad.tsv", {"Anna\tHERO"});
  EXPECT_THROW(GazetteerRecognizer::from_file(dir / "bad.tsv"), DataError);
  EXPECT_THROW(GazetteerRecognizer::from_file(dir / "missing.tsv"), IoError);
}

TEST(EntitySidecar, RoundTrip) {
  auto a = anonymize(S({"Oscar", "Wilde", "met", "Anna"}),
                     spans_of({{0, 2, EntityCategory::person}, {3, 4, EntityCategory::person}}), EntityMap("story-1"));
  auto b = anonymize(S({"Rina", "saw", "Paris"}),
                     spans_of({{0, 1, EntityCategory::person}, {2, 3, EntityCategory::location}}), EntityMap("story-2"));
  auto lines = format_entity_sidecar(a.map);
  EXPECT_EQ(lines[0], "story-1\tPERSON@1\tOscar Wilde");
  for (auto& l : format_entity_sidecar(b.map)) lines.push_back(l);

  testing::TempDir dir;
  io::write_lines(dir / "x.entities", lines);
  const auto maps = read_entity_sidecar(dir / "x.entities");
  ASSERT_EQ(maps.size(), 2u);
  EXPECT_EQ(maps.at("story-1").entries(), a.map.entries());
  EXPECT_EQ(maps.at("story-2").entries(), b.map.entries());

  io::write_lines(dir / "bad.entities", {"story-1\tPERSON-1\tAnna"});
  EXPECT_THROW(read_entity_sidecar(dir / "bad.entities"), DataError);
  io::write_lines(dir / "dup.entities", {"s\tPERSON@1\tAnna", "s\tPERSON@1\tMaria"});
  EXPECT_THROW(read_entity_sidecar(dir / "dup.entities"), DataError);
}

TEST(PairSentences, StrideTwo) {
  const auto s1 = S({"a"}), s2 = S({"b", "c"}), s3 = S({"d"}), s4 = S({"e"});
  const auto pairs = pair_sentences({s1, s2, s3, s4});
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].tokens, (Tokens{"a", "b", "c"}));
  EXPECT_EQ(pairs[1].tokens, (Tokens{"d", "e"}));
  EXPECT_EQ(pair_sentences({s1}), std::vector<Sentence>{s1});
  EXPECT_TRUE(pair_sentences({}).empty());
}

TEST(PairSentences, LengthAndTokenMultiset) {
  for (std::size_t n = 0; n <= 291; n += 17) {
    std::vector<Sentence> sents;
    for (std::size_t i = 0; i < n; ++i) sents.push_back(S({"t" + std::to_string(i), "x"}));
    const auto pairs = pair_sentences(sents);
    EXPECT_EQ(pairs.size(), (n + 1) / 2);
    Tokens before, after;
    for (const auto& s : sents) before.insert(before.end(), s.tokens.begin(), s.tokens.end());
    for (const auto& s : pairs) after.insert(after.end(), s.tokens.begin(), s.tokens.end());
    EXPECT_EQ(before, after);
  }
  std::vector<Sentence> cct(290, S({"x"}));
  EXPECT_EQ(pair_sentences(cct).size(), 145u);
}

TEST(Vocabulary, FrequencyOrder) {
  const std::vector<Sentence> corpus = {S({"a", "a", "b"})};
  const auto v = build_vocabulary(corpus, 6);
  EXPECT_EQ(v.tokens(), (Tokens{"<pad>", "<s>", "</s>", "<unk>", "a", "b"}));
  EXPECT_EQ(v.id_of("a"), 4);
  EXPECT_EQ(v.id_of("b"), 5);
}

TEST(Vocabulary, EmptyCorpusHasOnlySpecials) {
  const auto v = build_vocabulary(std::vector<Sentence>{});
  EXPECT_EQ(v.size(), kNumSpecials);
  EXPECT_EQ(v.token_of(kPadId), "<pad>");
  EXPECT_EQ(v.token_of(kUnkId), "<unk>");
}

TEST(Vocabulary, TiesBreakByFirstOccurrence) {
  const std::vector<Sentence> corpus = {S({"b", "a", "b"}), S({"a", "b", "a"})};
  const auto v = build_vocabulary(corpus);
  EXPECT_LT(v.id_of("b"), v.id_of("a"));
}

TEST(Vocabulary, CapAndDeterminism) {
  const std::vector<Sentence> corpus = {S({"c", "b", "a", "a", "b", "a", "d"})};
  const auto v = build_vocabulary(corpus, 6);
  EXPECT_EQ(v.size(), 6u);
  EXPECT_EQ(v.id_of("a"), 4);
  EXPECT_EQ(v.id_of("b"), 5);
  EXPECT_EQ(v.id_of("c"), kUnkId);
  EXPECT_EQ(v, build_vocabulary(corpus, 6));
  EXPECT_EQ(v.hash(), build_vocabulary(corpus, 6).hash());
  EXPECT_NE(v.hash(), build_vocabulary(corpus, 7).hash());
  EXPECT_THROW(build_vocabulary(corpus, 4), UsageError);
}

TEST(Vocabulary, SpecialsInCorpusAreNotDuplicated) {
  const auto v = build_vocabulary(std::vector<Sentence>{S({"<unk>", "x", "<s>"})});
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.id_of("<unk>"), kUnkId);
}

TEST(Vocabulary, SaveLoadRoundTrip) {
  testing::TempDir dir;
  const auto v = build_vocabulary(std::vector<Sentence>{S({"x", "y", "x"})});
  v.save(dir / "vocab.txt");
  EXPECT_EQ(io::read_file(dir / "vocab.txt"), "<pad>\n<s>\n</s>\n<unk>\nx\ny\n");
  EXPECT_EQ(Vocabulary::load(dir / "vocab.txt"), v);

  io::write_lines(dir / "nospecials.txt", {"x", "y", "z", "w"});
  EXPECT_THROW(Vocabulary::load(dir / "nospecials.txt"), DataError);
  io::write_lines(dir / "dup.txt", {"<pad>", "<s>", "</s>", "<unk>", "x", "x"});
  EXPECT_THROW(Vocabulary::load(dir / "dup.txt"), DataError);
}

TEST(Encode, Examples) {
  const auto v = build_vocabulary(std::vector<Sentence>{S({"a", "a", "b"})}, 6);
  EXPECT_EQ(encode(S({"a"}), v), (std::vector<TokenId>{1, 4, 2}));
  EXPECT_EQ(encode(S({}), v), (std::vector<TokenId>{1, 2}));
  EXPECT_EQ(encode(S({"zzz"}), v), (std::vector<TokenId>{1, 3, 2}));
}

TEST(DecodeIds, Examples) {
  const auto v = build_vocabulary(std::vector<Sentence>{S({"a", "a", "b"})}, 6);
  EXPECT_EQ(decode_ids(std::vector<TokenId>{1, 4, 2}, v).tokens, (Tokens{"a"}));
  EXPECT_TRUE(decode_ids(std::vector<TokenId>{1, 2}, v).empty());
  EXPECT_EQ(decode_ids(std::vector<TokenId>{1, 3, 2}, v).tokens, (Tokens{"<unk>"}));
  EXPECT_EQ(decode_ids(std::vector<TokenId>{1, 4, 0, 0}, v).tokens, (Tokens{"a"}));
  try {
    decode_ids(std::vector<TokenId>{1, 4, 99}, v);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("position 2"), std::string::npos);
  }
  EXPECT_THROW(decode_ids(std::vector<TokenId>{-1}, v), DataError);
}

TEST(Encode, RoundTripOnFixture) {
  std::vector<Sentence> sents;
  for (const auto& line : io::read_lines(testing::data_path("appendix_sentences.txt"))) sents.push_back(from_line(line));
  const auto v = build_vocabulary(sents);
  for (const auto& s : sents) EXPECT_EQ(decode_ids(encode(s, v), v), s);
}

}  // namespace
}  // namespace embellish
