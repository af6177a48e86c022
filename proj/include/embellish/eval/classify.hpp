#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "embellish/textpipe/entities.hpp"
#include "embellish/textpipe/sentence.hpp"
#include "embellish/textpipe/tokenizer.hpp"
#include "embellish/textpipe/vocabulary.hpp"

namespace embellish::eval {

enum class OutputClass { reproduction, lexical_substitution, missing_words, unrelated };
enum class PairClass { combined, first_kept, unrelated, other };

inline constexpr OutputClass kOutputClasses[] = {OutputClass::reproduction, OutputClass::lexical_substitution,
                                                 OutputClass::missing_words, OutputClass::unrelated};
inline constexpr PairClass kPairClasses[] = {PairClass::combined, PairClass::first_kept, PairClass::unrelated,
                                             PairClass::other};

inline std::string_view to_string(OutputClass c) {
  switch (c) {
    case OutputClass::reproduction: return "reproduction";
    case OutputClass::lexical_substitution: return "lexical_substitution";
    case OutputClass::missing_words: return "missing_words";
    case OutputClass::unrelated: return "unrelated";
  }
  return "unrelated";
}

inline std::string_view to_string(PairClass c) {
  switch (c) {
    case PairClass::combined: return "combined";
    case PairClass::first_kept: return "first_kept";
    case PairClass::unrelated: return "unrelated";
    case PairClass::other: return "other";
  }
  return "other";
}

/// Overlap thresholds of the taxonomy, as fractions.
struct ClassifierConfig {
  double related_overlap = 0.30;     // minimum overlap for lexical_substitution / combined
  double first_kept_overlap = 0.60;  // minimum overlap with the first member for first_kept
};

inline bool is_punctuation_token(std::string_view t) {
  return t == "." || t == "," || t == ":" || t == ";" || t == "!" || t == "?" || t == "(" || t == ")" ||
         t == "''" || t == "``" || t == "\"" || t == "'" || t == "-" || t == "--";
}

inline bool is_terminal_token(std::string_view t) { return t == "." || t == "!" || t == "?"; }

/// Formatting normalization: ASCII case folding and a single quote symbol.
inline std::string normalize_token(std::string_view t) {
  if (t == "``" || t == "''" || t == "\"") return "\"";
  return embellish::detail::ascii_lower(t);
}

/// Tokens that carry content: not placeholders, punctuation or `<unk>`.
inline std::vector<std::string> content_tokens(const Sentence& s) {
  std::vector<std::string> out;
  for (const auto& t : s.tokens)
    if (!is_punctuation_token(t) && !looks_like_placeholder(t) && t != kUnkToken) out.push_back(normalize_token(t));
  return out;
}

/// Fraction of `reference`'s content tokens (as a multiset) found in `other`.
/// A reference without content tokens overlaps fully with a content-free
/// `other` and not at all otherwise.
inline double content_overlap(const Sentence& reference, const Sentence& other) {
  const auto ref = content_tokens(reference);
  const auto oth = content_tokens(other);
  if (ref.empty()) return oth.empty() ? 1.0 : 0.0;
  std::unordered_map<std::string, int> pool;
  for (const auto& t : oth) ++pool[t];
  std::size_t hits = 0;
  for (const auto& t : ref)
    if (auto it = pool.find(t); it != pool.end() && it->second > 0) {
      --it->second;
      ++hits;
    }
  return static_cast<double>(hits) / static_cast<double>(ref.size());
}

namespace detail {

/// Normalized view used for equality: UNK dropped (including input tokens the
/// vocabulary would map to UNK), case folded, quotes unified.
inline std::vector<std::string> normalized_tokens(const Sentence& s, const Vocabulary* vocab) {
  std::vector<std::string> out;
  for (const auto& t : s.tokens) {
    if (t == kUnkToken) continue;
    if (vocab && !vocab->contains(t)) continue;
    out.push_back(normalize_token(t));
  }
  return out;
}

inline bool is_subsequence(const std::vector<std::string>& small, const std::vector<std::string>& big) {
  std::size_t i = 0;
  for (std::size_t j = 0; j < big.size() && i < small.size(); ++j)
    if (small[i] == big[j]) ++i;
  return i == small.size();
}

}  // namespace detail

/// Sentence-level taxonomy, decided in order:
///  1. equal after normalization (UNK and OOV ignored)      -> reproduction
///  2. output is a non-empty proper subsequence of the input -> missing_words
///  3. content overlap with the input >= related_overlap    -> lexical_substitution
///  4. otherwise                                            -> unrelated
/// Once 1 and 2 fail, the minimal alignment necessarily contains a
/// substitution or insertion, so step 3 only has to test the overlap.
inline OutputClass classify_output(const Sentence& input, const Sentence& output, const Vocabulary* vocab = nullptr,
                                   const ClassifierConfig& cfg = {}) {
  const auto in = detail::normalized_tokens(input, vocab);
  const auto out = detail::normalized_tokens(output, vocab);
  if (in == out) return OutputClass::reproduction;
  if (!out.empty() && out.size() < in.size() && detail::is_subsequence(out, in)) return OutputClass::missing_words;
  if (content_overlap(input, output) >= cfg.related_overlap) return OutputClass::lexical_substitution;
  return OutputClass::unrelated;
}

/// True when the sentence holds no sentence-terminal punctuation except, at
/// most, at its end (optionally followed by a closing quote). Terminals
/// inside an open quotation are ignored.
inline bool is_single_sentence(const Sentence& s) {
  bool in_quote = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& t = s.tokens[i];
    if (t == "``") in_quote = true;
    else if (t == "''" || t == "\"") in_quote = !in_quote;
    if (!is_terminal_token(t) || in_quote) continue;
    const bool last = i + 1 == s.size();
    const bool before_closing_quote = i + 2 == s.size() && (s.tokens[i + 1] == "''" || s.tokens[i + 1] == "\"");
    if (!last && !before_closing_quote) return false;
  }
  return true;
}

/// Pair-level taxonomy, decided in order:
///  1. single sentence overlapping >= related_overlap with each member -> combined
///  2. overlap >= first_kept_overlap with the first, < related with the second -> first_kept
///  3. overlap < related_overlap with both                               -> unrelated
///  4. otherwise                                                          -> other
inline PairClass classify_pair_output(const Sentence& first, const Sentence& second, const Sentence& output,
                                      const ClassifierConfig& cfg = {}) {
  const double o1 = content_overlap(first, output);
  const double o2 = content_overlap(second, output);
  if (is_single_sentence(output) && o1 >= cfg.related_overlap && o2 >= cfg.related_overlap) return PairClass::combined;
  if (o1 >= cfg.first_kept_overlap && o2 < cfg.related_overlap) return PairClass::first_kept;
  if (o1 < cfg.related_overlap && o2 < cfg.related_overlap) return PairClass::unrelated;
  return PairClass::other;
}

/// Recovers the two members of a concatenated pair line: the split falls
/// after the first terminal punctuation token (and a closing quote right
/// after it) that is not at the end. Without such a point the second member
/// is empty.
inline std::pair<Sentence, Sentence> split_pair(const Sentence& pair) {
  for (std::size_t i = 0; i + 1 < pair.size(); ++i) {
    if (!is_terminal_token(pair.tokens[i])) continue;
    std::size_t cut = i + 1;
    if (pair.tokens[cut] == "''" || pair.tokens[cut] == "\"") ++cut;
    if (cut >= pair.size()) break;
    return {Sentence(std::vector<std::string>(pair.tokens.begin(), pair.tokens.begin() + static_cast<std::ptrdiff_t>(cut))),
            Sentence(std::vector<std::string>(pair.tokens.begin() + static_cast<std::ptrdiff_t>(cut), pair.tokens.end()))};
  }
  return {pair, Sentence{}};
}

}  // namespace embellish::eval
