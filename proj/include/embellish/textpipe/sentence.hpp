#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "embellish/error.hpp"

namespace embellish {

/// A tokenized sentence. `raw` keeps the untokenized source text when known.
struct Sentence {
  std::vector<std::string> tokens;
  std::string raw;

  Sentence() = default;
  explicit Sentence(std::vector<std::string> toks, std::string raw_text = {})
      : tokens(std::move(toks)), raw(std::move(raw_text)) {}

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }

  /// Token equality; `raw` is provenance only.
  friend bool operator==(const Sentence& a, const Sentence& b) { return a.tokens == b.tokens; }
};

inline bool is_whitespace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

/// Splits on runs of ASCII whitespace. Used for already-tokenized lines.
inline std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_whitespace(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_whitespace(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

inline std::string join_tokens(const std::vector<std::string>& tokens, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

inline std::string to_line(const Sentence& s) { return join_tokens(s.tokens); }

/// Interprets a tokenized corpus line (tokens separated by spaces).
inline Sentence from_line(std::string_view line) {
  return Sentence(split_whitespace(line), std::string(line));
}

/// Throws DataError when a token is empty or contains whitespace.
inline void validate(const Sentence& s) {
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    const auto& t = s.tokens[i];
    if (t.empty()) throw DataError("empty token at position " + std::to_string(i));
    if (std::any_of(t.begin(), t.end(), is_whitespace))
      throw DataError("token at position " + std::to_string(i) + " contains whitespace");
  }
}

/// Token concatenation; raw texts are joined with a space.
inline Sentence concat(const Sentence& a, const Sentence& b) {
  Sentence out;
  out.tokens.reserve(a.size() + b.size());
  out.tokens.insert(out.tokens.end(), a.tokens.begin(), a.tokens.end());
  out.tokens.insert(out.tokens.end(), b.tokens.begin(), b.tokens.end());
  if (!a.raw.empty() || !b.raw.empty()) {
    out.raw = a.raw;
    if (!a.raw.empty() && !b.raw.empty()) out.raw += ' ';
    out.raw += b.raw;
  }
  return out;
}

/// Stride-2, non-overlapping pairing: out[i] = sents[2i] + sents[2i+1].
/// An odd trailing sentence is passed through unpaired.
inline std::vector<Sentence> pair_sentences(const std::vector<Sentence>& sents) {
  std::vector<Sentence> out;
  out.reserve((sents.size() + 1) / 2);
  for (std::size_t i = 0; i < sents.size(); i += 2) {
    if (i + 1 < sents.size())
      out.push_back(concat(sents[i], sents[i + 1]));
    else
      out.push_back(sents[i]);
  }
  return out;
}

}  // namespace embellish
