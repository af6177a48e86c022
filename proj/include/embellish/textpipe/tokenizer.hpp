#pragma once

#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "embellish/textpipe/sentence.hpp"

namespace embellish {

namespace detail {

inline bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline constexpr std::array<std::string_view, 6> kApostropheClitics = {"'s", "'re", "'ve", "'ll", "'d", "'m"};

inline void push_word(std::vector<std::string>& out, std::string word) {
  if (word.empty()) return;
  const std::string lower = ascii_lower(word);
  if (lower.size() > 3 && lower.ends_with("n't")) {
    out.push_back(word.substr(0, word.size() - 3));
    out.push_back(word.substr(word.size() - 3));
    return;
  }
  for (auto clitic : kApostropheClitics) {
    if (lower.size() > clitic.size() && lower.ends_with(clitic)) {
      out.push_back(word.substr(0, word.size() - clitic.size()));
      out.push_back(word.substr(word.size() - clitic.size()));
      return;
    }
  }
  out.push_back(std::move(word));
}

inline bool is_split_punct(char c) {
  switch (c) {
    case '.': case ',': case ':': case ';': case '!': case '?': case '(': case ')': case '"':
      return true;
    default:
      return false;
  }
}

}  // namespace detail

/// True for tokens shaped like an anonymization placeholder, e.g. `PERSON@1`.
inline bool looks_like_placeholder(std::string_view token) {
  const auto at = token.find('@');
  if (at == std::string_view::npos || at == 0 || at + 1 >= token.size()) return false;
  for (std::size_t i = 0; i < at; ++i)
    if (token[i] < 'A' || token[i] > 'Z') return false;
  for (std::size_t i = at + 1; i < token.size(); ++i)
    if (!detail::is_ascii_digit(token[i])) return false;
  return true;
}

inline bool is_clitic(std::string_view token) {
  const std::string lower = detail::ascii_lower(token);
  if (lower == "n't") return true;
  for (auto clitic : detail::kApostropheClitics)
    if (lower == clitic) return true;
  return false;
}

/// Rule-based English tokenizer.
///
/// Punctuation `. , : ; ! ? ( ) " '' ``` is split off, except `.` and `,`
/// between two digits. Clitics `'s 're 've 'll 'd 'm n't` are split from their
/// host word. Placeholder tokens are kept whole. Already-tokenized text is a
/// fixed point.
inline Sentence tokenize(std::string_view raw) {
  Sentence out;
  out.raw = std::string(raw);
  for (const auto& chunk : split_whitespace(raw)) {
    if (looks_like_placeholder(chunk)) {
      out.tokens.push_back(chunk);
      continue;
    }
    std::string word;
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const char c = chunk[i];
      const char next = i + 1 < chunk.size() ? chunk[i + 1] : '\0';
      if ((c == '\'' && next == '\'') || (c == '`' && next == '`')) {
        detail::push_word(out.tokens, std::move(word));
        word.clear();
        out.tokens.emplace_back(2, c);
        ++i;
        continue;
      }
      if (detail::is_split_punct(c)) {
        const bool numeric = (c == '.' || c == ',') && i > 0 && detail::is_ascii_digit(chunk[i - 1]) &&
                             detail::is_ascii_digit(next);
        if (!numeric) {
          detail::push_word(out.tokens, std::move(word));
          word.clear();
          out.tokens.emplace_back(1, c);
          continue;
        }
      }
      word += c;
    }
    detail::push_word(out.tokens, std::move(word));
  }
  return out;
}

/// Joins tokens, reattaching punctuation, clitics and quotes.
///
/// ``` opens and `''` closes; the symmetric `"` alternates within a sentence.
inline std::string detokenize(const Sentence& s) {
  std::string out;
  bool attach_next = false;
  bool quote_open = false;
  for (const auto& tok : s.tokens) {
    bool attach_prev = false;
    bool opens = false;
    if (tok == "." || tok == "," || tok == ":" || tok == ";" || tok == "!" || tok == "?" || tok == ")" ||
        tok == "''" || is_clitic(tok)) {
      attach_prev = true;
    } else if (tok == "(" || tok == "``") {
      opens = true;
    } else if (tok == "\"") {
      if (quote_open)
        attach_prev = true;
      else
        opens = true;
      quote_open = !quote_open;
    }
    if (!out.empty() && !attach_prev && !attach_next) out += ' ';
    out += tok;
    attach_next = opens;
  }
  return out;
}

}  // namespace embellish
