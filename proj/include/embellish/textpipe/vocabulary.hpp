#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "embellish/error.hpp"
#include "embellish/io.hpp"
#include "embellish/textpipe/sentence.hpp"

namespace embellish {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kBosId = 1;
inline constexpr TokenId kEosId = 2;
inline constexpr TokenId kUnkId = 3;
inline constexpr std::size_t kNumSpecials = 4;
inline constexpr std::size_t kDefaultVocabularySize = 50000;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kBosToken = "<s>";
inline constexpr std::string_view kEosToken = "</s>";
inline constexpr std::string_view kUnkToken = "<unk>";

inline bool is_special_token(std::string_view t) {
  return t == kPadToken || t == kBosToken || t == kEosToken || t == kUnkToken;
}

/// Bijective token <-> id table with the four specials at ids 0..3.
class Vocabulary {
 public:
  Vocabulary() {
    for (auto t : {kPadToken, kBosToken, kEosToken, kUnkToken}) push(std::string(t));
  }

  std::size_t size() const noexcept { return tokens_.size(); }

  TokenId id_of(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnkId : it->second;
  }

  bool contains(const std::string& token) const { return ids_.count(token) > 0; }

  const std::string& token_of(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
      throw DataError("token id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(size()));
    return tokens_[static_cast<std::size_t>(id)];
  }

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  /// Appends a token; returns its id. Existing tokens keep their id.
  TokenId add(const std::string& token) {
    if (auto it = ids_.find(token); it != ids_.end()) return it->second;
    if (token.empty() || std::any_of(token.begin(), token.end(), is_whitespace))
      throw DataError("vocabulary token must be non-empty without whitespace");
    return push(token);
  }

  /// FNV-1a over the serialized file contents; identifies a vocabulary in checkpoints.
  std::uint64_t hash() const { return io::fnv1a(serialize()); }

  std::string serialize() const {
    std::string out;
    for (const auto& t : tokens_) {
      out += t;
      out += '\n';
    }
    return out;
  }

  /// One token per line; line number (from 0) is the id.
  void save(const std::filesystem::path& path) const { io::write_file_atomic(path, serialize()); }

  static Vocabulary load(const std::filesystem::path& path) {
    const auto lines = io::read_lines(path);
    if (lines.size() < kNumSpecials)
      throw DataError(path.string() + ": vocabulary needs at least the 4 special tokens");
    const std::string_view expected[] = {kPadToken, kBosToken, kEosToken, kUnkToken};
    for (std::size_t i = 0; i < kNumSpecials; ++i)
      if (lines[i] != expected[i])
        throw DataError(path.string() + ":" + std::to_string(i + 1) + ": expected special token '" +
                        std::string(expected[i]) + "'");
    Vocabulary v;
    for (std::size_t i = kNumSpecials; i < lines.size(); ++i) {
      if (v.contains(lines[i]))
        throw DataError(path.string() + ":" + std::to_string(i + 1) + ": duplicate token '" + lines[i] + "'");
      try {
        v.add(lines[i]);
      } catch (const DataError& e) {
        throw DataError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
      }
    }
    return v;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  TokenId push(std::string token) {
    const auto id = static_cast<TokenId>(tokens_.size());
    ids_.emplace(token, id);
    tokens_.push_back(std::move(token));
    return id;
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// Frequency-ranked vocabulary capped at `max_size` entries (specials
/// included). Ties are broken by first occurrence in the corpus.
inline Vocabulary build_vocabulary(std::span<const Sentence> corpus, std::size_t max_size = kDefaultVocabularySize) {
  if (max_size < 5) throw UsageError("vocabulary max_size must be at least 5");
  struct Stat {
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::unordered_map<std::string, Stat> stats;
  std::vector<std::string> order;
  for (const auto& s : corpus) {
    for (const auto& t : s.tokens) {
      if (is_special_token(t)) continue;
      auto [it, inserted] = stats.try_emplace(t);
      if (inserted) {
        it->second.first = order.size();
        order.push_back(t);
      }
      ++it->second.count;
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
    return stats[a].count > stats[b].count;
  });
  Vocabulary v;
  for (const auto& t : order) {
    if (v.size() >= max_size) break;
    v.add(t);
  }
  return v;
}

/// BOS, token ids (UNK when out of vocabulary), EOS.
inline std::vector<TokenId> encode(const Sentence& s, const Vocabulary& v) {
  std::vector<TokenId> ids;
  ids.reserve(s.size() + 2);
  ids.push_back(kBosId);
  for (const auto& t : s.tokens) ids.push_back(v.id_of(t));
  ids.push_back(kEosId);
  return ids;
}

/// Inverse of encode: BOS, EOS and PAD are dropped, UNK renders as `<unk>`.
inline Sentence decode_ids(std::span<const TokenId> ids, const Vocabulary& v) {
  Sentence s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= v.size())
      throw DataError("id " + std::to_string(id) + " at position " + std::to_string(i) +
                      " is outside vocabulary of size " + std::to_string(v.size()));
    if (id == kBosId || id == kEosId || id == kPadId) continue;
    s.tokens.push_back(v.token_of(id));
  }
  return s;
}

}  // namespace embellish
