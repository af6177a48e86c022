#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "embellish/error.hpp"
#include "embellish/io.hpp"
#include "embellish/textpipe/sentence.hpp"
#include "embellish/textpipe/tokenizer.hpp"

namespace embellish {

enum class EntityCategory { person, location, organization, misc };

inline constexpr std::array<EntityCategory, 4> kEntityCategories = {
    EntityCategory::person, EntityCategory::location, EntityCategory::organization, EntityCategory::misc};

inline std::string_view category_name(EntityCategory c) {
  switch (c) {
    case EntityCategory::person: return "PERSON";
    case EntityCategory::location: return "LOCATION";
    case EntityCategory::organization: return "ORGANIZATION";
    case EntityCategory::misc: return "MISC";
  }
  return "MISC";
}

inline std::optional<EntityCategory> parse_category(std::string_view name) {
  for (auto c : kEntityCategories)
    if (category_name(c) == name) return c;
  return std::nullopt;
}

struct Placeholder {
  EntityCategory category;
  int index;  // >= 1

  std::string str() const { return std::string(category_name(category)) + "@" + std::to_string(index); }
};

/// Parses `CATEGORY@k` for one of the four known categories and k >= 1.
inline std::optional<Placeholder> parse_placeholder(std::string_view token) {
  if (!looks_like_placeholder(token)) return std::nullopt;
  const auto at = token.find('@');
  auto category = parse_category(token.substr(0, at));
  if (!category) return std::nullopt;
  const auto digits = token.substr(at + 1);
  if (digits.size() > 9 || digits.front() == '0') return std::nullopt;
  return Placeholder{*category, std::stoi(std::string(digits))};
}

struct EntityEntry {
  std::string placeholder;
  std::vector<std::string> surface;
  EntityCategory category;

  friend bool operator==(const EntityEntry&, const EntityEntry&) = default;
};

/// Placeholder numbering for one scope (a story, or one sentence pair).
///
/// Placeholders already present in the text are reserved: they are never
/// reassigned and deanonymization leaves them untouched.
class EntityMap {
 public:
  EntityMap() = default;
  explicit EntityMap(std::string scope_id) : scope_id_(std::move(scope_id)) {}

  const std::string& scope_id() const noexcept { return scope_id_; }
  const std::vector<EntityEntry>& entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }

  const EntityEntry* find_placeholder(std::string_view placeholder) const {
    auto it = by_placeholder_.find(std::string(placeholder));
    return it == by_placeholder_.end() ? nullptr : &entries_[it->second];
  }

  const EntityEntry* find_surface(const std::vector<std::string>& surface) const {
    auto it = by_surface_.find(join_tokens(surface, "\x1f"));
    return it == by_surface_.end() ? nullptr : &entries_[it->second];
  }

  bool is_reserved(std::string_view placeholder) const { return reserved_.count(std::string(placeholder)) > 0; }

  void reserve(const Placeholder& p) { reserved_.insert(p.str()); }

  /// Returns the placeholder for `surface`, allocating the next free index in
  /// `category` on first appearance.
  const EntityEntry& assign(const std::vector<std::string>& surface, EntityCategory category) {
    if (const auto* existing = find_surface(surface)) return *existing;
    int index = 1;
    std::string name;
    for (;; ++index) {
      name = Placeholder{category, index}.str();
      if (!by_placeholder_.count(name) && !reserved_.count(name)) break;
    }
    add(EntityEntry{name, surface, category});
    return entries_.back();
  }

  /// Inserts a fully specified entry (used when reading sidecar files).
  void add(EntityEntry entry) {
    if (!parse_placeholder(entry.placeholder))
      throw DataError("malformed placeholder '" + entry.placeholder + "'");
    if (by_placeholder_.count(entry.placeholder))
      throw DataError("duplicate placeholder '" + entry.placeholder + "' in scope '" + scope_id_ + "'");
    by_placeholder_.emplace(entry.placeholder, entries_.size());
    by_surface_.emplace(join_tokens(entry.surface, "\x1f"), entries_.size());
    entries_.push_back(std::move(entry));
  }

 private:
  std::string scope_id_;
  std::vector<EntityEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_placeholder_;
  std::unordered_map<std::string, std::size_t> by_surface_;
  std::set<std::string> reserved_;
};

/// Half-open token span [begin, end) tagged with a category.
struct EntitySpan {
  std::size_t begin;
  std::size_t end;
  EntityCategory category;
};

using EntityRecognizer = std::function<std::vector<EntitySpan>(const Sentence&)>;

struct AnonymizeResult {
  Sentence sentence;
  EntityMap map;
};

/// Replaces every recognized span with its `CATEGORY@k` placeholder.
/// The returned map extends `scope`; overlapping spans are rejected.
inline AnonymizeResult anonymize(const Sentence& s, const EntityRecognizer& recognizer, EntityMap scope) {
  auto spans = recognizer(s);
  std::sort(spans.begin(), spans.end(), [](const auto& a, const auto& b) { return a.begin < b.begin; });
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& sp = spans[i];
    if (sp.begin >= sp.end || sp.end > s.size())
      throw DataError("entity span [" + std::to_string(sp.begin) + ", " + std::to_string(sp.end) +
                      ") is outside the sentence of length " + std::to_string(s.size()));
    if (i > 0 && spans[i - 1].end > sp.begin)
      throw DataError("overlapping entity spans [" + std::to_string(spans[i - 1].begin) + ", " +
                      std::to_string(spans[i - 1].end) + ") and [" + std::to_string(sp.begin) + ", " +
                      std::to_string(sp.end) + ")");
  }
  for (const auto& tok : s.tokens)
    if (auto p = parse_placeholder(tok)) scope.reserve(*p);

  AnonymizeResult result{Sentence{}, std::move(scope)};
  result.sentence.raw = s.raw;
  std::size_t pos = 0;
  for (const auto& sp : spans) {
    result.sentence.tokens.insert(result.sentence.tokens.end(), s.tokens.begin() + pos, s.tokens.begin() + sp.begin);
    std::vector<std::string> surface(s.tokens.begin() + sp.begin, s.tokens.begin() + sp.end);
    result.sentence.tokens.push_back(result.map.assign(surface, sp.category).placeholder);
    pos = sp.end;
  }
  result.sentence.tokens.insert(result.sentence.tokens.end(), s.tokens.begin() + pos, s.tokens.end());
  return result;
}

struct DeanonymizeWarning {
  std::size_t position;
  std::string placeholder;
};

struct DeanonymizeResult {
  Sentence sentence;
  std::vector<DeanonymizeWarning> warnings;
};

/// Substitutes surface forms back. Placeholders missing from the map stay in
/// place and produce a warning unless they were reserved in that scope.
inline DeanonymizeResult deanonymize(const Sentence& s, const EntityMap& map) {
  DeanonymizeResult result;
  result.sentence.raw = s.raw;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& tok = s.tokens[i];
    if (!parse_placeholder(tok)) {
      result.sentence.tokens.push_back(tok);
      continue;
    }
    if (const auto* entry = map.find_placeholder(tok)) {
      result.sentence.tokens.insert(result.sentence.tokens.end(), entry->surface.begin(), entry->surface.end());
    } else {
      result.sentence.tokens.push_back(tok);
      if (!map.is_reserved(tok)) result.warnings.push_back({i, tok});
    }
  }
  return result;
}

/// Default recognizer: a gazetteer of known surface forms plus a
/// capitalized-token heuristic. Sentence-initial tokens (and tokens right
/// after an opening quote or terminal punctuation) only count when listed in
/// the gazetteer. Adjacent entity tokens merge into one span.
class GazetteerRecognizer {
 public:
  GazetteerRecognizer() : stopwords_(default_stopwords()) {}

  void add(std::string surface, EntityCategory category) { gazetteer_[std::move(surface)] = category; }
  void set_default_category(EntityCategory c) { default_category_ = c; }

  /// Reads `surface<TAB>CATEGORY` lines; `#` starts a comment line.
  static GazetteerRecognizer from_file(const std::filesystem::path& path) {
    GazetteerRecognizer r;
    const auto lines = io::read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto& line = lines[i];
      if (line.empty() || line.front() == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw DataError(path.string() + ":" + std::to_string(i + 1) + ": expected surface<TAB>CATEGORY");
      auto category = parse_category(line.substr(tab + 1));
      if (!category)
        throw DataError(path.string() + ":" + std::to_string(i + 1) + ": unknown category '" +
                        line.substr(tab + 1) + "'");
      r.add(line.substr(0, tab), *category);
    }
    return r;
  }

  std::vector<EntitySpan> operator()(const Sentence& s) const {
    std::vector<EntitySpan> spans;
    bool initial = true;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto& tok = s.tokens[i];
      const auto hit = classify(tok, initial);
      initial = tok == "." || tok == "!" || tok == "?" || tok == ":" || tok == "''" || tok == "``" || tok == "\"";
      if (!hit) continue;
      if (!spans.empty() && spans.back().end == i) {
        spans.back().end = i + 1;
      } else {
        spans.push_back({i, i + 1, *hit});
      }
    }
    return spans;
  }

 private:
  std::optional<EntityCategory> classify(const std::string& tok, bool sentence_initial) const {
    if (auto it = gazetteer_.find(tok); it != gazetteer_.end()) return it->second;
    if (sentence_initial || looks_like_placeholder(tok) || tok.empty()) return std::nullopt;
    const auto first = static_cast<unsigned char>(tok.front());
    if (first < 'A' || first > 'Z') return std::nullopt;
    if (stopwords_.count(tok)) return std::nullopt;
    return default_category_;
  }

  static std::unordered_set<std::string> default_stopwords() {
    return {"I", "I'm", "Mr", "Mrs", "Ms", "Dr", "He", "She", "It", "They", "We", "You", "The", "A", "An",
            "His", "Her", "Their", "Our", "My", "Your", "This", "That", "These", "Those", "What", "Who",
            "When", "Where", "Why", "How", "Can", "Get", "And", "But", "So", "Then", "There", "If",
            "Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday", "God", "OK"};
  }

  std::unordered_map<std::string, EntityCategory> gazetteer_;
  std::unordered_set<std::string> stopwords_;
  EntityCategory default_category_ = EntityCategory::person;
};

// Sidecar format: scope_id<TAB>placeholder<TAB>surface form, one entry per line.

inline std::vector<std::string> format_entity_sidecar(const EntityMap& map) {
  std::vector<std::string> lines;
  for (const auto& e : map.entries())
    lines.push_back(map.scope_id() + "\t" + e.placeholder + "\t" + join_tokens(e.surface));
  return lines;
}

/// Reads a sidecar into one map per scope, keyed by scope id.
inline std::map<std::string, EntityMap> read_entity_sidecar(const std::filesystem::path& path) {
  std::map<std::string, EntityMap> maps;
  const auto lines = io::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(i + 1) + ": expected scope<TAB>placeholder<TAB>surface");
    const auto scope = line.substr(0, t1);
    const auto placeholder = line.substr(t1 + 1, t2 - t1 - 1);
    const auto parsed = parse_placeholder(placeholder);
    if (!parsed)
      throw DataError(path.string() + ":" + std::to_string(i + 1) + ": malformed placeholder '" + placeholder + "'");
    auto [it, inserted] = maps.try_emplace(scope, scope);
    it->second.add(EntityEntry{placeholder, split_whitespace(line.substr(t2 + 1)), parsed->category});
  }
  return maps;
}

}  // namespace embellish
