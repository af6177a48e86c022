#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "embellish/error.hpp"
#include "embellish/io.hpp"
#include "embellish/textpipe/sentence.hpp"
#include "embellish/textpipe/tokenizer.hpp"

namespace embellish {

// Story corpus hierarchy: system -> story -> paragraph -> sentence.
//
// On-disk marker format, one item per line:
//   #SYSTEM<TAB>name
//   ##STORY<TAB>title
//   ###PARAGRAPH
//   <one sentence per line>
// Blank lines are ignored.

struct CctParagraph {
  std::vector<Sentence> sentences;
};

struct CctStory {
  std::string title;
  std::vector<CctParagraph> paragraphs;
};

struct CctSystem {
  std::string name;
  std::vector<CctStory> stories;
};

struct CctCounts {
  std::size_t systems = 0;
  std::size_t stories = 0;
  std::size_t paragraphs = 0;
  std::size_t sentences = 0;

  friend bool operator==(const CctCounts&, const CctCounts&) = default;
};

/// Counts of the published corpus.
inline constexpr CctCounts kPublishedCctCounts{8, 14, 45, 290};

struct CctCorpus {
  std::vector<CctSystem> systems;

  CctCounts counts() const {
    CctCounts c;
    c.systems = systems.size();
    for (const auto& sys : systems) {
      c.stories += sys.stories.size();
      for (const auto& story : sys.stories) {
        c.paragraphs += story.paragraphs.size();
        for (const auto& p : story.paragraphs) c.sentences += p.sentences.size();
      }
    }
    return c;
  }

  bool empty() const noexcept { return systems.empty(); }
};

enum class Granularity { system, story, paragraph, sentence };

inline std::optional<Granularity> parse_granularity(std::string_view s) {
  if (s == "system") return Granularity::system;
  if (s == "story") return Granularity::story;
  if (s == "paragraph") return Granularity::paragraph;
  if (s == "sentence") return Granularity::sentence;
  return std::nullopt;
}

inline CctCorpus parse_cct(const std::vector<std::string>& lines, const std::string& origin = "<cct>") {
  CctCorpus c;
  auto fail = [&](std::size_t line, const std::string& msg) -> DataError {
    return DataError(origin + ":" + std::to_string(line + 1) + ": " + msg);
  };
  auto field = [](const std::string& line) {
    const auto start = line.find_first_of("\t ");
    return start == std::string::npos ? std::string() : join_tokens(split_whitespace(line.substr(start + 1)));
  };
  auto marker_is = [](const std::string& line, std::string_view m) {
    return line.starts_with(m) && (line.size() == m.size() || line[m.size()] == '\t' || line[m.size()] == ' ');
  };
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (split_whitespace(line).empty()) continue;
    if (line.front() == '#') {
      if (marker_is(line, "#SYSTEM")) {
        c.systems.push_back(CctSystem{field(line), {}});
      } else if (marker_is(line, "##STORY")) {
        if (c.systems.empty()) throw fail(i, "##STORY outside of a #SYSTEM");
        c.systems.back().stories.push_back(CctStory{field(line), {}});
      } else if (marker_is(line, "###PARAGRAPH")) {
        if (c.systems.empty() || c.systems.back().stories.empty()) throw fail(i, "###PARAGRAPH outside of a ##STORY");
        c.systems.back().stories.back().paragraphs.emplace_back();
      } else {
        throw fail(i, "unknown marker '" + line.substr(0, line.find_first_of("\t ")) + "'");
      }
      continue;
    }
    if (c.systems.empty() || c.systems.back().stories.empty() || c.systems.back().stories.back().paragraphs.empty())
      throw fail(i, "sentence outside of a ###PARAGRAPH");
    c.systems.back().stories.back().paragraphs.back().sentences.push_back(tokenize(line));
  }
  return c;
}

inline CctCorpus load_cct(const std::filesystem::path& path) { return parse_cct(io::read_lines(path), path.string()); }

inline std::vector<std::string> format_cct(const CctCorpus& c) {
  std::vector<std::string> lines;
  for (const auto& sys : c.systems) {
    lines.push_back("#SYSTEM\t" + sys.name);
    for (const auto& story : sys.stories) {
      lines.push_back("##STORY\t" + story.title);
      for (const auto& p : story.paragraphs) {
        lines.push_back("###PARAGRAPH");
        for (const auto& s : p.sentences) lines.push_back(to_line(s));
      }
    }
  }
  return lines;
}

/// Flattens the corpus into units at `g`, each unit being the token
/// concatenation of its sentences. Document order is preserved.
inline std::vector<Sentence> split_cct(const CctCorpus& c, Granularity g) {
  std::vector<Sentence> units;
  for (const auto& sys : c.systems) {
    Sentence sys_unit;
    for (const auto& story : sys.stories) {
      Sentence story_unit;
      for (const auto& p : story.paragraphs) {
        Sentence para_unit;
        for (const auto& s : p.sentences) {
          if (g == Granularity::sentence) units.push_back(s);
          para_unit = concat(para_unit, s);
        }
        if (g == Granularity::paragraph) units.push_back(para_unit);
        story_unit = concat(story_unit, para_unit);
      }
      if (g == Granularity::story) units.push_back(story_unit);
      sys_unit = concat(sys_unit, story_unit);
    }
    if (g == Granularity::system) units.push_back(sys_unit);
  }
  return units;
}

/// Stride-2 pairing over the globally flattened sentence list. Pairs may
/// cross paragraph and story boundaries.
inline std::vector<Sentence> make_pair_units(const CctCorpus& c) {
  return pair_sentences(split_cct(c, Granularity::sentence));
}

/// Reads `key=value` manifest lines (systems, stories, paragraphs, sentences).
inline CctCounts load_manifest(const std::filesystem::path& path) {
  CctCounts counts;
  std::map<std::string, std::size_t*> fields = {{"systems", &counts.systems},
                                                  {"stories", &counts.stories},
                                                  {"paragraphs", &counts.paragraphs},
                                                  {"sentences", &counts.sentences}};
  std::map<std::string, bool> seen;
  const auto lines = io::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto parts = split_whitespace(lines[i]);
    if (parts.empty() || parts.front().front() == '#') continue;
    const auto& line = lines[i];
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError(path.string() + ":" + std::to_string(i + 1) + ": expected key=value");
    auto key = split_whitespace(line.substr(0, eq));
    auto value = split_whitespace(line.substr(eq + 1));
    if (key.size() != 1 || value.size() != 1 || !fields.count(key[0]))
      throw DataError(path.string() + ":" + std::to_string(i + 1) + ": unknown manifest entry '" + line + "'");
    try {
      *fields[key[0]] = std::stoul(value[0]);
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(i + 1) + ": count is not a number");
    }
    seen[key[0]] = true;
  }
  if (seen.size() != fields.size()) throw DataError(path.string() + ": manifest must list systems, stories, paragraphs and sentences");
  return counts;
}

inline std::string describe(const CctCounts& c) {
  return "systems=" + std::to_string(c.systems) + " stories=" + std::to_string(c.stories) +
         " paragraphs=" + std::to_string(c.paragraphs) + " sentences=" + std::to_string(c.sentences);
}

/// Naive splitter for running prose: breaks after `. ! ?` (and a following
/// closing quote).
inline std::vector<Sentence> split_into_sentences(std::string_view text) {
  const auto all = tokenize(text);
  std::vector<Sentence> out;
  Sentence current;
  for (std::size_t i = 0; i < all.size(); ++i) {
    current.tokens.push_back(all.tokens[i]);
    const auto& t = all.tokens[i];
    if (t == "." || t == "!" || t == "?") {
      if (i + 1 < all.size() && (all.tokens[i + 1] == "''" || all.tokens[i + 1] == "\"")) {
        current.tokens.push_back(all.tokens[++i]);
      }
      out.push_back(std::move(current));
      current = Sentence{};
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

/// Converts a directory tree `<root>/<system>/<story>.txt` (paragraphs
/// separated by blank lines) into the marker representation. Systems and
/// stories are ordered by path name.
inline CctCorpus convert_cct_directory(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError("'" + root.string() + "' is not a directory");
  std::vector<fs::path> system_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && e.path().filename().string().front() != '.') system_dirs.push_back(e.path());
  std::sort(system_dirs.begin(), system_dirs.end());
  CctCorpus c;
  for (const auto& dir : system_dirs) {
    CctSystem sys{dir.filename().string(), {}};
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      CctStory story{f.stem().string(), {}};
      std::string para_text;
      auto flush = [&] {
        if (split_whitespace(para_text).empty()) return;
        story.paragraphs.push_back(CctParagraph{split_into_sentences(para_text)});
        para_text.clear();
      };
      for (const auto& line : io::read_lines(f)) {
        if (split_whitespace(line).empty()) {
          flush();
        } else {
          para_text += line;
          para_text += ' ';
        }
      }
      flush();
      sys.stories.push_back(std::move(story));
    }
    c.systems.push_back(std::move(sys));
  }
  return c;
}

}  // namespace embellish
