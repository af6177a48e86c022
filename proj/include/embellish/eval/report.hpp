#pragma once

#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "embellish/error.hpp"
#include "embellish/eval/bleu.hpp"
#include "embellish/eval/classify.hpp"
#include "embellish/textpipe/sentence.hpp"
#include "embellish/textpipe/vocabulary.hpp"

namespace embellish::eval {

enum class ReportMode { sentence, pair };

inline std::optional<ReportMode> parse_report_mode(std::string_view s) {
  if (s == "sentence") return ReportMode::sentence;
  if (s == "pair") return ReportMode::pair;
  return std::nullopt;
}

inline std::string_view to_string(ReportMode m) { return m == ReportMode::sentence ? "sentence" : "pair"; }

struct ClassCount {
  std::string name;
  std::size_t count = 0;
  double percent = 0.0;
};

struct Exemplar {
  std::size_t index = 0;
  std::string input;
  std::string output;
  std::string label;
};

struct EmbellishmentReport {
  ReportMode mode = ReportMode::sentence;
  std::size_t total = 0;
  std::vector<ClassCount> classes;  // taxonomy order
  BleuScore bleu;                   // outputs scored against inputs
  std::vector<Exemplar> exemplars;
  std::vector<std::string> labels;  // one per item

  const ClassCount& operator[](std::string_view name) const {
    for (const auto& c : classes)
      if (c.name == name) return c;
    throw UsageError("report has no class '" + std::string(name) + "'");
  }
};

struct ReportOptions {
  ClassifierConfig classifier;
  const Vocabulary* vocabulary = nullptr;  // enables OOV-aware reproduction checks
  std::size_t exemplars_per_class = 3;
};

/// Classifies every output against its input and aggregates the taxonomy.
/// In pair mode each input line is the concatenation of the two members and
/// is split back with `split_pair`.
inline EmbellishmentReport make_report(const std::vector<Sentence>& inputs, const std::vector<Sentence>& outputs,
                                       ReportMode mode, const ReportOptions& opt = {}) {
  if (inputs.size() != outputs.size())
    throw DataError("report needs one output per input: " + std::to_string(inputs.size()) + " vs " +
                    std::to_string(outputs.size()));
  if (inputs.empty()) throw DataError("report over an empty corpus");

  EmbellishmentReport r;
  r.mode = mode;
  r.total = inputs.size();
  if (mode == ReportMode::sentence)
    for (auto c : kOutputClasses) r.classes.push_back({std::string(to_string(c))});
  else
    for (auto c : kPairClasses) r.classes.push_back({std::string(to_string(c))});

  std::vector<std::size_t> shown(r.classes.size(), 0);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::size_t k;
    if (mode == ReportMode::sentence) {
      k = static_cast<std::size_t>(classify_output(inputs[i], outputs[i], opt.vocabulary, opt.classifier));
    } else {
      const auto [first, second] = split_pair(inputs[i]);
      k = static_cast<std::size_t>(classify_pair_output(first, second, outputs[i], opt.classifier));
    }
    ++r.classes[k].count;
    r.labels.push_back(r.classes[k].name);
    if (shown[k] < opt.exemplars_per_class) {
      ++shown[k];
      r.exemplars.push_back({i, to_line(inputs[i]), to_line(outputs[i]), r.classes[k].name});
    }
  }
  for (auto& c : r.classes) c.percent = 100.0 * static_cast<double>(c.count) / static_cast<double>(r.total);
  r.bleu = bleu(outputs, inputs);
  return r;
}

inline std::string format_report_text(const EmbellishmentReport& r) {
  std::string out = "mode: " + std::string(to_string(r.mode)) + "\nitems: " + std::to_string(r.total) + "\n";
  char buf[128];
  for (const auto& c : r.classes) {
    std::snprintf(buf, sizeof buf, "%-22s %8zu %7.2f%%\n", c.name.c_str(), c.count, c.percent);
    out += buf;
  }
  out += r.bleu.summary() + "\n";
  if (!r.exemplars.empty()) out += "\nexemplars:\n";
  for (const auto& e : r.exemplars) {
    out += "[" + e.label + "] #" + std::to_string(e.index + 1) + "\n";
    out += "  in:  " + e.input + "\n";
    out += "  out: " + e.output + "\n";
  }
  return out;
}

inline nlohmann::json bleu_to_json(const BleuScore& b) {
  nlohmann::json j;
  j["bleu"] = b.score;
  j["precisions"] = std::vector<double>(b.precisions.begin(), b.precisions.begin() + b.max_n);
  j["matches"] = std::vector<std::size_t>(b.matches.begin(), b.matches.begin() + b.max_n);
  j["totals"] = std::vector<std::size_t>(b.totals.begin(), b.totals.begin() + b.max_n);
  j["brevity_penalty"] = b.brevity_penalty;
  j["length_ratio"] = b.length_ratio();
  j["hypothesis_length"] = b.hypothesis_length;
  j["reference_length"] = b.reference_length;
  return j;
}

inline nlohmann::json report_to_json(const EmbellishmentReport& r) {
  nlohmann::json j;
  j["mode"] = to_string(r.mode);
  j["items"] = r.total;
  auto& classes = j["classes"] = nlohmann::json::object();
  for (const auto& c : r.classes) classes[c.name] = {{"count", c.count}, {"percent", c.percent}};
  j["bleu"] = bleu_to_json(r.bleu);
  auto& ex = j["exemplars"] = nlohmann::json::array();
  for (const auto& e : r.exemplars)
    ex.push_back({{"index", e.index}, {"class", e.label}, {"input", e.input}, {"output", e.output}});
  j["labels"] = r.labels;
  return j;
}

}  // namespace embellish::eval
