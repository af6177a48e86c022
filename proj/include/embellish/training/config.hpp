#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "embellish/error.hpp"
#include "embellish/io.hpp"
#include "embellish/neural/model.hpp"
#include "embellish/textpipe/sentence.hpp"

namespace embellish::training {

/// How the learning rate decays once `decay_after_epoch` has passed.
enum class DecayMode {
  compound,  // lr0 * factor^(epoch - decay_after_epoch)
  constant,  // lr0 * factor
};

struct TrainConfig {
  int epochs = 24;
  double lr0 = 1.0;
  double clip_norm = 5.0;
  double decay_factor = 0.25;
  int decay_after_epoch = 18;
  DecayMode decay_mode = DecayMode::compound;
  int batch_size = 64;
  std::uint64_t seed = 1;
  int max_source_length = 100;
  int max_target_length = 100;
  int jobs = 1;

  void validate() const {
    if (epochs < 1) throw UsageError("epochs must be at least 1");
    if (!(lr0 > 0.0)) throw UsageError("lr0 must be positive");
    if (!(clip_norm > 0.0)) throw UsageError("clip_norm must be positive");
    if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw UsageError("decay_factor must lie in (0, 1]");
    if (decay_after_epoch < 0) throw UsageError("decay_after_epoch must be non-negative");
    if (batch_size < 1) throw UsageError("batch_size must be at least 1");
    if (max_source_length < 1 || max_target_length < 1) throw UsageError("length limits must be at least 1");
    if (jobs < 1) throw UsageError("jobs must be at least 1");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Learning rate for a 1-based epoch: lr0 up to and including
/// decay_after_epoch, decayed by decay_factor per epoch afterwards.
inline double learning_rate(int epoch, const TrainConfig& cfg) {
  if (epoch < 1) throw UsageError("epoch numbers start at 1, got " + std::to_string(epoch));
  if (epoch <= cfg.decay_after_epoch) return cfg.lr0;
  if (cfg.decay_mode == DecayMode::constant) return cfg.lr0 * cfg.decay_factor;
  return cfg.lr0 * std::pow(cfg.decay_factor, epoch - cfg.decay_after_epoch);
}

/// Model and training settings addressed by flat `key = value` names.
struct Settings {
  neural::ModelConfig model;
  TrainConfig train;
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw UsageError("setting '" + key + "': '" + value + "' is not a valid number");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw UsageError("setting '" + key + "': expected true or false, got '" + value + "'");
}

}  // namespace detail

inline std::vector<std::string> setting_keys() {
  return {"layers",     "hidden_size",       "embedding_size",    "vocab_size",        "dropout",
          "attention",  "fine_tune_embeddings", "epochs",       "lr0",               "clip_norm",
          "decay_factor", "decay_after_epoch", "decay_mode",     "batch_size",        "seed",
          "max_source_length", "max_target_length", "jobs"};
}

inline void apply_setting(Settings& s, const std::string& key, const std::string& value) {
  using detail::parse_number;
  auto& m = s.model;
  auto& t = s.train;
  if (key == "layers") m.num_layers = parse_number<int>(key, value);
  else if (key == "hidden_size") m.hidden_size = parse_number<int>(key, value);
  else if (key == "embedding_size") m.embedding_size = parse_number<int>(key, value);
  else if (key == "vocab_size") m.vocab_size = parse_number<int>(key, value);
  else if (key == "dropout") m.dropout = parse_number<double>(key, value);
  else if (key == "attention") {
    auto a = neural::parse_attention_score(value);
    if (!a) throw UsageError("setting 'attention': expected dot or general, got '" + value + "'");
    m.attention = *a;
  } else if (key == "fine_tune_embeddings") m.fine_tune_embeddings = detail::parse_bool(key, value);
  else if (key == "epochs") t.epochs = parse_number<int>(key, value);
  else if (key == "lr0" || key == "learning_rate") t.lr0 = parse_number<double>(key, value);
  else if (key == "clip_norm") t.clip_norm = parse_number<double>(key, value);
  else if (key == "decay_factor") t.decay_factor = parse_number<double>(key, value);
  else if (key == "decay_after_epoch") t.decay_after_epoch = parse_number<int>(key, value);
  else if (key == "decay_mode") {
    if (value == "compound") t.decay_mode = DecayMode::compound;
    else if (value == "constant") t.decay_mode = DecayMode::constant;
    else throw UsageError("setting 'decay_mode': expected compound or constant, got '" + value + "'");
  } else if (key == "batch_size") t.batch_size = parse_number<int>(key, value);
  else if (key == "seed") t.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "max_source_length") t.max_source_length = parse_number<int>(key, value);
  else if (key == "max_target_length") t.max_target_length = parse_number<int>(key, value);
  else if (key == "jobs") t.jobs = parse_number<int>(key, value);
  else throw UsageError("unknown setting '" + key + "'");
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
inline void parse_settings(Settings& s, const std::vector<std::string>& lines, const std::string& origin) {
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    const auto words = split_whitespace(line);
    if (words.empty() || words.front().front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(origin + ":" + std::to_string(i + 1) + ": expected key = value");
    const auto key = split_whitespace(line.substr(0, eq));
    const auto value = split_whitespace(line.substr(eq + 1));
    if (key.size() != 1 || value.size() != 1)
      throw UsageError(origin + ":" + std::to_string(i + 1) + ": expected key = value");
    try {
      apply_setting(s, key[0], value[0]);
    } catch (const UsageError& e) {
      throw UsageError(origin + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
}

inline Settings load_settings(const std::filesystem::path& path, Settings base = {}) {
  parse_settings(base, io::read_lines(path), path.string());
  return base;
}

namespace detail {
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}
}  // namespace detail

inline std::vector<std::string> format_settings(const Settings& s) {
  using detail::format_double;
  const auto& m = s.model;
  const auto& t = s.train;
  return {
      "layers = " + std::to_string(m.num_layers),
      "hidden_size = " + std::to_string(m.hidden_size),
      "embedding_size = " + std::to_string(m.embedding_size),
      "vocab_size = " + std::to_string(m.vocab_size),
      "dropout = " + format_double(m.dropout),
      "attention = " + std::string(neural::to_string(m.attention)),
      "fine_tune_embeddings = " + std::string(m.fine_tune_embeddings ? "true" : "false"),
      "epochs = " + std::to_string(t.epochs),
      "lr0 = " + format_double(t.lr0),
      "clip_norm = " + format_double(t.clip_norm),
      "decay_factor = " + format_double(t.decay_factor),
      "decay_after_epoch = " + std::to_string(t.decay_after_epoch),
      "decay_mode = " + std::string(t.decay_mode == DecayMode::compound ? "compound" : "constant"),
      "batch_size = " + std::to_string(t.batch_size),
      "seed = " + std::to_string(t.seed),
      "max_source_length = " + std::to_string(t.max_source_length),
      "max_target_length = " + std::to_string(t.max_target_length),
      "jobs = " + std::to_string(t.jobs),
  };
}

}  // namespace embellish::training
