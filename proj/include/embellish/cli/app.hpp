#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "embellish/corpus/cct.hpp"
#include "embellish/corpus/parallel.hpp"
#include "embellish/error.hpp"
#include "embellish/eval/bleu.hpp"
#include "embellish/eval/decode.hpp"
#include "embellish/eval/report.hpp"
#include "embellish/io.hpp"
#include "embellish/neural/embeddings.hpp"
#include "embellish/neural/model.hpp"
#include "embellish/textpipe.hpp"
#include "embellish/training/checkpoint.hpp"
#include "embellish/training/config.hpp"
#include "embellish/training/trainer.hpp"

namespace embellish::cli {

inline constexpr const char* kConfigEnv = "EMBELLISH_CONFIG";

namespace detail {

inline std::string flag_name(const std::string& key) {
  std::string out = "--";
  for (char c : key) out += c == '_' ? '-' : c;
  return out;
}

inline std::string setting_help(const std::string& key) {
  static const std::map<std::string, std::string> help = {
      {"layers", "LSTM layers in encoder and decoder"},
      {"hidden_size", "LSTM hidden units"},
      {"embedding_size", "word embedding width"},
      {"dropout", "dropout rate on embeddings and between layers"},
      {"attention", "attention score: dot or general"},
      {"fine_tune_embeddings", "update the embedding table during training"},
      {"epochs", "training epochs"},
      {"lr0", "initial learning rate"},
      {"clip_norm", "global gradient norm limit"},
      {"decay_factor", "learning rate multiplier per decayed epoch"},
      {"decay_after_epoch", "last epoch trained at the initial rate"},
      {"decay_mode", "compound (factor^k) or constant (factor once)"},
      {"batch_size", "pairs per minibatch"},
      {"max_source_length", "source tokens kept per sentence"},
      {"max_target_length", "target tokens kept per sentence"},
  };
  auto it = help.find(key);
  return it == help.end() ? key : it->second;
}

inline std::map<std::string, std::string> settings_map(const training::Settings& s) {
  std::map<std::string, std::string> out;
  for (const auto& line : training::format_settings(s)) {
    const auto eq = line.find(" = ");
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

/// Global options shared by every subcommand.
struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

/// Settings in precedence order: built-in defaults, config file, flags.
inline training::Settings resolve_settings(const Globals& g, const std::map<std::string, std::string>& flags) {
  training::Settings s;
  if (!g.config.empty()) s = training::load_settings(g.config, s);
  for (const auto& [key, value] : flags) training::apply_setting(s, key, value);
  if (g.seed) s.train.seed = *g.seed;
  if (g.jobs) s.train.jobs = *g.jobs;
  return s;
}

inline std::vector<std::string> to_lines(const std::vector<Sentence>& sents) {
  std::vector<std::string> out;
  out.reserve(sents.size());
  for (const auto& s : sents) out.push_back(to_line(s));
  return out;
}

inline bool looks_like_cct(const std::vector<std::string>& lines) {
  for (const auto& l : lines) {
    const auto words = split_whitespace(l);
    if (words.empty()) continue;
    return words.front() == "#SYSTEM";
  }
  return false;
}

/// Story index (0-based, document order) of the first sentence of every
/// unit produced by `split_cct(c, g)`.
inline std::vector<std::size_t> unit_story_indices(const CctCorpus& c, Granularity g) {
  std::vector<std::size_t> out;
  std::size_t story_index = 0;
  for (const auto& sys : c.systems) {
    if (g == Granularity::system) out.push_back(story_index);
    for (const auto& story : sys.stories) {
      if (g == Granularity::story) out.push_back(story_index);
      for (const auto& p : story.paragraphs) {
        if (g == Granularity::paragraph) out.push_back(story_index);
        if (g == Granularity::sentence) out.insert(out.end(), p.sentences.size(), story_index);
      }
      ++story_index;
    }
  }
  return out;
}

/// Per-scope entity maps kept in first-use order.
class ScopeTable {
 public:
  EntityMap& get(const std::string& scope) {
    auto [it, inserted] = index_.try_emplace(scope, maps_.size());
    if (inserted) maps_.emplace_back(scope);
    return maps_[it->second];
  }

  std::vector<std::string> sidecar() const {
    std::vector<std::string> lines;
    for (const auto& m : maps_)
      for (auto& l : format_entity_sidecar(m)) lines.push_back(std::move(l));
    return lines;
  }

  std::size_t entity_count() const {
    std::size_t n = 0;
    for (const auto& m : maps_) n += m.entries().size();
    return n;
  }

 private:
  std::map<std::string, std::size_t> index_;
  std::vector<EntityMap> maps_;
};

inline Sentence anonymize_in(ScopeTable& table, const std::string& scope, const Sentence& s,
                             const EntityRecognizer& recognizer) {
  auto& map = table.get(scope);
  auto result = anonymize(s, recognizer, std::move(map));
  map = std::move(result.map);
  return result.sentence;
}

inline std::vector<Sentence> tokenize_lines(const std::vector<std::string>& lines, bool keep_blank,
                                            const std::string& origin) {
  std::vector<Sentence> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (split_whitespace(lines[i]).empty()) {
      if (keep_blank) throw DataError(origin + ":" + std::to_string(i + 1) + ": empty line in a parallel corpus");
      continue;
    }
    out.push_back(tokenize(lines[i]));
  }
  return out;
}

}  // namespace detail

struct PreprocessOptions {
  std::string input;
  std::string output;
  std::string format = "auto";
  std::string granularity = "sentence";
  bool pairs = false;
  bool anonymize = false;
  std::string scope = "story";
  std::string gazetteer;
  std::string entities;
  std::string target_input;
  std::string target_output;
};

inline int cmd_preprocess(const PreprocessOptions& o, std::ostream& out) {
  const auto lines = io::read_lines(o.input);
  const bool parallel = !o.target_input.empty();
  if (parallel != !o.target_output.empty())
    throw UsageError("--target-input and --target-output must be given together");
  const bool cct = o.format == "cct" || (o.format == "auto" && detail::looks_like_cct(lines));
  if (cct && parallel) throw UsageError("story corpora have no target side");

  std::vector<Sentence> units;
  std::vector<std::string> scopes;
  if (cct) {
    const auto corpus = parse_cct(lines, o.input);
    const auto g = parse_granularity(o.granularity);
    if (!g) throw UsageError("unknown granularity '" + o.granularity + "'");
    if (o.pairs && *g != Granularity::sentence) throw UsageError("--pairs works on sentence units");
    units = split_cct(corpus, *g);
    auto stories = detail::unit_story_indices(corpus, *g);
    if (o.pairs) {
      units = pair_sentences(units);
      std::vector<std::size_t> first;
      for (std::size_t i = 0; i < stories.size(); i += 2) first.push_back(stories[i]);
      stories = std::move(first);
    }
    for (std::size_t i = 0; i < units.size(); ++i)
      scopes.push_back(o.scope == "story" ? "story-" + std::to_string(stories[i] + 1) : "unit-" + std::to_string(i + 1));
    out << describe(corpus.counts()) << "\n";
  } else {
    units = detail::tokenize_lines(lines, parallel, o.input);
    if (o.pairs) units = pair_sentences(units);
    for (std::size_t i = 0; i < units.size(); ++i)
      scopes.push_back(o.scope == "story" ? std::string("doc") : "unit-" + std::to_string(i + 1));
  }

  std::vector<Sentence> targets;
  if (parallel) {
    targets = detail::tokenize_lines(io::read_lines(o.target_input), true, o.target_input);
    if (o.pairs) targets = pair_sentences(targets);
    if (targets.size() != units.size())
      throw DataError("parallel corpus is misaligned: " + std::to_string(units.size()) + " vs " +
                      std::to_string(targets.size()) + " lines");
  }

  if (o.anonymize) {
    GazetteerRecognizer recognizer = o.gazetteer.empty() ? GazetteerRecognizer{} : GazetteerRecognizer::from_file(o.gazetteer);
    const EntityRecognizer rec = recognizer;
    detail::ScopeTable table;
    for (std::size_t i = 0; i < units.size(); ++i) {
      units[i] = detail::anonymize_in(table, scopes[i], units[i], rec);
      if (parallel) targets[i] = detail::anonymize_in(table, scopes[i], targets[i], rec);
    }
    const std::string sidecar = o.entities.empty() ? o.output + ".entities" : o.entities;
    io::write_lines(sidecar, table.sidecar());
    io::write_lines(o.output + ".scopes", scopes);
    out << "entities: " << table.entity_count() << " (" << sidecar << ")\n";
  }

  io::write_lines(o.output, detail::to_lines(units));
  if (parallel) io::write_lines(o.target_output, detail::to_lines(targets));
  out << "units: " << units.size() << "\n";
  return 0;
}

struct BuildVocabOptions {
  std::vector<std::string> inputs;
  std::string output;
  std::size_t max_size = kDefaultVocabularySize;
};

inline int cmd_build_vocab(const BuildVocabOptions& o, std::ostream& out) {
  std::vector<Sentence> all;
  for (const auto& path : o.inputs) {
    auto sents = load_sentences(path);
    all.insert(all.end(), std::make_move_iterator(sents.begin()), std::make_move_iterator(sents.end()));
  }
  const auto vocab = build_vocabulary(all, o.max_size);
  vocab.save(o.output);
  out << "vocabulary: " << vocab.size() << " entries, hash " << vocab.hash() << "\n";
  return 0;
}

struct TrainOptions {
  std::string source;
  std::string target;
  std::string valid_source;
  std::string valid_target;
  double valid_fraction = 0.05;
  double test_fraction = 0.05;
  std::string vocab;
  std::string output_dir;
  std::size_t subsample = 0;
  std::string resume;
  std::string embeddings;
  std::string precision = "float";
  int stop_after = 0;
  int max_output_length = 100;
  std::map<std::string, std::string> settings;  // explicit setting flags
};

template <typename Scalar>
int train_with(const TrainOptions& o, training::Settings settings, std::ostream& out) {
  const auto vocab = Vocabulary::load(o.vocab);
  auto corpus = load_parallel(o.source, o.target);
  if (o.subsample > 0) corpus = subsample(corpus, o.subsample, mix_seed(settings.train.seed, 0x5Bu));

  ParallelCorpus train_set, valid_set;
  const std::filesystem::path dir = o.output_dir;
  std::filesystem::create_directories(dir);
  if (!o.valid_source.empty()) {
    train_set = std::move(corpus);
    valid_set = load_parallel(o.valid_source, o.valid_target);
  } else {
    const double train_fraction = 1.0 - o.valid_fraction - o.test_fraction;
    auto split = split_dataset(corpus, {train_fraction, o.valid_fraction, o.test_fraction},
                               mix_seed(settings.train.seed, 0x5Cu));
    save_parallel(dir / "test.src", dir / "test.tgt", split.test);
    save_parallel(dir / "valid.src", dir / "valid.tgt", split.valid);
    train_set = std::move(split.train);
    valid_set = std::move(split.valid);
  }

  neural::Model<Scalar> model;
  training::TrainState state;
  if (!o.resume.empty()) {
    auto ck = training::load_checkpoint<Scalar>(o.resume, vocab.hash());
    for (const auto& [key, value] : o.settings)
      if (key == "layers" || key == "hidden_size" || key == "embedding_size" || key == "dropout" ||
          key == "attention" || key == "fine_tune_embeddings")
        throw UsageError("--" + key + " cannot change when resuming");
    auto resumed = ck.settings;
    for (const auto& [key, value] : o.settings) training::apply_setting(resumed, key, value);
    resumed.train.seed = settings.train.seed;
    resumed.train.jobs = settings.train.jobs;
    settings = resumed;
    model = std::move(ck.model);
    state = ck.state;
    out << "resuming after epoch " << state.completed_epochs << "\n";
  } else {
    settings.model.vocab_size = static_cast<int>(vocab.size());
    model = neural::init_model<Scalar>(settings.model, mix_seed(settings.train.seed, 0x1Au));
    if (!o.embeddings.empty()) {
      auto pre = neural::load_pretrained_embeddings<Scalar>(o.embeddings, vocab, settings.model.embedding_size,
                                                            mix_seed(settings.train.seed, 0xEBu));
      model.embedding.value = std::move(pre.table);
      out << "pretrained embeddings: " << pre.coverage.found << "/" << pre.coverage.vocabulary << " rows\n";
    }
  }
  settings.train.validate();

  out << "training pairs: " << train_set.size() << ", validation pairs: " << valid_set.size()
      << ", parameters: " << model.parameter_count() << "\n";
  training::TrainOptions topt;
  topt.output_dir = dir;
  topt.vocab_hash = vocab.hash();
  topt.jobs = settings.train.jobs;
  topt.max_output_length = o.max_output_length;
  if (o.stop_after > 0) topt.stop_after_epoch = o.stop_after;
  topt.on_epoch = [&out](const training::EpochRecord& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "epoch %d  lr %.6g  loss %.6f  acc %.4f  valid_bleu %.2f  %.1fs\n", r.epoch,
                  r.learning_rate, r.train_loss, r.train_accuracy, r.valid_bleu, r.seconds);
    out << buf << std::flush;
  };
  training::train(model, train_set, valid_set, vocab, settings, topt, state);
  out << "checkpoint: " << (dir / "last.ckpt").string() << "\n";
  return 0;
}

inline int cmd_train(const TrainOptions& o, const training::Settings& settings, std::ostream& out) {
  if (o.valid_source.empty() != o.valid_target.empty())
    throw UsageError("--valid-source and --valid-target must be given together");
  if (o.precision == "double") return train_with<double>(o, settings, out);
  return train_with<float>(o, settings, out);
}

struct EmbellishOptions {
  std::string checkpoint;
  std::string vocab;
  std::string input;
  std::string output;
  int beam = 0;
  int max_length = 100;
  std::string unk = "keep";
  bool deanonymize = false;
  std::string entities;
  std::string scopes;
  bool detokenize = false;
};

template <typename Scalar>
int embellish_with(const EmbellishOptions& o, int jobs, std::ostream& out, std::ostream& err) {
  const auto vocab = Vocabulary::load(o.vocab);
  const auto ck = training::load_checkpoint<Scalar>(o.checkpoint, vocab.hash());
  const auto inputs = load_sentences(o.input);

  eval::DecodeConfig dc;
  dc.mode = o.beam > 0 ? eval::DecodeMode::beam : eval::DecodeMode::greedy;
  dc.beam_size = o.beam > 0 ? o.beam : 1;
  dc.max_output_length = o.max_length;
  dc.unk_policy = o.unk == "copy" ? eval::UnkPolicy::copy_source : eval::UnkPolicy::keep;
  dc.validate();

  std::map<std::string, EntityMap> maps;
  std::vector<std::string> scopes;
  if (o.deanonymize) {
    if (o.entities.empty() || o.scopes.empty()) throw UsageError("--deanonymize needs --entities and --scopes");
    maps = read_entity_sidecar(o.entities);
    scopes = io::read_lines(o.scopes);
    if (scopes.size() != inputs.size())
      throw DataError(o.scopes + ": " + std::to_string(scopes.size()) + " scope ids for " +
                      std::to_string(inputs.size()) + " input lines");
  }

  const auto results = eval::embellish_all(inputs, ck.model, vocab, dc, jobs);
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < results.size(); ++i) {
    for (const auto& w : results[i].warnings) err << "line " << i + 1 << ": " << w << "\n";
    Sentence s = results[i].sentence;
    if (o.deanonymize) {
      auto it = maps.find(scopes[i]);
      const EntityMap empty(scopes[i]);
      auto restored = deanonymize(s, it == maps.end() ? empty : it->second);
      for (const auto& w : restored.warnings)
        err << "line " << i + 1 << ": no entity for " << w.placeholder << " in scope " << scopes[i] << "\n";
      s = std::move(restored.sentence);
    }
    lines.push_back(o.detokenize ? detokenize(s) : to_line(s));
  }
  io::write_lines(o.output, lines);
  out << "embellished: " << lines.size() << " lines\n";
  return 0;
}

inline int cmd_embellish(const EmbellishOptions& o, int jobs, std::ostream& out, std::ostream& err) {
  if (training::checkpoint_scalar_width(o.checkpoint) == sizeof(double)) return embellish_with<double>(o, jobs, out, err);
  return embellish_with<float>(o, jobs, out, err);
}

struct ScoreOptions {
  std::string hypotheses;
  std::string references;
  std::string json;
  std::string smoothing = "none";
};

inline int cmd_score(const ScoreOptions& o, std::ostream& out) {
  const auto hyps = load_sentences(o.hypotheses);
  const auto refs = load_sentences(o.references);
  const auto smoothing = o.smoothing == "add-one" ? eval::BleuSmoothing::add_one : eval::BleuSmoothing::none;
  const auto score = eval::bleu(hyps, refs, 4, smoothing);
  out << score.summary() << "\n";
  if (!o.json.empty()) io::write_file_atomic(o.json, eval::bleu_to_json(score).dump(2) + "\n");
  return 0;
}

struct ReportOptions {
  std::string input;
  std::string embellished;
  std::string mode = "sentence";
  std::string vocab;
  std::string json;
  std::string text;
  double related_overlap = 0.30;
  double first_kept_overlap = 0.60;
  std::size_t exemplars = 3;
};

inline int cmd_report(const ReportOptions& o, std::ostream& out) {
  const auto inputs = load_sentences(o.input);
  const auto outputs = load_sentences(o.embellished);
  std::optional<Vocabulary> vocab;
  if (!o.vocab.empty()) vocab = Vocabulary::load(o.vocab);
  eval::ReportOptions ropt;
  ropt.classifier = {o.related_overlap, o.first_kept_overlap};
  ropt.vocabulary = vocab ? &*vocab : nullptr;
  ropt.exemplars_per_class = o.exemplars;
  const auto report = eval::make_report(inputs, outputs, *eval::parse_report_mode(o.mode), ropt);
  const auto text = eval::format_report_text(report);
  out << text;
  if (!o.text.empty()) io::write_file_atomic(o.text, text);
  if (!o.json.empty()) io::write_file_atomic(o.json, eval::report_to_json(report).dump(2) + "\n");
  return 0;
}

struct CctOptions {
  std::string input;
  std::string granularity = "sentence";
  std::string manifest;
  std::string output;
  std::string markers;
  bool pairs = false;
};

inline int cmd_cct(const CctOptions& o, std::ostream& out) {
  const auto corpus = std::filesystem::is_directory(o.input) ? convert_cct_directory(o.input) : load_cct(o.input);
  const auto counts = corpus.counts();
  out << describe(counts) << "\n";
  const auto g = parse_granularity(o.granularity);
  if (!g) throw UsageError("unknown granularity '" + o.granularity + "'");
  if (o.pairs && *g != Granularity::sentence) throw UsageError("--pairs works on sentence units");
  const auto units = o.pairs ? make_pair_units(corpus) : split_cct(corpus, *g);
  out << (o.pairs ? std::string("pair") : o.granularity) << " units: " << units.size() << "\n";
  if (!o.output.empty()) io::write_lines(o.output, detail::to_lines(units));
  if (!o.markers.empty()) io::write_lines(o.markers, format_cct(corpus));
  if (!o.manifest.empty()) {
    const auto expected = load_manifest(o.manifest);
    if (!(expected == counts))
      throw DataError("counts differ from manifest " + o.manifest + ": found " + describe(counts) + ", expected " +
                      describe(expected));
    out << "manifest: ok\n";
  }
  return 0;
}

/// Parses `args` and runs the selected subcommand. Returns the process exit
/// code; diagnostics go to `err`.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural textual embellishment: preprocess, train, decode and evaluate.", "embellish"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.get_formatter()->column_width(36);

  detail::Globals globals;
  app.add_option("--config", globals.config, "settings file with key = value lines")
      ->envname(kConfigEnv)
      ->default_str("");
  std::uint64_t seed = 1;
  int jobs = 1;
  auto* seed_opt = app.add_option("--seed", seed, "seed for every random choice");
  auto* jobs_opt = app.add_option("--jobs", jobs, "worker threads for decoding")->check(CLI::PositiveNumber);

  PreprocessOptions pre;
  auto* pre_cmd = app.add_subcommand("preprocess", "tokenize, optionally anonymize and pair a corpus");
  pre_cmd->add_option("--input", pre.input, "plain text (one sentence per line) or story marker file")->required();
  pre_cmd->add_option("--output", pre.output, "tokenized output, one unit per line")->required();
  pre_cmd->add_option("--format", pre.format, "input format")->check(CLI::IsMember({"auto", "text", "cct"}));
  pre_cmd->add_option("--granularity", pre.granularity, "unit size for story corpora")
      ->check(CLI::IsMember({"system", "story", "paragraph", "sentence"}));
  pre_cmd->add_flag("--pairs", pre.pairs, "concatenate consecutive sentences two by two");
  pre_cmd->add_flag("--anonymize", pre.anonymize, "replace named entities by CATEGORY@k placeholders");
  pre_cmd->add_option("--scope", pre.scope, "placeholder numbering scope")->check(CLI::IsMember({"story", "sentence"}));
  pre_cmd->add_option("--gazetteer", pre.gazetteer, "surface<TAB>CATEGORY list for entity recognition");
  pre_cmd->add_option("--entities", pre.entities, "entity map sidecar (default: OUTPUT.entities)");
  pre_cmd->add_option("--target-input", pre.target_input, "aligned target side of a parallel corpus");
  pre_cmd->add_option("--target-output", pre.target_output, "tokenized target output");

  BuildVocabOptions bv;
  auto* bv_cmd = app.add_subcommand("build-vocab", "build a frequency-ranked vocabulary");
  bv_cmd->add_option("--input", bv.inputs, "tokenized corpus files")->required();
  bv_cmd->add_option("--output", bv.output, "vocabulary file, one token per line")->required();
  bv_cmd->add_option("--max-size", bv.max_size, "entries including the four special tokens");

  TrainOptions tr;
  auto* tr_cmd = app.add_subcommand("train", "train an encoder-decoder model");
  tr_cmd->add_option("--source", tr.source, "tokenized source sentences")->required();
  tr_cmd->add_option("--target", tr.target, "tokenized target sentences")->required();
  tr_cmd->add_option("--valid-source", tr.valid_source, "validation sources (default: held out from training)");
  tr_cmd->add_option("--valid-target", tr.valid_target, "validation targets");
  tr_cmd->add_option("--valid-fraction", tr.valid_fraction, "share held out for validation")
      ->check(CLI::Range(0.0, 1.0));
  tr_cmd->add_option("--test-fraction", tr.test_fraction, "share held out for testing")->check(CLI::Range(0.0, 1.0));
  tr_cmd->add_option("--vocab", tr.vocab, "vocabulary file")->required();
  tr_cmd->add_option("--output-dir", tr.output_dir, "checkpoints, logs and held-out splits")->required();
  tr_cmd->add_option("--subsample", tr.subsample, "train on a seeded sample of this many pairs (0: all)");
  tr_cmd->add_option("--resume", tr.resume, "continue from a checkpoint");
  tr_cmd->add_option("--embeddings", tr.embeddings, "pretrained word vectors in text format");
  tr_cmd->add_option("--precision", tr.precision, "parameter precision")->check(CLI::IsMember({"float", "double"}));
  tr_cmd->add_option("--stop-after", tr.stop_after, "stop after this epoch (0: run the full schedule)");
  tr_cmd->add_option("--max-output-length", tr.max_output_length, "decoding limit for validation BLEU");
  const auto defaults = detail::settings_map(training::Settings{});
  std::map<std::string, std::string> setting_values;
  std::vector<std::pair<std::string, CLI::Option*>> setting_opts;
  for (const auto& key : training::setting_keys()) {
    if (key == "vocab_size" || key == "seed" || key == "jobs") continue;
    auto* opt = tr_cmd->add_option(detail::flag_name(key), setting_values[key], detail::setting_help(key))
                    ->type_name("VALUE")
                    ->default_str(defaults.at(key));
    setting_opts.emplace_back(key, opt);
  }

  EmbellishOptions em;
  auto* em_cmd = app.add_subcommand("embellish", "decode sentences with a trained model");
  em_cmd->add_option("--checkpoint", em.checkpoint, "trained model")->required();
  em_cmd->add_option("--vocab", em.vocab, "vocabulary the model was trained with")->required();
  em_cmd->add_option("--input", em.input, "tokenized sentences")->required();
  em_cmd->add_option("--output", em.output, "embellished sentences")->required();
  em_cmd->add_option("--beam", em.beam, "beam size (0: greedy search)")->check(CLI::NonNegativeNumber);
  em_cmd->add_option("--max-length", em.max_length, "maximum output tokens")->check(CLI::PositiveNumber);
  em_cmd->add_option("--unk", em.unk, "unknown-word output: keep <unk> or copy the most attended source token")
      ->check(CLI::IsMember({"keep", "copy"}));
  em_cmd->add_flag("--deanonymize", em.deanonymize, "restore entity names from the sidecar");
  em_cmd->add_option("--entities", em.entities, "entity map sidecar written by preprocess");
  em_cmd->add_option("--scopes", em.scopes, "scope ids per input line written by preprocess");
  em_cmd->add_flag("--detokenize", em.detokenize, "write untokenized text");

  ScoreOptions sc;
  auto* sc_cmd = app.add_subcommand("score", "corpus BLEU of hypotheses against references");
  sc_cmd->add_option("--hyp", sc.hypotheses, "tokenized hypotheses")->required();
  sc_cmd->add_option("--ref", sc.references, "tokenized references, one per hypothesis")->required();
  sc_cmd->add_option("--json", sc.json, "write the BLEU decomposition as JSON");
  sc_cmd->add_option("--smoothing", sc.smoothing, "n-gram precision smoothing")
      ->check(CLI::IsMember({"none", "add-one"}));

  ReportOptions rp;
  auto* rp_cmd = app.add_subcommand("report", "classify embellished outputs against their inputs");
  rp_cmd->add_option("--input", rp.input, "tokenized inputs (pair mode: concatenated pairs)")->required();
  rp_cmd->add_option("--embellished", rp.embellished, "tokenized outputs, one per input")->required();
  rp_cmd->add_option("--mode", rp.mode, "taxonomy")->check(CLI::IsMember({"sentence", "pair"}));
  rp_cmd->add_option("--vocab", rp.vocab, "vocabulary for out-of-vocabulary discounting");
  rp_cmd->add_option("--json", rp.json, "write the report as JSON");
  rp_cmd->add_option("--text", rp.text, "write the text report to a file");
  rp_cmd->add_option("--related-overlap", rp.related_overlap, "content overlap for substitution and combination")
      ->check(CLI::Range(0.0, 1.0));
  rp_cmd->add_option("--first-kept-overlap", rp.first_kept_overlap, "overlap with the first sentence for first_kept")
      ->check(CLI::Range(0.0, 1.0));
  rp_cmd->add_option("--exemplars", rp.exemplars, "examples listed per class");

  CctOptions cc;
  auto* cc_cmd = app.add_subcommand("cct", "count and split a story corpus");
  cc_cmd->add_option("--input", cc.input, "marker file, or a directory of <system>/<story>.txt files")->required();
  cc_cmd->add_option("--granularity", cc.granularity, "unit size")
      ->check(CLI::IsMember({"system", "story", "paragraph", "sentence"}));
  cc_cmd->add_flag("--pairs", cc.pairs, "pair consecutive sentences");
  cc_cmd->add_option("--validate-manifest", cc.manifest, "fail unless counts match this key=value manifest");
  cc_cmd->add_option("--output", cc.output, "write the units, one per line");
  cc_cmd->add_option("--markers", cc.markers, "write the corpus in marker format");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::usage);
  }

  if (seed_opt->count() > 0) globals.seed = seed;
  if (jobs_opt->count() > 0) globals.jobs = jobs;

  try {
    std::map<std::string, std::string> explicit_settings;
    for (const auto& [key, opt] : setting_opts)
      if (opt->count() > 0) explicit_settings[key] = setting_values[key];
    const auto settings = detail::resolve_settings(globals, explicit_settings);
    if (pre_cmd->parsed()) return cmd_preprocess(pre, out);
    if (bv_cmd->parsed()) return cmd_build_vocab(bv, out);
    if (tr_cmd->parsed()) {
      tr.settings = explicit_settings;
      return cmd_train(tr, settings, out);
    }
    if (em_cmd->parsed()) return cmd_embellish(em, settings.train.jobs, out, err);
    if (sc_cmd->parsed()) return cmd_score(sc, out);
    if (rp_cmd->parsed()) return cmd_report(rp, out);
    if (cc_cmd->parsed()) return cmd_cct(cc, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::io);
  } catch (const std::bad_alloc&) {
    err << "error: out of memory\n";
    return static_cast<int>(ErrorKind::numeric);
  }
  return static_cast<int>(ErrorKind::usage);
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv, argv + argc);
  return run_cli(args, out, err);
}

}  // namespace embellish::cli
