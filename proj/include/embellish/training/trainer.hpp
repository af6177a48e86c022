#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "embellish/corpus/parallel.hpp"
#include "embellish/error.hpp"
#include "embellish/eval/bleu.hpp"
#include "embellish/eval/decode.hpp"
#include "embellish/neural/graph.hpp"
#include "embellish/neural/model.hpp"
#include "embellish/random.hpp"
#include "embellish/training/checkpoint.hpp"
#include "embellish/training/config.hpp"

namespace embellish::training {

/// One minibatch of encoded pairs (BOS ... EOS). Sequences are stored
/// unpadded; `padded` right-pads with PAD for a rectangular view.
struct Batch {
  std::vector<std::vector<TokenId>> source;
  std::vector<std::vector<TokenId>> target;
  std::vector<std::size_t> indices;  // positions in the corpus

  std::size_t size() const noexcept { return source.size(); }

  static std::vector<std::size_t> lengths(const std::vector<std::vector<TokenId>>& seqs) {
    std::vector<std::size_t> out;
    for (const auto& s : seqs) out.push_back(s.size());
    return out;
  }

  static std::vector<std::vector<TokenId>> padded(const std::vector<std::vector<TokenId>>& seqs) {
    std::size_t width = 0;
    for (const auto& s : seqs) width = std::max(width, s.size());
    auto out = seqs;
    for (auto& s : out) s.resize(width, kPadId);
    return out;
  }
};

struct BatchPlan {
  std::vector<Batch> batches;
  std::size_t truncated_sources = 0;
  std::size_t truncated_targets = 0;
  std::size_t pairs = 0;  // items placed into batches

  std::size_t truncated() const noexcept { return truncated_sources + truncated_targets; }
};

/// Pairs are shuffled with a generator seeded by `epoch_seed`, grouped into
/// pools of 16 batches, sorted by source length inside each pool (stable) and
/// sliced into batches in that order. Sentences longer than the configured
/// maxima are cut to the maximum before BOS/EOS are added.
inline BatchPlan make_batches(const ParallelCorpus& c, const Vocabulary& v, const TrainConfig& cfg,
                              std::uint64_t epoch_seed) {
  if (c.empty()) throw DataError("cannot batch an empty corpus");
  cfg.validate();
  BatchPlan plan;
  std::vector<std::vector<TokenId>> src(c.size()), tgt(c.size());
  auto clip = [&v](const Sentence& s, int max_len, std::size_t& counter) {
    if (s.size() <= static_cast<std::size_t>(max_len)) return encode(s, v);
    ++counter;
    Sentence cut(std::vector<std::string>(s.tokens.begin(), s.tokens.begin() + max_len));
    return encode(cut, v);
  };
  for (std::size_t i = 0; i < c.size(); ++i) {
    src[i] = clip(c.source[i], cfg.max_source_length, plan.truncated_sources);
    tgt[i] = clip(c.target[i], cfg.max_target_length, plan.truncated_targets);
  }

  std::vector<std::size_t> order(c.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(epoch_seed);
  shuffle(order, rng);

  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t pool = batch * 16;
  for (std::size_t start = 0; start < order.size(); start += pool) {
    const auto end = std::min(order.size(), start + pool);
    std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return src[a].size() < src[b].size(); });
    for (std::size_t b = start; b < end; b += batch) {
      Batch out;
      for (std::size_t k = b; k < std::min(end, b + batch); ++k) {
        out.indices.push_back(order[k]);
        out.source.push_back(std::move(src[order[k]]));
        out.target.push_back(std::move(tgt[order[k]]));
      }
      plan.pairs += out.size();
      plan.batches.push_back(std::move(out));
    }
  }
  return plan;
}

/// Scales every gradient by max_norm / g when the global L2 norm g over all
/// parameters exceeds max_norm. Returns the applied factor (1 if untouched).
template <typename Scalar>
double clip_gradients(std::span<neural::Parameter<Scalar>* const> params, double max_norm = 5.0) {
  double sq = 0.0;
  for (const auto* p : params) sq += p->grad.template cast<double>().squaredNorm();
  const double norm = std::sqrt(sq);
  if (!(norm > max_norm)) return 1.0;
  const double scale = max_norm / norm;
  for (auto* p : params) p->grad *= static_cast<Scalar>(scale);
  return scale;
}

template <typename Scalar>
double clip_gradients(const std::vector<neural::Parameter<Scalar>*>& params, double max_norm = 5.0) {
  return clip_gradients<Scalar>(std::span<neural::Parameter<Scalar>* const>(params), max_norm);
}

template <typename Scalar>
double gradient_norm(std::span<neural::Parameter<Scalar>* const> params) {
  double sq = 0.0;
  for (const auto* p : params) sq += p->grad.template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

/// value -= lr * grad for every trainable parameter, then gradients are zeroed.
template <typename Scalar>
void sgd_step(std::span<neural::Parameter<Scalar>* const> params, double lr) {
  for (auto* p : params) {
    if (p->trainable) p->value -= static_cast<Scalar>(lr) * p->grad;
    p->grad.setZero();
  }
}

template <typename Scalar>
void sgd_step(const std::vector<neural::Parameter<Scalar>*>& params, double lr) {
  sgd_step<Scalar>(std::span<neural::Parameter<Scalar>* const>(params), lr);
}

template <typename Scalar>
void sgd_step(neural::Model<Scalar>& m, double lr) {
  auto params = m.parameters();
  sgd_step<Scalar>(params, lr);
}

struct EpochRecord {
  int epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;  // token-weighted mean NLL
  double train_accuracy = 0.0;
  double valid_bleu = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  std::size_t batches = 0;
  std::size_t pairs = 0;
  std::size_t tokens = 0;
  std::size_t truncated = 0;
  std::size_t clipped_batches = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
};

struct TrainOptions {
  std::filesystem::path output_dir;  // empty: no checkpoints or logs
  std::uint64_t vocab_hash = 0;
  int jobs = 1;
  int max_output_length = 100;             // validation decoding
  std::optional<int> stop_after_epoch;     // stop early, e.g. to test resumption
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<bool(const EpochRecord&)> stop_when;  // checked after each epoch
};

inline std::filesystem::path epoch_checkpoint_path(const std::filesystem::path& dir, int epoch) {
  char name[64];
  std::snprintf(name, sizeof name, "epoch-%03d.ckpt", epoch);
  return dir / name;
}

inline std::string format_log_line(const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d\t%.9g\t%.9g\t%.4f", r.epoch, r.learning_rate, r.train_loss, r.valid_bleu);
  return buf;
}

inline nlohmann::json report_to_json(const TrainReport& report) {
  auto finite = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& r : report.epochs)
    epochs.push_back({{"epoch", r.epoch},
                      {"learning_rate", r.learning_rate},
                      {"train_loss", finite(r.train_loss)},
                      {"train_accuracy", r.train_accuracy},
                      {"valid_bleu", finite(r.valid_bleu)},
                      {"seconds", r.seconds},
                      {"batches", r.batches},
                      {"pairs", r.pairs},
                      {"tokens", r.tokens},
                      {"truncated", r.truncated},
                      {"clipped_batches", r.clipped_batches}});
  return {{"epochs", epochs}};
}

/// Greedy-decodes every source and scores the outputs against the targets.
template <typename Scalar>
double validation_bleu(const neural::Model<Scalar>& m, const ParallelCorpus& valid, const Vocabulary& v, int jobs,
                       int max_output_length) {
  if (valid.empty()) return std::numeric_limits<double>::quiet_NaN();
  eval::DecodeConfig dc;
  dc.max_output_length = max_output_length;
  const auto results = eval::embellish_all(valid.source, m, v, dc, jobs);
  std::vector<Sentence> hyps;
  hyps.reserve(results.size());
  for (const auto& r : results) hyps.push_back(r.sentence);
  return eval::bleu(hyps, valid.target).score;
}

/// Runs the SGD schedule from epoch `state.completed_epochs + 1` up to
/// `settings.train.epochs`. Batch composition depends only on the seed and
/// the epoch number, and the dropout generator state travels with every
/// checkpoint, so a resumed run repeats the uninterrupted one exactly.
template <typename Scalar>
TrainReport train(neural::Model<Scalar>& m, const ParallelCorpus& train_set, const ParallelCorpus& valid,
                  const Vocabulary& v, const Settings& settings, const TrainOptions& opt = {},
                  TrainState state = {}) {
  const auto& cfg = settings.train;
  cfg.validate();
  m.config.validate();
  if (static_cast<std::size_t>(m.config.vocab_size) != v.size())
    throw DataError("model vocabulary size " + std::to_string(m.config.vocab_size) + " differs from vocabulary (" +
                    std::to_string(v.size()) + " entries)");
  if (train_set.empty()) throw DataError("training corpus is empty");

  Rng dropout_rng(mix_seed(cfg.seed, 0xD50u));
  if (!state.rng_state.empty()) restore_rng_state(dropout_rng, state.rng_state);

  std::ofstream log;
  if (!opt.output_dir.empty()) {
    std::filesystem::create_directories(opt.output_dir);
    const auto log_path = opt.output_dir / "train_log.tsv";
    log.open(log_path, state.completed_epochs == 0 ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError("cannot write " + log_path.string());
    if (state.completed_epochs == 0) log << "epoch\tlr\ttrain_loss\tvalid_bleu\n";
  }

  TrainReport report;
  auto params = m.parameters();
  m.zero_grad();
  const int last_epoch = opt.stop_after_epoch ? std::min(*opt.stop_after_epoch, cfg.epochs) : cfg.epochs;
  for (int epoch = state.completed_epochs + 1; epoch <= last_epoch; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = learning_rate(epoch, cfg);
    const auto plan = make_batches(train_set, v, cfg, mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    rec.truncated = plan.truncated();
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      const auto& batch = plan.batches[b];
      neural::Graph<Scalar> g;
      const auto result = [&] {
        try {
          return neural::forward_loss(g, m, batch.source, batch.target,
                                      neural::DropoutContext{m.config.dropout, &dropout_rng});
        } catch (const NumericError& e) {
          throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) + ": " + e.what());
        }
      }();
      const double loss = static_cast<double>(g.value(result.loss)(0, 0));
      if (!std::isfinite(loss))
        throw NumericError("non-finite training loss in epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b));
      g.backward(result.loss);
      if (clip_gradients<Scalar>(params, cfg.clip_norm) < 1.0) ++rec.clipped_batches;
      sgd_step<Scalar>(params, rec.learning_rate);
      for (const auto* p : params)
        if (!p->value.allFinite())
          throw NumericError("non-finite parameter '" + p->name + "' after epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(b));
      loss_sum += loss * static_cast<double>(result.tokens);
      rec.tokens += result.tokens;
      correct += result.correct;
      rec.pairs += batch.size();
      ++rec.batches;
    }
    rec.train_loss = loss_sum / static_cast<double>(rec.tokens);
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(rec.tokens);
    rec.valid_bleu = validation_bleu(m, valid, v, opt.jobs, opt.max_output_length);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    state.completed_epochs = epoch;
    state.rng_state = rng_state(dropout_rng);
    if (!opt.output_dir.empty()) {
      save_checkpoint(epoch_checkpoint_path(opt.output_dir, epoch), m, settings, opt.vocab_hash, state);
      save_checkpoint(opt.output_dir / "last.ckpt", m, settings, opt.vocab_hash, state);
      log << format_log_line(rec) << '\n' << std::flush;
    }
    report.epochs.push_back(rec);
    if (opt.on_epoch) opt.on_epoch(rec);
    if (opt.stop_when && opt.stop_when(rec)) break;
  }
  if (!opt.output_dir.empty())
    io::write_file_atomic(opt.output_dir / "train_summary.json", report_to_json(report).dump(2) + "\n");
  return report;
}

}  // namespace embellish::training
