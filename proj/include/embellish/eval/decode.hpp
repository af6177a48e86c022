#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <concepts>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "embellish/error.hpp"
#include "embellish/neural/model.hpp"
#include "embellish/textpipe/sentence.hpp"
#include "embellish/textpipe/vocabulary.hpp"

namespace embellish::eval {

enum class DecodeMode { greedy, beam };

/// What to emit when the model predicts `<unk>`.
enum class UnkPolicy {
  keep,
  copy_source,  // the source token with the highest attention weight
};

struct DecodeConfig {
  DecodeMode mode = DecodeMode::greedy;
  int beam_size = 5;
  int max_output_length = 100;
  UnkPolicy unk_policy = UnkPolicy::keep;

  void validate() const {
    if (beam_size < 1) throw UsageError("beam size must be at least 1");
    if (max_output_length < 1) throw UsageError("max output length must be at least 1");
  }
};

/// Result of scoring K partial hypotheses for one more token.
template <typename State>
struct ScoredStep {
  Eigen::MatrixXd log_probs;  // K x V
  State next;
  Eigen::MatrixXd attention;  // K x T, may be empty
};

/// Anything that can extend a batch of partial hypotheses by one token.
template <class S>
concept StepScorer = requires(const S& s, const typename S::State& st, std::span<const TokenId> prev,
                              std::span<const std::size_t> rows) {
  { s.initial() } -> std::same_as<typename S::State>;
  { s.step(st, prev) } -> std::same_as<ScoredStep<typename S::State>>;
  { s.select(st, rows) } -> std::same_as<typename S::State>;
};

struct Hypothesis {
  std::vector<TokenId> tokens;       // without BOS/EOS
  std::vector<int> attention_argmax;  // source position per token, -1 if unknown
  double log_prob = 0.0;              // includes the EOS step when finished
  bool finished = false;              // ended with EOS

  /// Length-normalized score: log-probability per emitted token (EOS counts).
  double score() const {
    const auto n = tokens.size() + (finished ? 1 : 0);
    return n ? log_prob / static_cast<double>(n) : log_prob;
  }
};

namespace detail {

inline bool can_emit(TokenId v) { return v != kPadId && v != kBosId; }

inline int argmax_or_none(const Eigen::MatrixXd& attention, Eigen::Index row) {
  if (attention.size() == 0) return -1;
  Eigen::Index best;
  attention.row(row).maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace detail

/// Picks the most probable token at every step until EOS or `max_len` tokens.
/// Ties go to the lowest id.
template <StepScorer S>
Hypothesis greedy_search(const S& scorer, int max_len) {
  Hypothesis hyp;
  auto state = scorer.initial();
  TokenId prev = kBosId;
  while (static_cast<int>(hyp.tokens.size()) < max_len) {
    auto step = scorer.step(state, std::span<const TokenId>(&prev, 1));
    TokenId best = -1;
    double best_lp = 0;
    for (Eigen::Index v = 0; v < step.log_probs.cols(); ++v) {
      if (!detail::can_emit(static_cast<TokenId>(v))) continue;
      if (best < 0 || step.log_probs(0, v) > best_lp) {
        best = static_cast<TokenId>(v);
        best_lp = step.log_probs(0, v);
      }
    }
    hyp.log_prob += best_lp;
    if (best == kEosId) {
      hyp.finished = true;
      break;
    }
    hyp.tokens.push_back(best);
    hyp.attention_argmax.push_back(detail::argmax_or_none(step.attention, 0));
    state = std::move(step.next);
    prev = best;
  }
  return hyp;
}

/// Beam search with length-normalized final ranking.
///
/// Each step expands all live hypotheses and keeps the `beam_size` best
/// candidates by cumulative log-probability (ties: lower parent, then lower
/// token id). Candidates ending in EOS move to the finished set. Search stops
/// once `beam_size` hypotheses have finished, nothing is live, or `max_len`
/// tokens were emitted; survivors at the limit count as unfinished. The
/// result maximizes Hypothesis::score().
template <StepScorer S>
Hypothesis beam_search(const S& scorer, int beam_size, int max_len) {
  if (beam_size < 1) throw UsageError("beam size must be at least 1");
  struct Candidate {
    double log_prob;
    std::size_t parent;
    TokenId token;
  };
  std::vector<Hypothesis> live(1);
  std::vector<Hypothesis> finished;
  auto state = scorer.initial();
  std::vector<TokenId> prev{kBosId};
  const auto k = static_cast<std::size_t>(beam_size);

  for (int len = 0; len < max_len && !live.empty() && finished.size() < k; ++len) {
    auto step = scorer.step(state, prev);
    std::vector<Candidate> cands;
    cands.reserve(live.size() * static_cast<std::size_t>(step.log_probs.cols()));
    for (std::size_t p = 0; p < live.size(); ++p)
      for (Eigen::Index v = 0; v < step.log_probs.cols(); ++v)
        if (detail::can_emit(static_cast<TokenId>(v)))
          cands.push_back({live[p].log_prob + step.log_probs(static_cast<Eigen::Index>(p), v), p, static_cast<TokenId>(v)});
    const auto keep = std::min(k, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<Hypothesis> next_live;
    std::vector<std::size_t> rows;
    prev.clear();
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& c = cands[i];
      Hypothesis h = live[c.parent];
      h.log_prob = c.log_prob;
      if (c.token == kEosId) {
        h.finished = true;
        finished.push_back(std::move(h));
        continue;
      }
      h.tokens.push_back(c.token);
      h.attention_argmax.push_back(detail::argmax_or_none(step.attention, static_cast<Eigen::Index>(c.parent)));
      next_live.push_back(std::move(h));
      rows.push_back(c.parent);
      prev.push_back(c.token);
    }
    live = std::move(next_live);
    if (!live.empty()) state = scorer.select(step.next, rows);
  }
  for (auto& h : live) finished.push_back(std::move(h));
  if (finished.empty()) return Hypothesis{};
  auto best = std::max_element(finished.begin(), finished.end(),
                               [](const Hypothesis& a, const Hypothesis& b) { return a.score() < b.score(); });
  return *best;
}

/// Log-probability of a fixed token sequence under the scorer (EOS appended
/// when `finished`), in the same normalization as Hypothesis::score().
template <StepScorer S>
Hypothesis score_sequence(const S& scorer, std::span<const TokenId> tokens, bool finished) {
  Hypothesis h;
  auto state = scorer.initial();
  TokenId prev = kBosId;
  const auto steps = tokens.size() + (finished ? 1 : 0);
  for (std::size_t i = 0; i < steps; ++i) {
    auto step = scorer.step(state, std::span<const TokenId>(&prev, 1));
    const TokenId tok = i < tokens.size() ? tokens[i] : kEosId;
    h.log_prob += step.log_probs(0, tok);
    if (i < tokens.size()) h.tokens.push_back(tok);
    state = std::move(step.next);
    prev = tok;
  }
  h.finished = finished;
  return h;
}

/// Decoder of a trained model for one source sequence. The source is encoded
/// once; each step runs on an inference-only graph.
template <typename Scalar>
class ModelScorer {
 public:
  using Tensor = neural::Tensor<Scalar>;

  struct State {
    std::vector<Tensor> h;
    std::vector<Tensor> c;
    Tensor feed;
  };

  ModelScorer(const neural::Model<Scalar>& model, std::span<const TokenId> source) : model_(&model) {
    neural::Graph<Scalar> g(false);
    auto enc = neural::encode_batch(g, model, {std::vector<TokenId>(source.begin(), source.end())}, {});
    for (auto v : enc.states) keys_.push_back(g.value(v));
    for (const auto& s : enc.final) {
      initial_.h.push_back(g.value(s.h));
      initial_.c.push_back(g.value(s.c));
    }
    initial_.feed = Tensor::Zero(1, model.config.hidden_size);
  }

  std::size_t source_length() const { return keys_.size(); }

  State initial() const { return initial_; }

  ScoredStep<State> step(const State& st, std::span<const TokenId> prev) const {
    const auto k = static_cast<neural::Index>(prev.size());
    neural::Graph<Scalar> g(false);
    neural::Encoded<Scalar> enc;
    for (const auto& key : keys_) enc.states.push_back(g.constant(key.replicate(k, 1)));
    enc.mask = Tensor::Ones(k, static_cast<neural::Index>(keys_.size()));
    neural::DecoderState<Scalar> ds;
    for (std::size_t l = 0; l < st.h.size(); ++l) ds.layers.push_back({g.constant(st.h[l]), g.constant(st.c[l])});
    ds.feed = g.constant(st.feed);
    auto out = neural::decoder_step(g, *model_, prev, ds, enc, {});

    ScoredStep<State> result;
    result.log_probs = neural::log_softmax_rows(g.value(out.logits)).template cast<double>();
    result.attention = g.value(out.attention).template cast<double>();
    for (const auto& layer : ds.layers) {
      result.next.h.push_back(g.value(layer.h));
      result.next.c.push_back(g.value(layer.c));
    }
    result.next.feed = g.value(ds.feed);
    return result;
  }

  State select(const State& st, std::span<const std::size_t> rows) const {
    State out;
    auto gather = [&](const Tensor& t) {
      Tensor r(static_cast<neural::Index>(rows.size()), t.cols());
      for (std::size_t i = 0; i < rows.size(); ++i) r.row(static_cast<neural::Index>(i)) = t.row(static_cast<neural::Index>(rows[i]));
      return r;
    };
    for (const auto& t : st.h) out.h.push_back(gather(t));
    for (const auto& t : st.c) out.c.push_back(gather(t));
    out.feed = gather(st.feed);
    return out;
  }

 private:
  const neural::Model<Scalar>* model_;
  std::vector<Tensor> keys_;
  State initial_;
};

/// Decodes one encoded source (BOS ... EOS ids) under `dc`.
template <typename Scalar>
Hypothesis decode_ids(const neural::Model<Scalar>& model, std::span<const TokenId> source, const DecodeConfig& dc) {
  dc.validate();
  ModelScorer<Scalar> scorer(model, source);
  if (dc.mode == DecodeMode::greedy) return greedy_search(scorer, dc.max_output_length);
  return beam_search(scorer, dc.beam_size, dc.max_output_length);
}

struct EmbellishResult {
  Sentence sentence;
  std::vector<std::string> warnings;
};

/// Translates a tokenized (and anonymized) sentence into its embellished form.
template <typename Scalar>
EmbellishResult embellish(const Sentence& s, const neural::Model<Scalar>& model, const Vocabulary& vocab,
                          const DecodeConfig& dc) {
  const auto src = encode(s, vocab);
  const auto hyp = decode_ids(model, src, dc);
  EmbellishResult out;
  for (std::size_t i = 0; i < hyp.tokens.size(); ++i) {
    const auto id = hyp.tokens[i];
    if (id == kUnkId && dc.unk_policy == UnkPolicy::copy_source) {
      // Attention position 0 is BOS; position p maps to source token p - 1.
      const int pos = hyp.attention_argmax[i] - 1;
      if (pos >= 0 && pos < static_cast<int>(s.size())) {
        out.sentence.tokens.push_back(s.tokens[static_cast<std::size_t>(pos)]);
        continue;
      }
    }
    out.sentence.tokens.push_back(vocab.token_of(id));
  }
  if (out.sentence.empty()) out.warnings.push_back("decoder produced an empty sentence");
  return out;
}

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Embellishes every sentence; results keep input order.
template <typename Scalar>
std::vector<EmbellishResult> embellish_all(const std::vector<Sentence>& inputs, const neural::Model<Scalar>& model,
                                           const Vocabulary& vocab, const DecodeConfig& dc, int jobs = 1) {
  std::vector<EmbellishResult> out(inputs.size());
  parallel_for(inputs.size(), jobs, [&](std::size_t i) { out[i] = embellish(inputs[i], model, vocab, dc); });
  return out;
}

}  // namespace embellish::eval
