#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "embellish/error.hpp"
#include "embellish/neural/graph.hpp"
#include "embellish/neural/tensor.hpp"
#include "embellish/random.hpp"
#include "embellish/textpipe/vocabulary.hpp"

namespace embellish::neural {

enum class AttentionScore { dot, general };

inline std::string_view to_string(AttentionScore s) { return s == AttentionScore::dot ? "dot" : "general"; }

inline std::optional<AttentionScore> parse_attention_score(std::string_view s) {
  if (s == "dot") return AttentionScore::dot;
  if (s == "general") return AttentionScore::general;
  return std::nullopt;
}

struct ModelConfig {
  int num_layers = 2;
  int hidden_size = 512;
  int embedding_size = 300;
  int vocab_size = 50000;
  double dropout = 0.2;
  AttentionScore attention = AttentionScore::general;
  bool fine_tune_embeddings = true;

  void validate() const {
    if (num_layers < 1 || hidden_size < 1 || embedding_size < 1 || vocab_size < static_cast<int>(kNumSpecials))
      throw UsageError("model sizes must be positive and the vocabulary must hold the special tokens");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout rate must lie in [0, 1)");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Input-to-hidden, hidden-to-hidden and bias blocks of one LSTM layer.
/// Gate columns are laid out [input | forget | output | candidate].
template <typename Scalar>
struct LstmLayer {
  Parameter<Scalar> input_weight;
  Parameter<Scalar> recurrent_weight;
  Parameter<Scalar> bias;
};

/// Stacked LSTM encoder-decoder with Luong attention and input feeding.
/// Source and target share one embedding table.
template <typename Scalar>
struct Model {
  ModelConfig config;
  Parameter<Scalar> embedding;
  std::vector<LstmLayer<Scalar>> encoder;
  std::vector<LstmLayer<Scalar>> decoder;
  Parameter<Scalar> attention_weight;  // hidden x hidden; general scoring only
  Parameter<Scalar> combine_weight;    // 2*hidden x hidden
  Parameter<Scalar> output_weight;     // hidden x vocab
  Parameter<Scalar> output_bias;       // 1 x vocab

  std::vector<Parameter<Scalar>*> parameters() {
    std::vector<Parameter<Scalar>*> out;
    for (const auto* p : std::as_const(*this).parameters()) out.push_back(const_cast<Parameter<Scalar>*>(p));
    return out;
  }

  std::vector<const Parameter<Scalar>*> parameters() const {
    std::vector<const Parameter<Scalar>*> out{&embedding};
    for (const auto* stack : {&encoder, &decoder})
      for (const auto& layer : *stack) {
        out.push_back(&layer.input_weight);
        out.push_back(&layer.recurrent_weight);
        out.push_back(&layer.bias);
      }
    if (config.attention == AttentionScore::general) out.push_back(&attention_weight);
    out.push_back(&combine_weight);
    out.push_back(&output_weight);
    out.push_back(&output_bias);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += static_cast<std::size_t>(p->size());
    return n;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }
};

namespace detail {

template <typename Scalar>
LstmLayer<Scalar> make_lstm_layer(const std::string& prefix, int input, int hidden) {
  return {Parameter<Scalar>(prefix + ".input_weight", input, 4 * hidden),
          Parameter<Scalar>(prefix + ".recurrent_weight", hidden, 4 * hidden),
          Parameter<Scalar>(prefix + ".bias", 1, 4 * hidden)};
}

}  // namespace detail

/// Allocates every parameter and draws each entry i.i.d. from U[-0.1, 0.1].
template <typename Scalar>
Model<Scalar> init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model<Scalar> m;
  m.config = cfg;
  const int h = cfg.hidden_size;
  m.embedding = Parameter<Scalar>("embedding", cfg.vocab_size, cfg.embedding_size);
  m.embedding.trainable = cfg.fine_tune_embeddings;
  for (int l = 0; l < cfg.num_layers; ++l) {
    m.encoder.push_back(detail::make_lstm_layer<Scalar>("encoder." + std::to_string(l), l == 0 ? cfg.embedding_size : h, h));
  }
  for (int l = 0; l < cfg.num_layers; ++l) {
    const int input = l == 0 ? cfg.embedding_size + h : h;
    m.decoder.push_back(detail::make_lstm_layer<Scalar>("decoder." + std::to_string(l), input, h));
  }
  if (cfg.attention == AttentionScore::general) m.attention_weight = Parameter<Scalar>("attention_weight", h, h);
  m.combine_weight = Parameter<Scalar>("combine_weight", 2 * h, h);
  m.output_weight = Parameter<Scalar>("output_weight", h, cfg.vocab_size);
  m.output_bias = Parameter<Scalar>("output_bias", 1, cfg.vocab_size);

  Rng rng(seed);
  for (auto* p : m.parameters()) fill_uniform(p->value, rng, -0.1, 0.1);
  return m;
}

/// Dropout settings for one forward pass. Inactive without an engine.
struct DropoutContext {
  double rate = 0.0;
  Rng* rng = nullptr;

  bool active() const noexcept { return rng != nullptr && rate > 0.0; }
};

template <typename Scalar>
Var maybe_dropout(Graph<Scalar>& g, Var x, const DropoutContext& d) {
  return d.active() ? g.dropout(x, d.rate, *d.rng) : x;
}

struct LstmState {
  Var h;
  Var c;
};

/// One LSTM step: gates = x W + h U + b; c' = f*c + i*g; h' = o*tanh(c').
template <typename Scalar>
LstmState lstm_cell(Graph<Scalar>& g, Var x, LstmState prev, const LstmLayer<Scalar>& layer) {
  const auto& w = layer.input_weight.value;
  require_shape(g.cols(x) == w.rows(), "lstm input width " + std::to_string(g.cols(x)) + " vs weight rows " +
                                           std::to_string(w.rows()));
  require_shape(g.cols(prev.h) == layer.recurrent_weight.value.rows() && g.rows(prev.h) == g.rows(x),
                "lstm hidden state " + shape_string(g.rows(prev.h), g.cols(prev.h)));
  require_shape(g.rows(prev.c) == g.rows(prev.h) && g.cols(prev.c) == g.cols(prev.h), "lstm cell state");
  Var gates = g.add(g.matmul(x, g.parameter(layer.input_weight)), g.matmul(prev.h, g.parameter(layer.recurrent_weight)));
  gates = g.add_bias(gates, g.parameter(layer.bias));
  Var c = g.lstm_memory(gates, prev.c);
  Var h = g.lstm_output(gates, c);
  return {h, c};
}

struct AttentionOutput {
  Var context;
  Var weights;
  Var attentional;
};

/// Luong attention. score_t = q . enc_t with q = h W_a (general) or q = h
/// (dot); weights = masked softmax of the scores; context = sum_t w_t enc_t;
/// attentional = tanh([context; h] W_c).
template <typename Scalar>
AttentionOutput luong_attention(Graph<Scalar>& g, Var h_dec, std::span<const Var> keys, const Tensor<Scalar>& mask,
                                std::optional<Var> score_weight, Var combine_weight) {
  Var query = score_weight ? g.matmul(h_dec, *score_weight) : h_dec;
  Var weights = g.masked_softmax(g.attention_scores(query, keys), mask);
  Var context = g.weighted_sum(weights, keys);
  Var attentional = g.tanh(g.matmul(g.concat_cols({context, h_dec}), combine_weight));
  return {context, weights, attentional};
}

/// Encoder output for a batch: top-layer state per source position, the
/// final (h, c) of every layer at each item's true length, and the B x T
/// source mask (1 = real token).
template <typename Scalar>
struct Encoded {
  std::vector<Var> states;
  std::vector<LstmState> final;
  Tensor<Scalar> mask;
};

/// Runs the stacked encoder left to right over right-padded sources.
template <typename Scalar>
Encoded<Scalar> encode_batch(Graph<Scalar>& g, const Model<Scalar>& m,
                             const std::vector<std::vector<TokenId>>& sources, const DropoutContext& drop) {
  if (sources.empty()) throw DataError("empty source batch");
  const auto batch = static_cast<Index>(sources.size());
  std::size_t max_len = 0;
  for (const auto& s : sources) {
    if (s.empty()) throw DataError("empty source sequence");
    max_len = std::max(max_len, s.size());
  }
  const int hidden = m.config.hidden_size;
  Encoded<Scalar> out;
  out.mask = Tensor<Scalar>::Zero(batch, static_cast<Index>(max_len));
  std::vector<LstmState> state(m.encoder.size(), LstmState{g.constant(Tensor<Scalar>::Zero(batch, hidden)),
                                                           g.constant(Tensor<Scalar>::Zero(batch, hidden))});
  std::vector<TokenId> ids(sources.size());
  std::vector<char> live(sources.size());
  for (std::size_t t = 0; t < max_len; ++t) {
    bool all_live = true;
    for (std::size_t b = 0; b < sources.size(); ++b) {
      live[b] = t < sources[b].size();
      all_live = all_live && live[b];
      ids[b] = live[b] ? sources[b][t] : kPadId;
      if (live[b]) out.mask(static_cast<Index>(b), static_cast<Index>(t)) = Scalar(1);
    }
    Var x = maybe_dropout(g, g.lookup(m.embedding, ids), drop);
    for (std::size_t l = 0; l < m.encoder.size(); ++l) {
      if (l > 0) x = maybe_dropout(g, x, drop);
      auto next = lstm_cell(g, x, state[l], m.encoder[l]);
      if (!all_live) {
        next.h = g.select_rows(next.h, state[l].h, live);
        next.c = g.select_rows(next.c, state[l].c, live);
      }
      state[l] = next;
      x = next.h;
    }
    out.states.push_back(x);
  }
  out.final = std::move(state);
  return out;
}

template <typename Scalar>
struct DecoderState {
  std::vector<LstmState> layers;
  Var feed;  // previous attentional vector
};

/// Decoder starts from the encoder's final states with a zero feed vector.
template <typename Scalar>
DecoderState<Scalar> initial_decoder_state(Graph<Scalar>& g, const Model<Scalar>& m, const Encoded<Scalar>& enc) {
  DecoderState<Scalar> st;
  st.layers = enc.final;
  st.feed = g.constant(Tensor<Scalar>::Zero(enc.mask.rows(), m.config.hidden_size));
  return st;
}

struct StepOutput {
  Var logits;
  Var attention;
};

/// One decoder step: [embed(prev); feed] through the stacked decoder,
/// attention over the encoder states, projection to vocabulary logits.
template <typename Scalar>
StepOutput decoder_step(Graph<Scalar>& g, const Model<Scalar>& m, std::span<const TokenId> prev,
                        DecoderState<Scalar>& st, const Encoded<Scalar>& enc, const DropoutContext& drop) {
  require_shape(static_cast<Index>(prev.size()) == enc.mask.rows(), "decoder batch size");
  require_shape(st.layers.size() == m.decoder.size(), "decoder layer count");
  Var emb = maybe_dropout(g, g.lookup(m.embedding, prev), drop);
  Var x = g.concat_cols({emb, st.feed});
  for (std::size_t l = 0; l < m.decoder.size(); ++l) {
    if (l > 0) x = maybe_dropout(g, x, drop);
    st.layers[l] = lstm_cell(g, x, st.layers[l], m.decoder[l]);
    x = st.layers[l].h;
  }
  std::optional<Var> score_weight;
  if (m.config.attention == AttentionScore::general) score_weight = g.parameter(m.attention_weight);
  auto att = luong_attention(g, x, enc.states, enc.mask, score_weight, g.parameter(m.combine_weight));
  st.feed = att.attentional;
  Var logits = g.add_bias(g.matmul(att.attentional, g.parameter(m.output_weight)), g.parameter(m.output_bias));
  return {logits, att.weights};
}

struct LossResult {
  Var loss;               // mean negative log-likelihood per target token
  std::size_t tokens = 0;
  std::size_t correct = 0;  // argmax predictions equal to gold
};

/// Teacher-forced loss. Targets are encoded sequences (BOS ... EOS); the
/// decoder reads target[t] and is scored on target[t + 1]. Padding is masked.
template <typename Scalar>
LossResult forward_loss(Graph<Scalar>& g, const Model<Scalar>& m, const std::vector<std::vector<TokenId>>& sources,
                        const std::vector<std::vector<TokenId>>& targets, const DropoutContext& drop) {
  require_shape(sources.size() == targets.size(), "source/target batch sizes differ");
  std::size_t max_tgt = 0;
  for (const auto& t : targets) {
    if (t.size() < 2) throw DataError("target sequence needs at least BOS and one token");
    max_tgt = std::max(max_tgt, t.size());
  }
  auto enc = encode_batch(g, m, sources, drop);
  auto st = initial_decoder_state(g, m, enc);
  LossResult result;
  std::vector<Var> step_losses;
  std::vector<TokenId> prev(sources.size()), gold(sources.size());
  for (std::size_t t = 0; t + 1 < max_tgt; ++t) {
    for (std::size_t b = 0; b < targets.size(); ++b) {
      const bool live = t + 1 < targets[b].size();
      prev[b] = live ? targets[b][t] : kPadId;
      gold[b] = live ? targets[b][t + 1] : kPadId;
    }
    auto out = decoder_step(g, m, prev, st, enc, drop);
    step_losses.push_back(g.cross_entropy(out.logits, gold));
    const auto& z = g.value(out.logits);
    for (std::size_t b = 0; b < gold.size(); ++b) {
      if (gold[b] == kPadId) continue;
      Index best;
      z.row(static_cast<Index>(b)).maxCoeff(&best);
      ++result.tokens;
      if (best == gold[b]) ++result.correct;
    }
  }
  result.loss = g.scale(g.sum(step_losses), Scalar(1) / static_cast<Scalar>(result.tokens));
  return result;
}

/// Top-layer encoder states of one sequence as a T x hidden tensor.
template <typename Scalar>
Tensor<Scalar> encode_sequence(const Model<Scalar>& m, std::span<const TokenId> ids, bool train, Rng* rng = nullptr) {
  if (ids.empty()) throw DataError("encode_sequence needs a non-empty input");
  Graph<Scalar> g(false);
  DropoutContext drop{train ? m.config.dropout : 0.0, train ? rng : nullptr};
  auto enc = encode_batch(g, m, {std::vector<TokenId>(ids.begin(), ids.end())}, drop);
  Tensor<Scalar> out(static_cast<Index>(ids.size()), m.config.hidden_size);
  for (std::size_t t = 0; t < enc.states.size(); ++t) out.row(static_cast<Index>(t)) = g.value(enc.states[t]).row(0);
  return out;
}

/// Mean per-token loss of a single pair, no gradients.
template <typename Scalar>
double sequence_loss(const Model<Scalar>& m, std::span<const TokenId> src, std::span<const TokenId> tgt) {
  Graph<Scalar> g(false);
  auto r = forward_loss(g, m, {std::vector<TokenId>(src.begin(), src.end())}, {std::vector<TokenId>(tgt.begin(), tgt.end())},
                        DropoutContext{});
  return static_cast<double>(g.value(r.loss)(0, 0));
}

}  // namespace embellish::neural
