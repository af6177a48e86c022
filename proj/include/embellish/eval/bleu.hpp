#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "embellish/error.hpp"
#include "embellish/textpipe/sentence.hpp"

namespace embellish::eval {

enum class BleuSmoothing {
  none,
  add_one,  // +1 to matches and totals for n >= 2; sentence-level diagnostics only
};

/// Corpus BLEU decomposition.
struct BleuScore {
  double score = 0.0;  // 0..100
  int max_n = 4;
  std::array<double, 4> precisions{};  // p1..p4 as fractions
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  double brevity_penalty = 0.0;
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;

  double length_ratio() const {
    return reference_length ? static_cast<double>(hypothesis_length) / static_cast<double>(reference_length) : 0.0;
  }

  /// `BLEU = 56.02, 80.1/60.2/45.0/35.1 (BP=1.000, ratio=1.010, hyp_len=..., ref_len=...)`
  std::string summary() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "BLEU = %.2f, %.1f/%.1f/%.1f/%.1f (BP=%.3f, ratio=%.3f, hyp_len=%zu, ref_len=%zu)",
                  score, 100 * precisions[0], 100 * precisions[1], 100 * precisions[2], 100 * precisions[3],
                  brevity_penalty, length_ratio(), hypothesis_length, reference_length);
    return buf;
  }
};

namespace detail {

inline std::unordered_map<std::string, std::size_t> ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
  std::unordered_map<std::string, std::size_t> counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
      if (k) key += '\x1f';
      key += toks[i + k];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace detail

/// Corpus-level BLEU against a single reference per segment. Clipped n-gram
/// matches and totals are summed over all segments before taking the
/// geometric mean; BP = 1 if c > r else exp(1 - r/c). Unsmoothed, any zero
/// precision gives 0.
inline BleuScore bleu(std::span<const Sentence> hyps, std::span<const Sentence> refs, int max_n = 4,
                      BleuSmoothing smoothing = BleuSmoothing::none) {
  if (hyps.size() != refs.size())
    throw DataError("BLEU needs one reference per hypothesis: " + std::to_string(hyps.size()) + " vs " +
                    std::to_string(refs.size()));
  if (hyps.empty()) throw DataError("BLEU of an empty corpus is undefined");
  if (max_n < 1 || max_n > 4) throw UsageError("BLEU order must be between 1 and 4");

  BleuScore s;
  s.max_n = max_n;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    s.hypothesis_length += hyps[i].size();
    s.reference_length += refs[i].size();
    for (int n = 1; n <= max_n; ++n) {
      const auto h = detail::ngram_counts(hyps[i].tokens, static_cast<std::size_t>(n));
      const auto r = detail::ngram_counts(refs[i].tokens, static_cast<std::size_t>(n));
      for (const auto& [gram, count] : h) {
        s.totals[n - 1] += count;
        if (auto it = r.find(gram); it != r.end()) s.matches[n - 1] += std::min(count, it->second);
      }
    }
  }

  double log_sum = 0.0;
  bool zero = false;
  for (int n = 1; n <= max_n; ++n) {
    double m = static_cast<double>(s.matches[n - 1]);
    double t = static_cast<double>(s.totals[n - 1]);
    if (smoothing == BleuSmoothing::add_one && n > 1) {
      m += 1;
      t += 1;
    }
    s.precisions[n - 1] = t > 0 ? m / t : 0.0;
    if (s.precisions[n - 1] <= 0.0)
      zero = true;
    else
      log_sum += std::log(s.precisions[n - 1]);
  }

  const double c = static_cast<double>(s.hypothesis_length);
  const double r = static_cast<double>(s.reference_length);
  s.brevity_penalty = c > r ? 1.0 : (c > 0 ? std::exp(1.0 - r / c) : 0.0);
  s.score = zero ? 0.0 : 100.0 * s.brevity_penalty * std::exp(log_sum / max_n);
  return s;
}

/// Sentence-level BLEU of one pair.
inline BleuScore sentence_bleu(const Sentence& hyp, const Sentence& ref, BleuSmoothing smoothing = BleuSmoothing::add_one) {
  return bleu(std::span<const Sentence>(&hyp, 1), std::span<const Sentence>(&ref, 1), 4, smoothing);
}

}  // namespace embellish::eval
