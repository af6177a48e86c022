#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "embellish/error.hpp"
#include "embellish/io.hpp"
#include "embellish/random.hpp"
#include "embellish/textpipe/sentence.hpp"

namespace embellish {

/// Aligned simple (source) to complex (target) sentence pairs.
struct ParallelCorpus {
  std::vector<Sentence> source;
  std::vector<Sentence> target;

  std::size_t size() const noexcept { return source.size(); }
  bool empty() const noexcept { return source.empty(); }

  void push_back(Sentence src, Sentence tgt) {
    source.push_back(std::move(src));
    target.push_back(std::move(tgt));
  }
};

/// Reads a tokenized one-sentence-per-line file. Empty lines are rejected.
inline std::vector<Sentence> load_sentences(const std::filesystem::path& path) {
  std::vector<Sentence> out;
  const auto lines = io::read_lines(path);
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto s = from_line(lines[i]);
    if (s.empty()) throw DataError(path.string() + ":" + std::to_string(i + 1) + ": empty line");
    out.push_back(std::move(s));
  }
  return out;
}

inline void save_sentences(const std::filesystem::path& path, const std::vector<Sentence>& sents) {
  std::vector<std::string> lines;
  lines.reserve(sents.size());
  for (const auto& s : sents) lines.push_back(to_line(s));
  io::write_lines(path, lines);
}

inline ParallelCorpus load_parallel(const std::filesystem::path& src_path, const std::filesystem::path& tgt_path) {
  ParallelCorpus c;
  c.source = load_sentences(src_path);
  c.target = load_sentences(tgt_path);
  if (c.source.size() != c.target.size())
    throw DataError("parallel corpus is misaligned: " + std::to_string(c.source.size()) + " vs " +
                    std::to_string(c.target.size()) + " lines (" + src_path.string() + ", " + tgt_path.string() +
                    ")");
  return c;
}

inline void save_parallel(const std::filesystem::path& src_path, const std::filesystem::path& tgt_path,
                          const ParallelCorpus& c) {
  save_sentences(src_path, c.source);
  save_sentences(tgt_path, c.target);
}

inline ParallelCorpus select(const ParallelCorpus& c, std::span<const std::size_t> indices) {
  ParallelCorpus out;
  out.source.reserve(indices.size());
  out.target.reserve(indices.size());
  for (auto i : indices) out.push_back(c.source[i], c.target[i]);
  return out;
}

struct DatasetSplit {
  ParallelCorpus train;
  ParallelCorpus valid;
  ParallelCorpus test;
  std::uint64_t seed = 0;
};

/// Seeded shuffle followed by a contiguous partition. Every part receives at
/// least one pair.
inline DatasetSplit split_dataset(const ParallelCorpus& c, std::array<double, 3> fractions, std::uint64_t seed) {
  for (double f : fractions)
    if (!(f > 0.0)) throw UsageError("split fractions must be positive");
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
    throw UsageError("split fractions must sum to 1");
  const std::size_t n = c.size();
  if (n < 3) throw DataError("cannot split a corpus of " + std::to_string(n) + " pairs into three parts");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(order, rng);

  auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
  auto n_valid = static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 2);
  n_valid = std::clamp<std::size_t>(n_valid, 1, n - n_train - 1);

  DatasetSplit split;
  split.seed = seed;
  const std::span<const std::size_t> all(order);
  split.train = select(c, all.subspan(0, n_train));
  split.valid = select(c, all.subspan(n_train, n_valid));
  split.test = select(c, all.subspan(n_train + n_valid));
  return split;
}

/// Seeded sample of `n` pairs without replacement, in corpus order.
inline ParallelCorpus subsample(const ParallelCorpus& c, std::size_t n, std::uint64_t seed) {
  if (n >= c.size()) return c;
  std::vector<std::size_t> order(c.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(order, rng);
  order.resize(n);
  std::sort(order.begin(), order.end());
  return select(c, order);
}

}  // namespace embellish
