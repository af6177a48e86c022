#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "embellish/error.hpp"
#include "embellish/neural/tensor.hpp"
#include "embellish/random.hpp"
#include "embellish/textpipe/vocabulary.hpp"

namespace embellish::neural {

struct EmbeddingCoverage {
  std::size_t vocabulary = 0;  // rows in the table
  std::size_t found = 0;       // rows copied from the file
  std::size_t file_lines = 0;

  double ratio() const { return vocabulary ? static_cast<double>(found) / static_cast<double>(vocabulary) : 0.0; }
};

template <typename Scalar>
struct PretrainedEmbeddings {
  Tensor<Scalar> table;  // vocabulary x dim
  EmbeddingCoverage coverage;
};

/// Loads GloVe-style text vectors (`token v1 ... vD` per line). Rows of
/// tokens present in the file are copied verbatim; all other rows (specials,
/// placeholders, unseen words) are drawn from U[-0.1, 0.1].
template <typename Scalar>
PretrainedEmbeddings<Scalar> load_pretrained_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                                                        int dim, std::uint64_t seed) {
  if (dim < 1) throw UsageError("embedding dimension must be positive");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings '" + path.string() + "'");

  PretrainedEmbeddings<Scalar> out;
  out.table.resize(static_cast<Index>(vocab.size()), dim);
  Rng rng(seed);
  fill_uniform(out.table, rng, -0.1, 0.1);
  out.coverage.vocabulary = vocab.size();

  std::vector<char> seen(vocab.size(), 0);
  std::vector<Scalar> row;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    ++out.coverage.file_lines;
    const auto count = fields.size() - 1;
    if (count != static_cast<std::size_t>(dim))
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                      " values, found " + std::to_string(count));
    if (!vocab.contains(fields[0])) continue;
    row.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
      const auto& f = fields[k + 1];
      double v = 0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size())
        throw DataError(path.string() + ": line " + std::to_string(line_no) + ": malformed number '" + f + "'");
      row[k] = static_cast<Scalar>(v);
    }
    const auto id = vocab.id_of(fields[0]);
    if (seen[static_cast<std::size_t>(id)]) continue;  // first occurrence wins
    seen[static_cast<std::size_t>(id)] = 1;
    ++out.coverage.found;
    for (std::size_t k = 0; k < count; ++k) out.table(id, static_cast<Index>(k)) = row[k];
  }
  return out;
}

}  // namespace embellish::neural
