#pragma once

#include <Eigen/Core>
#include <string>
#include <type_traits>

#include "embellish/error.hpp"
#include "embellish/random.hpp"

namespace embellish::neural {

using Index = Eigen::Index;

/// Dense row-major 2-D tensor. Vectors are 1 x n rows; a batch of vectors is
/// one row per item.
template <typename Scalar>
using Tensor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
concept Floating = std::is_same_v<Scalar, float> || std::is_same_v<Scalar, double>;

template <typename Scalar>
bool all_finite(const Tensor<Scalar>& t) {
  return t.allFinite();
}

inline std::string shape_string(Index rows, Index cols) {
  return "(" + std::to_string(rows) + ", " + std::to_string(cols) + ")";
}

template <typename Scalar>
std::string shape_string(const Tensor<Scalar>& t) {
  return shape_string(t.rows(), t.cols());
}

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw NumericError("shape mismatch: " + what);
}

/// Trainable tensor with its gradient buffer. The gradient is scratch space
/// written by backward passes, hence mutable.
template <typename Scalar>
struct Parameter {
  std::string name;
  Tensor<Scalar> value;
  mutable Tensor<Scalar> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Index rows, Index cols)
      : name(std::move(n)), value(Tensor<Scalar>::Zero(rows, cols)), grad(Tensor<Scalar>::Zero(rows, cols)) {}

  Index size() const { return value.size(); }
  void zero_grad() const { grad.setZero(); }
};

template <typename Scalar>
void fill_uniform(Tensor<Scalar>& t, Rng& rng, double lo, double hi) {
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<Scalar>(uniform(rng, lo, hi));
}

/// Inverted dropout on a plain tensor: entries are zeroed with probability
/// `rate` and survivors scaled by 1/(1-rate). Identity when not training.
template <typename Scalar>
Tensor<Scalar> dropout(const Tensor<Scalar>& t, double rate, Rng& rng, bool train) {
  if (rate < 0.0 || rate >= 1.0) throw UsageError("dropout rate must lie in [0, 1)");
  if (!train || rate == 0.0) return t;
  const auto keep_scale = static_cast<Scalar>(1.0 / (1.0 - rate));
  Tensor<Scalar> out(t.rows(), t.cols());
  for (Index i = 0; i < t.size(); ++i) out.data()[i] = uniform01(rng) < rate ? Scalar(0) : t.data()[i] * keep_scale;
  return out;
}

/// Row-wise log-softmax, computed stably.
template <typename Scalar>
Tensor<Scalar> log_softmax_rows(const Tensor<Scalar>& logits) {
  Tensor<Scalar> out(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    const Scalar mx = logits.row(r).maxCoeff();
    const Scalar lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> softmax_rows(const Tensor<Scalar>& logits) {
  return log_softmax_rows(logits).array().exp().matrix();
}

}  // namespace embellish::neural
