#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "embellish/error.hpp"
#include "embellish/neural/tensor.hpp"
#include "embellish/textpipe/vocabulary.hpp"

namespace embellish::neural {

/// Handle to a value recorded in a Graph.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const noexcept { return id != UINT32_MAX; }
};

/// Reverse-mode differentiation tape over dense matrices.
///
/// Every operation evaluates eagerly and, when recording, appends a closure
/// that propagates the output gradient to its inputs. Nodes are stored in
/// creation order, which is a topological order, so backward() walks them in
/// reverse. Parameter leaves accumulate straight into Parameter::grad.
///
/// A graph supports a single backward pass; build a new graph per forward.
template <typename Scalar>
class Graph {
 public:
  using Matrix = Tensor<Scalar>;

  explicit Graph(bool record = true) : record_(record) { nodes_.reserve(256); }

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  const Matrix& value(Var v) const {
    const auto& n = nodes_.at(v.id);
    return n.external ? *n.external : n.value;
  }
  Index rows(Var v) const { return value(v).rows(); }
  Index cols(Var v) const { return value(v).cols(); }

  /// Gradient accumulated so far for an intermediate node (empty if none).
  const Matrix& grad(Var v) const { return nodes_.at(v.id).grad; }

  Var constant(Matrix m) { return push(std::move(m), false); }

  /// Leaf bound to a parameter. Repeated calls return the same node.
  Var parameter(const Parameter<Scalar>& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return it->second;
    Node n;
    n.external = &p.value;
    n.param = &p;
    n.requires_grad = record_ && p.trainable;
    nodes_.push_back(std::move(n));
    Var v{static_cast<std::uint32_t>(nodes_.size() - 1)};
    param_nodes_.emplace(&p, v);
    return v;
  }

  /// Gathers rows of an embedding table; gradients scatter-add into the rows used.
  Var lookup(const Parameter<Scalar>& table, std::span<const TokenId> ids) {
    const Index dim = table.value.cols();
    Matrix out(static_cast<Index>(ids.size()), dim);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= table.value.rows())
        throw DataError("token id " + std::to_string(ids[i]) + " outside embedding table of " +
                        std::to_string(table.value.rows()) + " rows");
      out.row(static_cast<Index>(i)) = table.value.row(ids[i]);
    }
    const bool req = record_ && table.trainable;
    Var v = push(std::move(out), req);
    if (req) {
      std::vector<TokenId> saved(ids.begin(), ids.end());
      const auto* param = &table;
      nodes_[v.id].backward = [this, v, param, saved = std::move(saved)] {
        const Matrix& g = nodes_[v.id].grad;
        for (std::size_t i = 0; i < saved.size(); ++i) param->grad.row(saved[i]) += g.row(static_cast<Index>(i));
      };
    }
    return v;
  }

  Var matmul(Var a, Var b) {
    require_shape(cols(a) == rows(b), "matmul " + shape_string(rows(a), cols(a)) + " x " +
                                          shape_string(rows(b), cols(b)));
    Matrix out(rows(a), cols(b));
    out.noalias() = value(a) * value(b);
    return op(std::move(out), {a, b}, [this, a, b](const Matrix& g) {
      if (needs(a)) grad_ref(a).noalias() += g * value(b).transpose();
      if (needs(b)) grad_ref(b).noalias() += value(a).transpose() * g;
    });
  }

  Var add(Var a, Var b) {
    require_same(a, b, "add");
    return op(value(a) + value(b), {a, b}, [this, a, b](const Matrix& g) {
      if (needs(a)) grad_ref(a) += g;
      if (needs(b)) grad_ref(b) += g;
    });
  }

  /// a (B x N) plus a 1 x N bias broadcast over rows.
  Var add_bias(Var a, Var bias) {
    require_shape(rows(bias) == 1 && cols(bias) == cols(a),
                  "add_bias " + shape_string(rows(a), cols(a)) + " + " + shape_string(rows(bias), cols(bias)));
    Matrix out = value(a).rowwise() + value(bias).row(0);
    return op(std::move(out), {a, bias}, [this, a, bias](const Matrix& g) {
      if (needs(a)) grad_ref(a) += g;
      if (needs(bias)) grad_ref(bias) += g.colwise().sum();
    });
  }

  /// Elementwise product.
  Var mul(Var a, Var b) {
    require_same(a, b, "mul");
    return op(value(a).cwiseProduct(value(b)), {a, b}, [this, a, b](const Matrix& g) {
      if (needs(a)) grad_ref(a) += g.cwiseProduct(value(b));
      if (needs(b)) grad_ref(b) += g.cwiseProduct(value(a));
    });
  }

  /// Elementwise product with a constant mask (dropout).
  Var mul_const(Var a, Matrix mask) {
    require_shape(mask.rows() == rows(a) && mask.cols() == cols(a), "mul_const");
    Matrix out = value(a).cwiseProduct(mask);
    return op(std::move(out), {a}, [this, a, mask = std::move(mask)](const Matrix& g) {
      grad_ref(a) += g.cwiseProduct(mask);
    });
  }

  Var scale(Var a, Scalar s) {
    return op(value(a) * s, {a}, [this, a, s](const Matrix& g) { grad_ref(a) += g * s; });
  }

  Var sigmoid(Var a) {
    Matrix out = value(a).unaryExpr([](Scalar x) { return sigmoid_scalar(x); });
    Var v = op(std::move(out), {a}, nullptr);
    set_backward(v, [this, a, v](const Matrix& g) {
      const auto& y = value(v).array();
      grad_ref(a).array() += g.array() * y * (Scalar(1) - y);
    });
    return v;
  }

  Var tanh(Var a) {
    Var v = op(value(a).array().tanh().matrix(), {a}, nullptr);
    set_backward(v, [this, a, v](const Matrix& g) {
      const auto& y = value(v).array();
      grad_ref(a).array() += g.array() * (Scalar(1) - y.square());
    });
    return v;
  }

  Var concat_cols(std::initializer_list<Var> parts) { return concat_cols(std::span<const Var>(parts.begin(), parts.size())); }

  Var concat_cols(std::span<const Var> parts) {
    require_shape(!parts.empty(), "concat of nothing");
    const Index r = rows(parts[0]);
    Index total = 0;
    for (auto p : parts) {
      require_shape(rows(p) == r, "concat_cols row count");
      total += cols(p);
    }
    Matrix out(r, total);
    Index at = 0;
    for (auto p : parts) {
      out.middleCols(at, cols(p)) = value(p);
      at += cols(p);
    }
    std::vector<Var> saved(parts.begin(), parts.end());
    return op(std::move(out), parts, [this, saved](const Matrix& g) {
      Index at = 0;
      for (auto p : saved) {
        if (needs(p)) grad_ref(p) += g.middleCols(at, cols(p));
        at += cols(p);
      }
    });
  }

  Var slice_cols(Var a, Index start, Index count) {
    require_shape(start >= 0 && count >= 0 && start + count <= cols(a), "slice_cols out of range");
    return op(value(a).middleCols(start, count), {a}, [this, a, start, count](const Matrix& g) {
      grad_ref(a).middleCols(start, count) += g;
    });
  }

  /// Row-wise choice: row r comes from `a` when take_a[r], otherwise from `b`.
  Var select_rows(Var a, Var b, std::vector<char> take_a) {
    require_same(a, b, "select_rows");
    require_shape(static_cast<Index>(take_a.size()) == rows(a), "select_rows mask length");
    Matrix out = value(b);
    for (Index r = 0; r < out.rows(); ++r)
      if (take_a[static_cast<std::size_t>(r)]) out.row(r) = value(a).row(r);
    return op(std::move(out), {a, b}, [this, a, b, take_a = std::move(take_a)](const Matrix& g) {
      for (Index r = 0; r < g.rows(); ++r) {
        const Var dst = take_a[static_cast<std::size_t>(r)] ? a : b;
        if (needs(dst)) grad_ref(dst).row(r) += g.row(r);
      }
    });
  }

  /// LSTM memory update from pre-activation gates laid out [i | f | o | g]:
  /// c' = sigmoid(f) * c + sigmoid(i) * tanh(g).
  Var lstm_memory(Var gates, Var cell) {
    const Index h = cols(cell);
    require_shape(cols(gates) == 4 * h && rows(gates) == rows(cell), "lstm_memory gates " +
                                                                          shape_string(rows(gates), cols(gates)) +
                                                                          " vs cell " + shape_string(rows(cell), h));
    const auto& z = value(gates);
    Matrix i = z.middleCols(0, h).unaryExpr([](Scalar x) { return sigmoid_scalar(x); });
    Matrix f = z.middleCols(h, h).unaryExpr([](Scalar x) { return sigmoid_scalar(x); });
    Matrix gg = z.middleCols(3 * h, h).array().tanh().matrix();
    Matrix out = f.cwiseProduct(value(cell)) + i.cwiseProduct(gg);
    return op(std::move(out), {gates, cell}, [this, gates, cell, h](const Matrix& g) {
      const auto& z = value(gates);
      const Matrix i = z.middleCols(0, h).unaryExpr([](Scalar x) { return sigmoid_scalar(x); });
      const Matrix f = z.middleCols(h, h).unaryExpr([](Scalar x) { return sigmoid_scalar(x); });
      const Matrix gg = z.middleCols(3 * h, h).array().tanh().matrix();
      if (needs(cell)) grad_ref(cell) += g.cwiseProduct(f);
      if (needs(gates)) {
        auto& dz = grad_ref(gates);
        dz.middleCols(0, h).array() += g.array() * gg.array() * i.array() * (Scalar(1) - i.array());
        dz.middleCols(h, h).array() += g.array() * value(cell).array() * f.array() * (Scalar(1) - f.array());
        dz.middleCols(3 * h, h).array() += g.array() * i.array() * (Scalar(1) - gg.array().square());
      }
    });
  }

  /// LSTM output h' = sigmoid(o) * tanh(c').
  Var lstm_output(Var gates, Var cell) {
    const Index h = cols(cell);
    require_shape(cols(gates) == 4 * h && rows(gates) == rows(cell), "lstm_output");
    const Matrix o = value(gates).middleCols(2 * h, h).unaryExpr([](Scalar x) { return sigmoid_scalar(x); });
    Matrix out = o.cwiseProduct(value(cell).array().tanh().matrix());
    return op(std::move(out), {gates, cell}, [this, gates, cell, h](const Matrix& g) {
      const Matrix o = value(gates).middleCols(2 * h, h).unaryExpr([](Scalar x) { return sigmoid_scalar(x); });
      const Matrix tc = value(cell).array().tanh().matrix();
      if (needs(gates))
        grad_ref(gates).middleCols(2 * h, h).array() += g.array() * tc.array() * o.array() * (Scalar(1) - o.array());
      if (needs(cell)) grad_ref(cell).array() += g.array() * o.array() * (Scalar(1) - tc.array().square());
    });
  }

  /// scores(b, t) = query(b) . keys[t](b); one key matrix (B x H) per position.
  Var attention_scores(Var query, std::span<const Var> keys) {
    const Index b = rows(query);
    Matrix out(b, static_cast<Index>(keys.size()));
    for (std::size_t t = 0; t < keys.size(); ++t) {
      require_shape(rows(keys[t]) == b && cols(keys[t]) == cols(query), "attention key shape");
      out.col(static_cast<Index>(t)) = value(keys[t]).cwiseProduct(value(query)).rowwise().sum();
    }
    std::vector<Var> saved(keys.begin(), keys.end());
    std::vector<Var> inputs = saved;
    inputs.push_back(query);
    return op(std::move(out), inputs, [this, query, saved](const Matrix& g) {
      for (std::size_t t = 0; t < saved.size(); ++t) {
        const auto col = g.col(static_cast<Index>(t));
        if (needs(query)) grad_ref(query) += (value(saved[t]).array().colwise() * col.array()).matrix();
        if (needs(saved[t])) grad_ref(saved[t]) += (value(query).array().colwise() * col.array()).matrix();
      }
    });
  }

  /// Row-wise softmax restricted to entries where mask == 1; masked entries are 0.
  Var masked_softmax(Var scores, const Matrix& mask) {
    require_shape(mask.rows() == rows(scores) && mask.cols() == cols(scores), "masked_softmax mask");
    const auto& s = value(scores);
    Matrix out = Matrix::Zero(s.rows(), s.cols());
    for (Index r = 0; r < s.rows(); ++r) {
      Scalar mx = -std::numeric_limits<Scalar>::infinity();
      for (Index c = 0; c < s.cols(); ++c)
        if (mask(r, c) != Scalar(0)) mx = std::max(mx, s(r, c));
      require_shape(std::isfinite(mx), "masked_softmax row " + std::to_string(r) + " has no valid entry");
      Scalar sum = 0;
      for (Index c = 0; c < s.cols(); ++c)
        if (mask(r, c) != Scalar(0)) sum += out(r, c) = std::exp(s(r, c) - mx);
      out.row(r) /= sum;
    }
    Var v = op(std::move(out), {scores}, nullptr);
    set_backward(v, [this, scores, v](const Matrix& g) {
      const auto& y = value(v);
      const auto dot = g.cwiseProduct(y).rowwise().sum();
      grad_ref(scores) += (y.array() * (g.colwise() - dot).array()).matrix();
    });
    return v;
  }

  /// out(b) = sum_t weights(b, t) * values[t](b).
  Var weighted_sum(Var weights, std::span<const Var> values) {
    require_shape(cols(weights) == static_cast<Index>(values.size()) && !values.empty(), "weighted_sum arity");
    Matrix out = Matrix::Zero(rows(weights), cols(values[0]));
    for (std::size_t t = 0; t < values.size(); ++t) {
      require_shape(rows(values[t]) == rows(weights) && cols(values[t]) == out.cols(), "weighted_sum value shape");
      out += (value(values[t]).array().colwise() * value(weights).col(static_cast<Index>(t)).array()).matrix();
    }
    std::vector<Var> saved(values.begin(), values.end());
    std::vector<Var> inputs = saved;
    inputs.push_back(weights);
    return op(std::move(out), inputs, [this, weights, saved](const Matrix& g) {
      for (std::size_t t = 0; t < saved.size(); ++t) {
        const auto ti = static_cast<Index>(t);
        if (needs(weights)) grad_ref(weights).col(ti) += g.cwiseProduct(value(saved[t])).rowwise().sum();
        if (needs(saved[t]))
          grad_ref(saved[t]) += (g.array().colwise() * value(weights).col(ti).array()).matrix();
      }
    });
  }

  /// Sum over rows of -log softmax(logits)[gold]; rows with gold == ignore are skipped.
  Var cross_entropy(Var logits, std::span<const TokenId> gold, TokenId ignore = kPadId) {
    require_shape(rows(logits) == static_cast<Index>(gold.size()), "cross_entropy gold length");
    const auto& z = value(logits);
    Matrix loss(1, 1);
    loss(0, 0) = 0;
    for (Index r = 0; r < z.rows(); ++r) {
      const auto y = gold[static_cast<std::size_t>(r)];
      if (y == ignore) continue;
      if (y < 0 || y >= z.cols()) throw DataError("gold id " + std::to_string(y) + " outside vocabulary");
      const Scalar mx = z.row(r).maxCoeff();
      const Scalar lse = mx + std::log((z.row(r).array() - mx).exp().sum());
      loss(0, 0) += lse - z(r, y);
    }
    std::vector<TokenId> saved(gold.begin(), gold.end());
    return op(std::move(loss), {logits}, [this, logits, saved = std::move(saved), ignore](const Matrix& g) {
      const auto& z = value(logits);
      auto& dz = grad_ref(logits);
      const Scalar up = g(0, 0);
      for (Index r = 0; r < z.rows(); ++r) {
        const auto y = saved[static_cast<std::size_t>(r)];
        if (y == ignore) continue;
        const Scalar mx = z.row(r).maxCoeff();
        auto p = (z.row(r).array() - mx).exp();
        const Scalar sum = p.sum();
        dz.row(r).array() += up * p / sum;
        dz(r, y) -= up;
      }
    });
  }

  /// Sum of 1 x 1 scalars.
  Var sum(std::span<const Var> scalars) {
    Matrix out = Matrix::Zero(1, 1);
    for (auto s : scalars) {
      require_shape(rows(s) == 1 && cols(s) == 1, "sum expects scalars");
      out(0, 0) += value(s)(0, 0);
    }
    std::vector<Var> saved(scalars.begin(), scalars.end());
    return op(std::move(out), scalars, [this, saved](const Matrix& g) {
      for (auto s : saved)
        if (needs(s)) grad_ref(s) += g;
    });
  }

  /// Inverted dropout with a fresh mask drawn from `rng`.
  Var dropout(Var a, double rate, Rng& rng) {
    if (rate <= 0.0) return a;
    const auto keep_scale = static_cast<Scalar>(1.0 / (1.0 - rate));
    Matrix mask(rows(a), cols(a));
    for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = uniform01(rng) < rate ? Scalar(0) : keep_scale;
    return mul_const(a, std::move(mask));
  }

  /// Propagates d(root)/d(node) to every node. `root` must be 1 x 1.
  void backward(Var root) {
    if (!record_) throw NumericError("backward on a graph that was not recording");
    if (backward_done_) throw NumericError("backward called twice on the same graph; run a new forward pass first");
    require_shape(rows(root) == 1 && cols(root) == 1, "backward root must be a scalar");
    backward_done_ = true;
    if (!nodes_[root.id].requires_grad) return;
    grad_ref(root).setConstant(Scalar(1));
    for (std::size_t i = root.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (n.has_grad && n.backward) n.backward();
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    const Matrix* external = nullptr;
    const Parameter<Scalar>* param = nullptr;
    std::function<void()> backward;
    bool requires_grad = false;
    bool has_grad = false;
  };

  static Scalar sigmoid_scalar(Scalar x) {
    // Split on sign so exp never overflows.
    if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
  }

  void require_same(Var a, Var b, const char* what) {
    require_shape(rows(a) == rows(b) && cols(a) == cols(b), std::string(what) + " " + shape_string(rows(a), cols(a)) +
                                                                " vs " + shape_string(rows(b), cols(b)));
  }

  bool needs(Var v) const { return nodes_[v.id].requires_grad; }

  Matrix& grad_ref(Var v) {
    auto& n = nodes_[v.id];
    n.has_grad = true;
    if (n.param) return n.param->grad;
    if (n.grad.size() == 0) n.grad = Matrix::Zero(rows(v), cols(v));
    return n.grad;
  }

  Var push(Matrix m, bool requires_grad) {
    Node n;
    n.value = std::move(m);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  using BackwardFn = std::function<void(const Matrix&)>;

  void set_backward(Var v, BackwardFn fn) {
    if (!nodes_[v.id].requires_grad) return;
    nodes_[v.id].backward = [this, v, fn = std::move(fn)] { fn(nodes_[v.id].grad); };
  }

  Var op(Matrix out, std::span<const Var> inputs, BackwardFn fn) {
    bool req = false;
    if (record_)
      for (auto in : inputs) req = req || needs(in);
    Var v = push(std::move(out), req);
    if (req && fn) set_backward(v, std::move(fn));
    return v;
  }

  Var op(Matrix out, std::initializer_list<Var> inputs, BackwardFn fn) {
    return op(std::move(out), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
  }

  bool record_;
  bool backward_done_ = false;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<Scalar>*, Var> param_nodes_;
};

}  // namespace embellish::neural
