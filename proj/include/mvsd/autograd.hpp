#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvsd/rng.hpp"
#include "mvsd/tensor.hpp"

namespace mvsd {

/// Trainable weight with its accumulated gradient.
struct Parameter {
  Parameter(std::string name, Tensor value);

  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad.fill(0.0); }
};

void zero_grads(std::span<Parameter* const> params);

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  bool valid() const { return tape != nullptr; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Record of executed operations for one forward pass.
///
/// Each recorded op stores its output value and, if any input needs a
/// gradient, a closure that pushes the output adjoint back to its inputs.
/// backward() replays those closures in exact reverse recording order and
/// may only run once per tape; start a new tape for the next forward pass.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad, const Tensor& out_value)>;

  Var constant(Tensor value);
  /// Leaf bound to a parameter. Its gradient is added to `p.grad` by backward().
  Var param(Parameter& p);
  /// Low-level hook for op implementations.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);

  const Tensor& value(const Var& v) const { return nodes_[v.id].value; }
  bool requires_grad(const Var& v) const { return nodes_[v.id].requires_grad; }
  /// Gradient buffer of `v`, allocated as zeros on first use.
  Tensor& grad(const Var& v);
  /// Gradient of `v` if backward reached it, else nullptr.
  const Tensor* grad_if(const Var& v) const;

  void backward(const Var& loss);

  std::size_t size() const { return nodes_.size(); }
  /// Node ids whose backward closures ran, in the order they ran.
  const std::vector<std::size_t>& backward_trace() const { return trace_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  std::deque<Node> nodes_;
  std::vector<std::size_t> trace_;
  bool backward_done_ = false;
};

/// Row-compressed sparse matrix used for weighted neighbor aggregation.
struct SparseRows {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::uint32_t> offsets;  // n_rows + 1
  std::vector<std::uint32_t> cols;
  std::vector<double> weights;
};

// ---- differentiable operations --------------------------------------------

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// a[n x d] + b[1 x d] broadcast over rows.
Var add_row(const Var& a, const Var& b);
Var tanh(const Var& a);
Var leaky_relu(const Var& a, double slope);
/// Inverted dropout: zeroes entries with probability p and scales survivors by
/// 1/(1-p) when `train`; identity otherwise.
Var dropout(const Var& a, double p, Rng& rng, bool train);
/// Mean over rows: [n x d] -> [1 x d].
Var row_mean(const Var& a);
Var sum_squares(const Var& a);
Var concat_cols(std::span<const Var> parts);
Var softmax_rows(const Var& a);
Var column(const Var& a, std::size_t j);
/// a scaled by the 1x1 value s.
Var scale_by(const Var& a, const Var& s);
/// Row i of a scaled by s[i] (s is n x 1).
Var scale_rows(const Var& a, const Var& s);
Var maximum(const Var& a, const Var& b);
Var gather_rows(const Var& a, std::span<const std::uint32_t> rows);
/// Copy of a whose rows `rows[k]` are replaced by row k of r.
Var overwrite_rows(const Var& a, std::span<const std::uint32_t> rows, const Var& r);
/// out[i] = sum_k weights[k] * a[cols[k]] over the k in row i of `m`.
Var aggregate(const Var& a, const SparseRows& m);
/// Mean negative log-likelihood of `labels` under softmax(logits).
Var cross_entropy(const Var& logits, std::span<const int> labels);

/// Two-way softmax with max subtraction.
std::pair<double, double> softmax2(double w1, double w2);

// ---- initializers ----------------------------------------------------------

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)); shape [fan_in x fan_out].
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng);

}  // namespace mvsd
