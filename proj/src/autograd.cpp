#include "mvsd/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvsd {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap as_eigen(const Tensor& t) { return ConstMap(t.data().data(), t.rows(), t.cols()); }
MutMap as_eigen(Tensor& t) { return MutMap(t.data().data(), t.rows(), t.cols()); }

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_matrix(const char* op, const Tensor& a) {
  if (a.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(a.shape()));
}

Tape& tape_of(const Var& v) {
  if (!v.valid()) throw std::logic_error("operation on an unbound Var");
  return *v.tape;
}

void check_same_tape(const Var& a, const Var& b) {
  if (a.tape != b.tape) throw std::logic_error("operands recorded on different tapes");
}

}  // namespace

Parameter::Parameter(std::string name_, Tensor value_)
    : name(std::move(name_)), value(std::move(value_)), grad(value.shape(), 0.0) {}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

const Tensor& Var::value() const { return tape_of(*this).value(*this); }

// ---- Tape -------------------------------------------------------------------

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, true, {}, &p});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  if (backward_done_) throw std::logic_error("tape already consumed by backward(); start a new forward pass");
  bool needs = false;
  for (const Var& in : inputs) {
    if (in.tape != this) throw std::logic_error("operands recorded on different tapes");
    needs = needs || nodes_[in.id].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(fn) : BackwardFn{}, nullptr});
  return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad(const Var& v) {
  Node& n = nodes_[v.id];
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

const Tensor* Tape::grad_if(const Var& v) const {
  const Node& n = nodes_[v.id];
  return n.grad.shape() == n.value.shape() && !n.value.shape().empty() ? &n.grad : nullptr;
}

void Tape::backward(const Var& loss) {
  if (backward_done_) throw std::logic_error("backward() called twice without a new forward pass");
  if (loss.tape != this) throw std::logic_error("loss was recorded on a different tape");
  if (value(loss).size() != 1) throw ShapeError("backward() needs a scalar loss, got " + shape_str(value(loss).shape()));
  backward_done_ = true;
  grad(loss)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.shape() != n.value.shape()) continue;
    if (n.backward) {
      trace_.push_back(i);
      n.backward(*this, n.grad, n.value);
    }
    if (n.param != nullptr) {
      auto dst = n.param->grad.data();
      auto src = n.grad.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

// ---- operations -------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  check_same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_matrix("matmul", A);
  require_matrix("matmul", B);
  if (A.cols() != B.rows()) {
    throw ShapeError("matmul: inner dimensions differ for " + shape_str(A.shape()) + " x " + shape_str(B.shape()));
  }
  Tensor out = Tensor::matrix(A.rows(), B.cols());
  if (A.size() && B.size()) as_eigen(out).noalias() = as_eigen(A) * as_eigen(B);
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g, const Tensor&) {
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad(a);
      if (ga.size()) as_eigen(ga).noalias() += as_eigen(g) * as_eigen(t.value(b)).transpose();
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad(b);
      if (gb.size()) as_eigen(gb).noalias() += as_eigen(t.value(a)).transpose() * as_eigen(g);
    }
  });
}

Var add(const Var& a, const Var& b) {
  check_same_tape(a, b);
  require_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g, const Tensor&) {
    for (const Var& v : {a, b}) {
      if (!t.requires_grad(v)) continue;
      auto d = t.grad(v).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_tape(a, b);
  require_same_shape("mul", a.value(), b.value());
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g, const Tensor&) {
    if (t.requires_grad(a)) {
      auto d = t.grad(a).data();
      const Tensor& bv = t.value(b);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * bv[i];
    }
    if (t.requires_grad(b)) {
      auto d = t.grad(b).data();
      const Tensor& av = t.value(a);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * av[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= s;
  return tape_of(a).record(std::move(out), {a}, [a, s](Tape& t, const Tensor& g, const Tensor&) {
    auto d = t.grad(a).data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * g[i];
  });
}

Var add_row(const Var& a, const Var& b) {
  check_same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_matrix("add_row", A);
  if (B.rank() != 2 || B.rows() != 1 || B.cols() != A.cols()) {
    throw ShapeError("add_row: cannot broadcast " + shape_str(B.shape()) + " over " + shape_str(A.shape()));
  }
  Tensor out = A;
  const std::size_t n = A.rows(), d = A.cols();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out(r, c) += B[c];
  return tape_of(a).record(std::move(out), {a, b}, [a, b, n, d](Tape& t, const Tensor& g, const Tensor&) {
    if (t.requires_grad(a)) {
      auto ga = t.grad(a).data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad(b);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) gb[c] += g(r, c);
    }
  });
}

Var tanh(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = std::tanh(v);
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Tensor& g, const Tensor& y) {
    auto d = t.grad(a).data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var leaky_relu(const Var& a, double slope) {
  Tensor out = a.value();
  for (double& v : out.data()) v = v > 0.0 ? v : slope * v;
  return tape_of(a).record(std::move(out), {a}, [a, slope](Tape& t, const Tensor& g, const Tensor&) {
    auto d = t.grad(a).data();
    const Tensor& x = t.value(a);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += x[i] > 0.0 ? g[i] : slope * g[i];
  });
}

Var dropout(const Var& a, double p, Rng& rng, bool train) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout probability must lie in [0, 1)");
  if (!train || p == 0.0) return a;
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(a.value().size());
  for (double& m : mask) m = rng.uniform() < p ? 0.0 : keep_scale;
  Tensor out = a.value();
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] *= mask[i];
  return tape_of(a).record(std::move(out), {a}, [a, mask = std::move(mask)](Tape& t, const Tensor& g, const Tensor&) {
    auto d = t.grad(a).data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * mask[i];
  });
}

Var row_mean(const Var& a) {
  const Tensor& A = a.value();
  require_matrix("row_mean", A);
  const std::size_t n = A.rows(), d = A.cols();
  if (n == 0) throw ShapeError("row_mean: no rows in " + shape_str(A.shape()));
  Tensor out = Tensor::matrix(1, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out[c] += A(r, c);
  for (double& v : out.data()) v /= static_cast<double>(n);
  return tape_of(a).record(std::move(out), {a}, [a, n, d](Tape& t, const Tensor& g, const Tensor&) {
    Tensor& ga = t.grad(a);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) ga(r, c) += g[c] * inv;
  });
}

Var sum_squares(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v * v;
  return tape_of(a).record(Tensor::scalar(s), {a}, [a](Tape& t, const Tensor& g, const Tensor&) {
    auto d = t.grad(a).data();
    const Tensor& x = t.value(a);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += 2.0 * x[i] * g[0];
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const std::size_t n = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.rows() != n) {
      throw ShapeError("concat_cols: row mismatch " + shape_str(parts[0].value().shape()) + " vs " +
                       shape_str(p.value().shape()));
    }
    check_same_tape(parts[0], p);
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor out = Tensor::matrix(n, total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& P = parts[k].value();
    for (std::size_t r = 0; r < n; ++r)
      std::copy_n(P.row(r).begin(), widths[k], out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
    offset += widths[k];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape_of(parts[0]).record(std::move(out), parts, [inputs, widths, n](Tape& t, const Tensor& g, const Tensor&) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      if (t.requires_grad(inputs[k])) {
        Tensor& gk = t.grad(inputs[k]);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < widths[k]; ++c) gk(r, c) += g(r, off + c);
      }
      off += widths[k];
    }
  });
}

Var softmax_rows(const Var& a) {
  const Tensor& A = a.value();
  require_matrix("softmax_rows", A);
  Tensor out = A;
  const std::size_t n = A.rows(), d = A.cols();
  for (std::size_t r = 0; r < n; ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double& v : row) z += (v = std::exp(v - mx));
    for (double& v : row) v /= z;
  }
  return tape_of(a).record(std::move(out), {a}, [a, n, d](Tape& t, const Tensor& g, const Tensor& y) {
    Tensor& ga = t.grad(a);
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < d; ++c) ga(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var column(const Var& a, std::size_t j) {
  const Tensor& A = a.value();
  require_matrix("column", A);
  if (j >= A.cols()) throw ShapeError("column " + std::to_string(j) + " out of range for " + shape_str(A.shape()));
  const std::size_t n = A.rows();
  Tensor out = Tensor::matrix(n, 1);
  for (std::size_t r = 0; r < n; ++r) out[r] = A(r, j);
  return tape_of(a).record(std::move(out), {a}, [a, j, n](Tape& t, const Tensor& g, const Tensor&) {
    Tensor& ga = t.grad(a);
    for (std::size_t r = 0; r < n; ++r) ga(r, j) += g[r];
  });
}

Var scale_by(const Var& a, const Var& s) {
  check_same_tape(a, s);
  if (s.value().size() != 1) throw ShapeError("scale_by: scale must be 1x1, got " + shape_str(s.value().shape()));
  const double sv = s.value()[0];
  Tensor out = a.value();
  for (double& v : out.data()) v *= sv;
  return tape_of(a).record(std::move(out), {a, s}, [a, s](Tape& t, const Tensor& g, const Tensor&) {
    const double sv = t.value(s)[0];
    if (t.requires_grad(a)) {
      auto d = t.grad(a).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += sv * g[i];
    }
    if (t.requires_grad(s)) {
      const Tensor& x = t.value(a);
      double acc = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * g[i];
      t.grad(s)[0] += acc;
    }
  });
}

Var scale_rows(const Var& a, const Var& s) {
  check_same_tape(a, s);
  const Tensor& A = a.value();
  const Tensor& S = s.value();
  require_matrix("scale_rows", A);
  if (S.rank() != 2 || S.rows() != A.rows() || S.cols() != 1) {
    throw ShapeError("scale_rows: scales " + shape_str(S.shape()) + " do not fit " + shape_str(A.shape()));
  }
  const std::size_t n = A.rows(), d = A.cols();
  Tensor out = A;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out(r, c) *= S[r];
  return tape_of(a).record(std::move(out), {a, s}, [a, s, n, d](Tape& t, const Tensor& g, const Tensor&) {
    const Tensor& S = t.value(s);
    const Tensor& A = t.value(a);
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad(a);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) ga(r, c) += S[r] * g(r, c);
    }
    if (t.requires_grad(s)) {
      Tensor& gs = t.grad(s);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) gs[r] += A(r, c) * g(r, c);
    }
  });
}

Var maximum(const Var& a, const Var& b) {
  check_same_tape(a, b);
  require_same_shape("maximum", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], B[i]);
  // Ties route the adjoint to the first operand.
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g, const Tensor&) {
    const Tensor& A = t.value(a);
    const Tensor& B = t.value(b);
    if (t.requires_grad(a)) {
      auto d = t.grad(a).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += A[i] >= B[i] ? g[i] : 0.0;
    }
    if (t.requires_grad(b)) {
      auto d = t.grad(b).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += A[i] >= B[i] ? 0.0 : g[i];
    }
  });
}

Var gather_rows(const Var& a, std::span<const std::uint32_t> rows) {
  const Tensor& A = a.value();
  require_matrix("gather_rows", A);
  const std::size_t d = A.cols();
  Tensor out = Tensor::matrix(rows.size(), d);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= A.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[k]) + " out of range for " + shape_str(A.shape()));
    }
    std::copy_n(A.row(rows[k]).begin(), d, out.row(k).begin());
  }
  std::vector<std::uint32_t> idx(rows.begin(), rows.end());
  return tape_of(a).record(std::move(out), {a}, [a, idx = std::move(idx), d](Tape& t, const Tensor& g, const Tensor&) {
    Tensor& ga = t.grad(a);
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (std::size_t c = 0; c < d; ++c) ga(idx[k], c) += g(k, c);
  });
}

Var overwrite_rows(const Var& a, std::span<const std::uint32_t> rows, const Var& r) {
  check_same_tape(a, r);
  const Tensor& A = a.value();
  const Tensor& R = r.value();
  require_matrix("overwrite_rows", A);
  if (R.rank() != 2 || R.rows() != rows.size() || R.cols() != A.cols()) {
    throw ShapeError("overwrite_rows: replacement " + shape_str(R.shape()) + " does not fit " +
                     std::to_string(rows.size()) + " rows of " + shape_str(A.shape()));
  }
  const std::size_t d = A.cols();
  Tensor out = A;
  std::vector<char> replaced(A.rows(), 0);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= A.rows() || replaced[rows[k]]) {
      throw ShapeError("overwrite_rows: invalid or repeated row " + std::to_string(rows[k]));
    }
    replaced[rows[k]] = 1;
    std::copy_n(R.row(k).begin(), d, out.row(rows[k]).begin());
  }
  std::vector<std::uint32_t> idx(rows.begin(), rows.end());
  return tape_of(a).record(std::move(out), {a, r},
                           [a, r, idx = std::move(idx), replaced = std::move(replaced), d](Tape& t, const Tensor& g, const Tensor&) {
                             if (t.requires_grad(a)) {
                               Tensor& ga = t.grad(a);
                               for (std::size_t row = 0; row < replaced.size(); ++row) {
                                 if (replaced[row]) continue;
                                 for (std::size_t c = 0; c < d; ++c) ga(row, c) += g(row, c);
                               }
                             }
                             if (t.requires_grad(r)) {
                               Tensor& gr = t.grad(r);
                               for (std::size_t k = 0; k < idx.size(); ++k)
                                 for (std::size_t c = 0; c < d; ++c) gr(k, c) += g(idx[k], c);
                             }
                           });
}

Var aggregate(const Var& a, const SparseRows& m) {
  const Tensor& A = a.value();
  require_matrix("aggregate", A);
  if (m.n_cols != A.rows() || m.offsets.size() != m.n_rows + 1) {
    throw ShapeError("aggregate: sparse operator [" + std::to_string(m.n_rows) + "x" + std::to_string(m.n_cols) +
                     "] does not fit " + shape_str(A.shape()));
  }
  const std::size_t d = A.cols();
  Tensor out = Tensor::matrix(m.n_rows, d);
  for (std::size_t i = 0; i < m.n_rows; ++i) {
    double* dst = out.row(i).data();
    for (std::uint32_t k = m.offsets[i]; k < m.offsets[i + 1]; ++k) {
      const double w = m.weights[k];
      const double* src = A.row(m.cols[k]).data();
      for (std::size_t c = 0; c < d; ++c) dst[c] += w * src[c];
    }
  }
  // `m` must outlive the tape's backward pass.
  const SparseRows* mp = &m;
  return tape_of(a).record(std::move(out), {a}, [a, mp, d](Tape& t, const Tensor& g, const Tensor&) {
    Tensor& ga = t.grad(a);
    for (std::size_t i = 0; i < mp->n_rows; ++i) {
      const double* src = g.row(i).data();
      for (std::uint32_t k = mp->offsets[i]; k < mp->offsets[i + 1]; ++k) {
        const double w = mp->weights[k];
        double* dst = ga.row(mp->cols[k]).data();
        for (std::size_t c = 0; c < d; ++c) dst[c] += w * src[c];
      }
    }
  });
}

Var cross_entropy(const Var& logits, std::span<const int> labels) {
  const Tensor& L = logits.value();
  require_matrix("cross_entropy", L);
  const std::size_t n = L.rows(), k = L.cols();
  if (n == 0) throw std::invalid_argument("cross_entropy: empty batch");
  if (labels.size() != n) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " + shape_str(L.shape()));
  }
  Tensor probs = L;
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= k) {
      throw std::invalid_argument("cross_entropy: label " + std::to_string(labels[r]) + " out of range");
    }
    auto row = probs.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    const double log_z = mx + std::log(z);
    loss += log_z - L(r, static_cast<std::size_t>(labels[r]));
    for (double& v : row) v = std::exp(v - log_z);
  }
  loss /= static_cast<double>(n);
  std::vector<int> y(labels.begin(), labels.end());
  return tape_of(logits).record(Tensor::scalar(loss), {logits},
                                [logits, probs = std::move(probs), y = std::move(y), n, k](Tape& t, const Tensor& g, const Tensor&) {
                                  Tensor& gl = t.grad(logits);
                                  const double s = g[0] / static_cast<double>(n);
                                  for (std::size_t r = 0; r < n; ++r)
                                    for (std::size_t c = 0; c < k; ++c) {
                                      const double onehot = static_cast<int>(c) == y[r] ? 1.0 : 0.0;
                                      gl(r, c) += s * (probs(r, c) - onehot);
                                    }
                                });
}

std::pair<double, double> softmax2(double w1, double w2) {
  const double mx = std::max(w1, w2);
  const double e1 = std::exp(w1 - mx);
  const double e2 = std::exp(w2 - mx);
  return {e1 / (e1 + e2), e2 / (e1 + e2)};
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform_tensor(Shape{fan_in, fan_out}, -limit, limit, rng);
}

Tensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace mvsd
