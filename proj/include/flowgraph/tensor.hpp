// Copyright 2026 The flowgraph Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FLOWGRAPH_TENSOR_HPP_
#define FLOWGRAPH_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flowgraph/error.hpp"
#include "flowgraph/rng.hpp"

namespace flowgraph {

// Raised when the finite-value checker sees NaN or Inf; names the op.
class NumericError : public Error {
 public:
  using Error::Error;
};

template <typename T>
struct TensorNode {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> value;
  std::vector<T> grad;  // empty until first touched
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
  }
};

/// Dense row-major 2-D array with an accumulated-gradient slot.
///
/// A Tensor is a shared handle: copies alias the same storage, which is what
/// lets the tape write gradients back into parameters. Use clone() for an
/// independent copy. The shape never changes after construction.
template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() : node_(std::make_shared<TensorNode<T>>()) {}

  static Tensor zeros(std::size_t rows, std::size_t cols,
                      bool requires_grad = false) {
    Tensor t;
    t.node_->rows = rows;
    t.node_->cols = cols;
    t.node_->value.assign(rows * cols, T(0));
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from(std::size_t rows, std::size_t cols, std::vector<T> values,
                     bool requires_grad = false) {
    if (values.size() != rows * cols) {
      throw ValidationError("tensor of shape " + shape_string(rows, cols) +
                            " given " + std::to_string(values.size()) +
                            " values");
    }
    Tensor t;
    t.node_->rows = rows;
    t.node_->cols = cols;
    t.node_->value = std::move(values);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor parameter(std::size_t rows, std::size_t cols) {
    return zeros(rows, cols, true);
  }

  std::size_t rows() const { return node_->rows; }
  std::size_t cols() const { return node_->cols; }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool r) { node_->requires_grad = r; }

  T& operator()(std::size_t i, std::size_t j) {
    return node_->value[i * node_->cols + j];
  }
  T operator()(std::size_t i, std::size_t j) const {
    return node_->value[i * node_->cols + j];
  }
  T item() const { return node_->value.at(0); }

  std::span<T> values() { return node_->value; }
  std::span<const T> values() const { return node_->value; }

  // Gradient view; allocated (zeroed) on first access.
  std::span<T> grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

  Tensor clone() const {
    Tensor t;
    *t.node_ = *node_;
    return t;
  }

  std::string shape() const { return shape_string(rows(), cols()); }

  bool same_storage(const Tensor& o) const { return node_ == o.node_; }

  // Internal: op implementations and the tape work on nodes directly.
  const std::shared_ptr<TensorNode<T>>& node() const { return node_; }

  static std::string shape_string(std::size_t r, std::size_t c) {
    return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
  }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

/// Records operations in execution order and replays their backward rules
/// in exact reverse order.
///
/// Leaf gradients accumulate additively across backward() calls; nothing is
/// zeroed implicitly. Intermediate gradients are reset at the start of each
/// backward(). A tape built with grad disabled records nothing, which is the
/// inference path. The finite-value check defaults to on in debug builds.
template <typename T>
class Tape {
 public:
  explicit Tape(bool grad_enabled = true)
      : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }
  bool check_finite() const { return check_finite_; }
  void set_check_finite(bool on) { check_finite_ = on; }

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  // Called by ops after computing `out` from `inputs`.
  void record(const char* op, const Tensor<T>& out,
              std::vector<std::shared_ptr<TensorNode<T>>> inputs,
              std::function<void()> backward) {
    if (check_finite_) check_values(op, out.node()->value, "forward");
    bool any = false;
    for (const auto& in : inputs) any = any || in->requires_grad;
    out.node()->requires_grad = any && grad_enabled_;
    if (!out.node()->requires_grad) return;
    entries_.push_back({op, out.node(), std::move(inputs), std::move(backward)});
  }

  /// Backpropagates from a 1x1 loss produced by an op on this tape.
  void backward(const Tensor<T>& loss) {
    if (loss.rows() != 1 || loss.cols() != 1) {
      throw ValidationError("backward needs a scalar (1x1) loss, got " +
                            loss.shape());
    }
    std::size_t end = entries_.size();
    while (end > 0 && entries_[end - 1].output != loss.node()) --end;
    if (end == 0) {
      throw ValidationError("backward: loss tensor is not on this tape");
    }
    for (std::size_t k = 0; k < end; ++k) {
      auto& out = *entries_[k].output;
      out.ensure_grad();
      std::fill(out.grad.begin(), out.grad.end(), T(0));
    }
    loss.node()->grad[0] = T(1);
    for (std::size_t k = end; k-- > 0;) {
      auto& e = entries_[k];
      for (const auto& in : e.inputs) {
        if (in->requires_grad) in->ensure_grad();
      }
      e.backward();
      if (check_finite_) {
        for (const auto& in : e.inputs) {
          if (in->requires_grad) check_values(e.op, in->grad, "backward");
        }
      }
    }
  }

 private:
  struct Entry {
    const char* op;
    std::shared_ptr<TensorNode<T>> output;
    std::vector<std::shared_ptr<TensorNode<T>>> inputs;
    std::function<void()> backward;
  };

  static void check_values(const char* op, const std::vector<T>& v,
                           const char* pass) {
    for (T x : v) {
      if (!std::isfinite(x)) {
        throw NumericError(std::string("non-finite value produced by ") + op +
                           " (" + pass + ")");
      }
    }
  }

  bool grad_enabled_;
#ifdef NDEBUG
  bool check_finite_ = false;
#else
  bool check_finite_ = true;
#endif
  std::vector<Entry> entries_;
};

namespace ops_detail {

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a,
                        const Tensor<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ValidationError(std::string(op) + ": shape mismatch " + a.shape() +
                          " vs " + b.shape());
  }
}

}  // namespace ops_detail

/// C = A * B. Backward: dA = dC * B^T, dB = A^T * dC.
template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows()) {
    throw ValidationError("matmul: shape mismatch " + a.shape() + " * " +
                          b.shape());
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  auto out = Tensor<T>::zeros(m, n);
  {
    const T* A = a.node()->value.data();
    const T* B = b.node()->value.data();
    T* C = out.node()->value.data();
    for (std::size_t i = 0; i < m; ++i) {
      T* crow = C + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const T av = A[i * k + p];
        if (av == T(0)) continue;
        const T* brow = B + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
  auto an = a.node(), bn = b.node(), on = out.node();
  tape.record("matmul", out, {an, bn}, [an, bn, on, m, k, n] {
    const T* dC = on->grad.data();
    if (an->requires_grad) {
      T* dA = an->grad.data();
      const T* B = bn->value.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          T s = 0;
          const T* brow = B + p * n;
          const T* drow = dC + i * n;
          for (std::size_t j = 0; j < n; ++j) s += drow[j] * brow[j];
          dA[i * k + p] += s;
        }
      }
    }
    if (bn->requires_grad) {
      T* dB = bn->grad.data();
      const T* A = an->value.data();
      for (std::size_t i = 0; i < m; ++i) {
        const T* drow = dC + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const T av = A[i * k + p];
          if (av == T(0)) continue;
          T* dbrow = dB + p * n;
          for (std::size_t j = 0; j < n; ++j) dbrow[j] += av * drow[j];
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  ops_detail::require_same_shape("add", a, b);
  auto out = Tensor<T>::zeros(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.values()[i] = a.values()[i] + b.values()[i];
  }
  auto an = a.node(), bn = b.node(), on = out.node();
  tape.record("add", out, {an, bn}, [an, bn, on] {
    for (std::size_t i = 0; i < on->grad.size(); ++i) {
      if (an->requires_grad) an->grad[i] += on->grad[i];
      if (bn->requires_grad) bn->grad[i] += on->grad[i];
    }
  });
  return out;
}

// Adds a 1 x c row vector to every row of an r x c matrix.
template <typename T>
Tensor<T> add_row(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ValidationError("add_row: shape mismatch " + a.shape() + " + " +
                          row.shape());
  }
  const std::size_t r = a.rows(), c = a.cols();
  auto out = Tensor<T>::zeros(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out(i, j) = a(i, j) + row(0, j);
  }
  auto an = a.node(), bn = row.node(), on = out.node();
  tape.record("add_row", out, {an, bn}, [an, bn, on, r, c] {
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        const T g = on->grad[i * c + j];
        if (an->requires_grad) an->grad[i * c + j] += g;
        if (bn->requires_grad) bn->grad[j] += g;
      }
    }
  });
  return out;
}

// Elementwise product.
template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  ops_detail::require_same_shape("mul", a, b);
  auto out = Tensor<T>::zeros(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.values()[i] = a.values()[i] * b.values()[i];
  }
  auto an = a.node(), bn = b.node(), on = out.node();
  tape.record("mul", out, {an, bn}, [an, bn, on] {
    for (std::size_t i = 0; i < on->grad.size(); ++i) {
      const T g = on->grad[i];
      if (an->requires_grad) an->grad[i] += g * bn->value[i];
      if (bn->requires_grad) bn->grad[i] += g * an->value[i];
    }
  });
  return out;
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T s) {
  auto out = Tensor<T>::zeros(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.values()[i] = s * a.values()[i];
  auto an = a.node(), on = out.node();
  tape.record("scale", out, {an}, [an, on, s] {
    for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += s * on->grad[i];
  });
  return out;
}

// Sum of all entries, as a 1x1 tensor.
template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& a) {
  T s = 0;
  for (T v : a.values()) s += v;
  auto out = Tensor<T>::from(1, 1, {s});
  auto an = a.node(), on = out.node();
  tape.record("sum", out, {an}, [an, on] {
    const T g = on->grad[0];
    for (auto& x : an->grad) x += g;
  });
  return out;
}

/// Exact GELU, x * Phi(x) with Phi the standard normal CDF.
template <typename T>
Tensor<T> gelu(Tape<T>& tape, const Tensor<T>& a) {
  auto out = Tensor<T>::zeros(a.rows(), a.cols());
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T x = a.values()[i];
    out.values()[i] = T(0.5) * x * (T(1) + std::erf(x * inv_sqrt2));
  }
  auto an = a.node(), on = out.node();
  tape.record("gelu", out, {an}, [an, on, inv_sqrt2] {
    const T inv_sqrt_2pi = inv_sqrt2 * std::numbers::inv_sqrtpi_v<T>;
    for (std::size_t i = 0; i < on->grad.size(); ++i) {
      const T x = an->value[i];
      const T cdf = T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
      const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * x * x);
      an->grad[i] += on->grad[i] * (cdf + x * pdf);
    }
  });
  return out;
}

template <typename T>
Tensor<T> leaky_relu(Tape<T>& tape, const Tensor<T>& a, T slope) {
  auto out = Tensor<T>::zeros(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T x = a.values()[i];
    out.values()[i] = x > T(0) ? x : slope * x;
  }
  auto an = a.node(), on = out.node();
  tape.record("leaky_relu", out, {an}, [an, on, slope] {
    for (std::size_t i = 0; i < on->grad.size(); ++i) {
      an->grad[i] += on->grad[i] * (an->value[i] > T(0) ? T(1) : slope);
    }
  });
  return out;
}

namespace ops_detail {

// Row softmax over entries with mask != 0 (all entries when mask is empty).
// Masked entries get probability 0. Each row needs one unmasked entry.
template <typename T>
Tensor<T> softmax_impl(Tape<T>& tape, const char* name, const Tensor<T>& a,
                       std::vector<char> mask) {
  const std::size_t r = a.rows(), c = a.cols();
  auto out = Tensor<T>::zeros(r, c);
  auto on_mask = [&mask, c](std::size_t i, std::size_t j) {
    return mask.empty() || mask[i * c + j] != 0;
  };
  for (std::size_t i = 0; i < r; ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      if (on_mask(i, j)) mx = std::max(mx, a(i, j));
    }
    if (c > 0 && mx == -std::numeric_limits<T>::infinity()) {
      throw ValidationError(std::string(name) + ": row " + std::to_string(i) +
                            " has no unmasked entry");
    }
    T z = 0;
    for (std::size_t j = 0; j < c; ++j) {
      if (on_mask(i, j)) {
        const T e = std::exp(a(i, j) - mx);
        out(i, j) = e;
        z += e;
      }
    }
    for (std::size_t j = 0; j < c; ++j) out(i, j) /= z;
  }
  auto an = a.node(), on = out.node();
  tape.record(name, out, {an}, [an, on, r, c] {
    // dx_ij = y_ij (g_ij - sum_k g_ik y_ik); masked y are 0 so they drop out.
    for (std::size_t i = 0; i < r; ++i) {
      T dot = 0;
      for (std::size_t j = 0; j < c; ++j) {
        dot += on->grad[i * c + j] * on->value[i * c + j];
      }
      for (std::size_t j = 0; j < c; ++j) {
        an->grad[i * c + j] +=
            on->value[i * c + j] * (on->grad[i * c + j] - dot);
      }
    }
  });
  return out;
}

}  // namespace ops_detail

/// Row-wise softmax, stabilised by subtracting each row's max.
template <typename T>
Tensor<T> softmax_rows(Tape<T>& tape, const Tensor<T>& a) {
  return ops_detail::softmax_impl(tape, "softmax_rows", a, {});
}

// Softmax restricted to mask != 0 entries of each row; mask is row-major r*c.
template <typename T>
Tensor<T> masked_softmax_rows(Tape<T>& tape, const Tensor<T>& a,
                              std::vector<char> mask) {
  if (mask.size() != a.size()) {
    throw ValidationError("masked_softmax_rows: mask size mismatch");
  }
  return ops_detail::softmax_impl(tape, "masked_softmax_rows", a,
                                  std::move(mask));
}

/// Inverted dropout: in training, zeroes each entry with probability p and
/// scales survivors by 1/(1-p). Identity in eval mode or when p == 0.
template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& a, double p, bool training,
                  Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ValidationError("dropout probability must be in [0, 1), got " +
                          std::to_string(p));
  }
  if (!training || p == 0.0) return a;
  const T keep_scale = T(1) / T(1.0 - p);
  std::vector<T> mask(a.size());
  auto out = Tensor<T>::zeros(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    mask[i] = rng.bernoulli(p) ? T(0) : keep_scale;
    out.values()[i] = a.values()[i] * mask[i];
  }
  auto an = a.node(), on = out.node();
  tape.record("dropout", out, {an}, [an, on, mask = std::move(mask)] {
    for (std::size_t i = 0; i < on->grad.size(); ++i) {
      an->grad[i] += on->grad[i] * mask[i];
    }
  });
  return out;
}

// [A | B] along columns.
template <typename T>
Tensor<T> concat_cols(Tape<T>& tape, const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ValidationError("concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::size_t c = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) {
      throw ValidationError("concat_cols: row mismatch " + parts[0].shape() +
                            " vs " + p.shape());
    }
    c += p.cols();
  }
  auto out = Tensor<T>::zeros(r, c);
  std::vector<std::shared_ptr<TensorNode<T>>> nodes;
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < p.cols(); ++j) out(i, off + j) = p(i, j);
    }
    off += p.cols();
    nodes.push_back(p.node());
  }
  auto on = out.node();
  tape.record("concat_cols", out, nodes, [nodes, on, r, c] {
    std::size_t off = 0;
    for (const auto& n : nodes) {
      if (n->requires_grad) {
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < n->cols; ++j) {
            n->grad[i * n->cols + j] += on->grad[i * c + off + j];
          }
        }
      }
      off += n->cols;
    }
  });
  return out;
}

// Vertical stack of tensors with equal column counts.
template <typename T>
Tensor<T> concat_rows(Tape<T>& tape, const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ValidationError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t r = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) {
      throw ValidationError("concat_rows: column mismatch " + parts[0].shape() +
                            " vs " + p.shape());
    }
    r += p.rows();
  }
  auto out = Tensor<T>::zeros(r, c);
  std::vector<std::shared_ptr<TensorNode<T>>> nodes;
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.values().begin(), p.values().end(), out.values().begin() + off);
    off += p.size();
    nodes.push_back(p.node());
  }
  auto on = out.node();
  tape.record("concat_rows", out, nodes, [nodes, on] {
    std::size_t off = 0;
    for (const auto& n : nodes) {
      if (n->requires_grad) {
        for (std::size_t i = 0; i < n->value.size(); ++i) {
          n->grad[i] += on->grad[off + i];
        }
      }
      off += n->value.size();
    }
  });
  return out;
}

// Rows [begin, end) of a.
template <typename T>
Tensor<T> slice_rows(Tape<T>& tape, const Tensor<T>& a, std::size_t begin,
                     std::size_t end) {
  if (begin > end || end > a.rows()) {
    throw ValidationError("slice_rows: range [" + std::to_string(begin) + ", " +
                          std::to_string(end) + ") outside " + a.shape());
  }
  const std::size_t c = a.cols();
  auto out = Tensor<T>::zeros(end - begin, c);
  std::copy(a.values().begin() + begin * c, a.values().begin() + end * c,
            out.values().begin());
  auto an = a.node(), on = out.node();
  tape.record("slice_rows", out, {an}, [an, on, begin, c] {
    for (std::size_t i = 0; i < on->grad.size(); ++i) {
      an->grad[begin * c + i] += on->grad[i];
    }
  });
  return out;
}

/// Stacks rows a[index[k]] into a new |index| x c tensor; backward
/// scatter-adds, so repeated indices accumulate.
template <typename T>
Tensor<T> gather_rows(Tape<T>& tape, const Tensor<T>& a,
                      std::vector<std::size_t> index) {
  const std::size_t c = a.cols();
  for (std::size_t k : index) {
    if (k >= a.rows()) {
      throw ValidationError("gather_rows: index " + std::to_string(k) +
                            " out of range for " + a.shape());
    }
  }
  auto out = Tensor<T>::zeros(index.size(), c);
  for (std::size_t r = 0; r < index.size(); ++r) {
    std::copy_n(a.values().begin() + index[r] * c, c,
                out.values().begin() + r * c);
  }
  auto an = a.node(), on = out.node();
  tape.record("gather_rows", out, {an}, [an, on, c, index = std::move(index)] {
    for (std::size_t r = 0; r < index.size(); ++r) {
      for (std::size_t j = 0; j < c; ++j) {
        an->grad[index[r] * c + j] += on->grad[r * c + j];
      }
    }
  });
  return out;
}

/// E(i, j) = u(i) + v(j) for column vectors u (n x 1) and v (m x 1).
template <typename T>
Tensor<T> pairwise_sum(Tape<T>& tape, const Tensor<T>& u, const Tensor<T>& v) {
  if (u.cols() != 1 || v.cols() != 1) {
    throw ValidationError("pairwise_sum: expects column vectors, got " +
                          u.shape() + " and " + v.shape());
  }
  const std::size_t n = u.rows(), m = v.rows();
  auto out = Tensor<T>::zeros(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out(i, j) = u(i, 0) + v(j, 0);
  }
  auto un = u.node(), vn = v.node(), on = out.node();
  tape.record("pairwise_sum", out, {un, vn}, [un, vn, on, n, m] {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const T g = on->grad[i * m + j];
        if (un->requires_grad) un->grad[i] += g;
        if (vn->requires_grad) vn->grad[j] += g;
      }
    }
  });
  return out;
}

/// Class-weighted cross entropy over logits (m x C):
///   L_i = w[c_i] * (-x_{i,c_i} + log sum_k exp(x_{i,k}))
///   L   = sum_i L_i / sum_i w[c_i]
template <typename T>
Tensor<T> weighted_cross_entropy(Tape<T>& tape, const Tensor<T>& logits,
                                 const std::vector<int>& labels,
                                 const std::vector<T>& class_weights) {
  const std::size_t m = logits.rows(), C = logits.cols();
  if (m == 0) throw ValidationError("cross entropy over an empty batch");
  if (labels.size() != m) {
    throw ValidationError("cross entropy: " + std::to_string(labels.size()) +
                          " labels for " + std::to_string(m) + " rows");
  }
  if (class_weights.size() != C) {
    throw ValidationError("cross entropy: " +
                          std::to_string(class_weights.size()) +
                          " class weights for " + std::to_string(C) +
                          " classes");
  }
  for (T w : class_weights) {
    if (!(w > T(0))) throw ValidationError("class weights must be positive");
  }
  for (int c : labels) {
    if (c < 0 || static_cast<std::size_t>(c) >= C) {
      throw ValidationError("label " + std::to_string(c) + " outside [0, " +
                            std::to_string(C) + ")");
    }
  }
  std::vector<T> probs(m * C);
  T num = 0, den = 0;
  for (std::size_t i = 0; i < m; ++i) {
    T mx = logits(i, 0);
    for (std::size_t k = 1; k < C; ++k) mx = std::max(mx, logits(i, k));
    T z = 0;
    for (std::size_t k = 0; k < C; ++k) {
      probs[i * C + k] = std::exp(logits(i, k) - mx);
      z += probs[i * C + k];
    }
    for (std::size_t k = 0; k < C; ++k) probs[i * C + k] /= z;
    const auto c = static_cast<std::size_t>(labels[i]);
    const T w = class_weights[c];
    num += w * (-logits(i, c) + mx + std::log(z));
    den += w;
  }
  auto out = Tensor<T>::from(1, 1, {num / den});
  auto ln = logits.node(), on = out.node();
  tape.record("weighted_cross_entropy", out, {ln},
              [ln, on, m, C, den, labels, class_weights,
               probs = std::move(probs)] {
                const T g = on->grad[0] / den;
                for (std::size_t i = 0; i < m; ++i) {
                  const auto c = static_cast<std::size_t>(labels[i]);
                  const T w = class_weights[c] * g;
                  for (std::size_t k = 0; k < C; ++k) {
                    ln->grad[i * C + k] +=
                        w * (probs[i * C + k] - (k == c ? T(1) : T(0)));
                  }
                }
              });
  return out;
}

/// Glorot/Xavier uniform fill: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
template <typename T>
void glorot_uniform(Tensor<T>& t, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-a, a));
}

}  // namespace flowgraph

#endif  // FLOWGRAPH_TENSOR_HPP_
