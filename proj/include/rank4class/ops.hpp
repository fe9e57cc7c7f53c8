// Copyright 2026 The rank4class Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rank4class/error.hpp"
#include "rank4class/tape.hpp"
#include "rank4class/tensor.hpp"

// Differentiable primitives on a Tape. Everything is rank 0, 1 or 2; matrices
// are row-major and "rows" means the leading axis.

namespace rank4class {

namespace detail {

inline Tape& common_tape(Var a, Var b, const char* op) {
  if (a.tape == nullptr || a.tape != b.tape) {
    throw UsageError(std::string(op) + ": operands live on different tapes");
  }
  return *a.tape;
}

inline void add_into(Tensor* slot, std::size_t i, double v) {
  if (slot != nullptr) (*slot)[i] += v;
}

template <typename Forward, typename Derivative>
Var elementwise(Var x, Forward f, Derivative df) {
  Tape& tape = *x.tape;
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  const std::size_t xid = x.id;
  return tape.record(std::move(out), tape.needs_grad(x),
                     [xid, df](Tape& t, const Tensor& y, const Tensor& g) {
                       Tensor* gx = t.grad_slot(xid);
                       const Tensor& xv = t.value(Var{&t, xid});
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         (*gx)[i] += g[i] * df(xv[i], y[i]);
                       }
                     });
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline void require_rank(Var v, std::size_t rank, const char* op) {
  if (v.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + to_string(v.shape()));
  }
}

// Shared kernel for affine/linear/matmul_nt: out[r][m] = sum_k W[m][k] X[r][k] (+ b[m]).
// The bias is added after the full dot product so that a folded bias column
// multiplied by an appended 1 reproduces exactly the same bits.
inline Var linear_impl(Var x, Var w, const Var* b, const char* op) {
  Tape& tape = common_tape(x, w, op);
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  if (X.rank() != 1 && X.rank() != 2) {
    throw ShapeError(std::string(op) + ": input must be a vector or matrix, got " +
                     to_string(X.shape()));
  }
  if (W.rank() != 2 || W.cols() != X.cols()) {
    throw ShapeError(std::string(op) + ": weights " + to_string(W.shape()) +
                     " incompatible with input " + to_string(X.shape()));
  }
  const std::size_t rows = X.rows();
  const std::size_t in = X.cols();
  const std::size_t out_dim = W.rows();
  if (b != nullptr) {
    common_tape(x, *b, op);
    const Tensor& B = b->value();
    if (B.rank() != 1 || B.size() != out_dim) {
      throw ShapeError(std::string(op) + ": bias " + to_string(B.shape()) +
                       " does not match " + std::to_string(out_dim) + " outputs");
    }
  }
  Tensor out(X.rank() == 1 ? Shape{out_dim} : Shape{rows, out_dim});
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = X.data().data() + r * in;
    for (std::size_t m = 0; m < out_dim; ++m) {
      const double* wm = W.data().data() + m * in;
      double acc = 0.0;
      for (std::size_t k = 0; k < in; ++k) acc += wm[k] * xr[k];
      if (b != nullptr) acc += b->value()[m];
      out[r * out_dim + m] = acc;
    }
  }
  const std::size_t xid = x.id;
  const std::size_t wid = w.id;
  const bool has_bias = b != nullptr;
  const std::size_t bid = has_bias ? b->id : 0;
  const bool needs = tape.needs_grad(x) || tape.needs_grad(w) ||
                     (has_bias && tape.needs_grad(*b));
  return tape.record(
      std::move(out), needs,
      [=](Tape& t, const Tensor&, const Tensor& g) {
        const Tensor& Xv = t.value(Var{&t, xid});
        const Tensor& Wv = t.value(Var{&t, wid});
        Tensor* gx = t.grad_slot(xid);
        Tensor* gw = t.grad_slot(wid);
        Tensor* gb = has_bias ? t.grad_slot(bid) : nullptr;
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t m = 0; m < out_dim; ++m) {
            const double gm = g[r * out_dim + m];
            if (gx != nullptr) {
              double* gxr = gx->data().data() + r * in;
              const double* wm = Wv.data().data() + m * in;
              for (std::size_t k = 0; k < in; ++k) gxr[k] += gm * wm[k];
            }
            if (gw != nullptr) {
              double* gwm = gw->data().data() + m * in;
              const double* xr = Xv.data().data() + r * in;
              for (std::size_t k = 0; k < in; ++k) gwm[k] += gm * xr[k];
            }
            if (gb != nullptr) (*gb)[m] += gm;
          }
        }
      });
}

}  // namespace detail

/// weights * input + bias for a single input vector.
inline Var affine(Var input, Var weights, Var bias) {
  detail::require_rank(input, 1, "affine");
  return detail::linear_impl(input, weights, &bias, "affine");
}

/// Row-wise affine map: each row x of X becomes W x + b. X may be a vector.
inline Var linear(Var x, Var weights, Var bias) {
  return detail::linear_impl(x, weights, &bias, "linear");
}

/// A * B^T, with A a vector or matrix and B a matrix sharing A's column count.
inline Var matmul_nt(Var a, Var b) { return detail::linear_impl(a, b, nullptr, "matmul_nt"); }

inline Var add(Var a, Var b) {
  Tape& tape = detail::common_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const std::size_t aid = a.id, bid = b.id;
  return tape.record(std::move(out), tape.needs_grad(a) || tape.needs_grad(b),
                     [aid, bid](Tape& t, const Tensor&, const Tensor& g) {
                       Tensor* ga = t.grad_slot(aid);
                       Tensor* gb = t.grad_slot(bid);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         detail::add_into(ga, i, g[i]);
                         detail::add_into(gb, i, g[i]);
                       }
                     });
}

inline Var sub(Var a, Var b) {
  Tape& tape = detail::common_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const std::size_t aid = a.id, bid = b.id;
  return tape.record(std::move(out), tape.needs_grad(a) || tape.needs_grad(b),
                     [aid, bid](Tape& t, const Tensor&, const Tensor& g) {
                       Tensor* ga = t.grad_slot(aid);
                       Tensor* gb = t.grad_slot(bid);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         detail::add_into(ga, i, g[i]);
                         detail::add_into(gb, i, -g[i]);
                       }
                     });
}

/// Elementwise (Hadamard) product.
inline Var mul(Var a, Var b) {
  Tape& tape = detail::common_tape(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const std::size_t aid = a.id, bid = b.id;
  return tape.record(std::move(out), tape.needs_grad(a) || tape.needs_grad(b),
                     [aid, bid](Tape& t, const Tensor&, const Tensor& g) {
                       const Tensor& av = t.value(Var{&t, aid});
                       const Tensor& bv = t.value(Var{&t, bid});
                       Tensor* ga = t.grad_slot(aid);
                       Tensor* gb = t.grad_slot(bid);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         detail::add_into(ga, i, g[i] * bv[i]);
                         detail::add_into(gb, i, g[i] * av[i]);
                       }
                     });
}

inline Var scale(Var x, double factor) {
  return detail::elementwise(
      x, [factor](double v) { return factor * v; },
      [factor](double, double) { return factor; });
}

inline Var add_scalar(Var x, double offset) {
  return detail::elementwise(
      x, [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

inline Var relu(Var x) {
  return detail::elementwise(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Var tanh(Var x) {
  return detail::elementwise(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

inline Var sigmoid(Var x) {
  return detail::elementwise(
      x, detail::stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

inline Var exp(Var x) {
  return detail::elementwise(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Var log(Var x) {
  return detail::elementwise(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

/// log(1 + e^x) without overflow.
inline Var softplus(Var x) {
  return detail::elementwise(
      x, detail::stable_softplus,
      [](double v, double) { return detail::stable_sigmoid(v); });
}

inline Var square(Var x) {
  return detail::elementwise(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

inline Var reciprocal(Var x) {
  return detail::elementwise(
      x, [](double v) { return 1.0 / v; }, [](double v, double) { return -1.0 / (v * v); });
}

/// Sum of all entries, accumulated front to back.
inline Var sum(Var x) {
  Tape& tape = *x.tape;
  double acc = 0.0;
  for (double v : x.value().data()) acc += v;
  const std::size_t xid = x.id;
  return tape.record(Tensor::scalar(acc), tape.needs_grad(x),
                     [xid](Tape& t, const Tensor&, const Tensor& g) {
                       Tensor* gx = t.grad_slot(xid);
                       for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += g[0];
                     });
}

inline Var mean(Var x) {
  const auto n = static_cast<double>(x.value().size());
  return scale(sum(x), 1.0 / n);
}

/// log(sum_i e^{x_i}) over a vector, computed around the maximum.
inline Var log_sum_exp(Var x) {
  detail::require_rank(x, 1, "log_sum_exp");
  Tape& tape = *x.tape;
  const Tensor& v = x.value();
  if (v.size() == 0) throw ShapeError("log_sum_exp of an empty vector");
  const double peak = *std::max_element(v.data().begin(), v.data().end());
  double acc = 0.0;
  for (double s : v.data()) acc += std::exp(s - peak);
  const std::size_t xid = x.id;
  return tape.record(Tensor::scalar(peak + std::log(acc)), tape.needs_grad(x),
                     [xid](Tape& t, const Tensor& y, const Tensor& g) {
                       const Tensor& xv = t.value(Var{&t, xid});
                       Tensor* gx = t.grad_slot(xid);
                       for (std::size_t i = 0; i < xv.size(); ++i) {
                         (*gx)[i] += g[0] * std::exp(xv[i] - y[0]);
                       }
                     });
}

/// Max-shifted softmax over a vector.
inline Var softmax(Var x) {
  detail::require_rank(x, 1, "softmax");
  Tape& tape = *x.tape;
  const Tensor& v = x.value();
  if (v.size() == 0) throw ShapeError("softmax of an empty vector");
  const double peak = *std::max_element(v.data().begin(), v.data().end());
  Tensor out(v.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - peak);
    total += out[i];
  }
  for (std::size_t i = 0; i < v.size(); ++i) out[i] /= total;
  const std::size_t xid = x.id;
  return tape.record(std::move(out), tape.needs_grad(x),
                     [xid](Tape& t, const Tensor& y, const Tensor& g) {
                       double inner = 0.0;
                       for (std::size_t i = 0; i < y.size(); ++i) inner += g[i] * y[i];
                       Tensor* gx = t.grad_slot(xid);
                       for (std::size_t i = 0; i < y.size(); ++i) {
                         (*gx)[i] += y[i] * (g[i] - inner);
                       }
                     });
}

/// Entry i of a vector as a scalar.
inline Var pick(Var x, std::size_t index) {
  detail::require_rank(x, 1, "pick");
  if (index >= x.value().size()) {
    throw UsageError("pick: index " + std::to_string(index) + " out of range for " +
                     to_string(x.shape()));
  }
  Tape& tape = *x.tape;
  const std::size_t xid = x.id;
  return tape.record(Tensor::scalar(x.value()[index]), tape.needs_grad(x),
                     [xid, index](Tape& t, const Tensor&, const Tensor& g) {
                       (*t.grad_slot(xid))[index] += g[0];
                     });
}

/// Row r of a matrix as a vector.
inline Var row(Var x, std::size_t r) {
  detail::require_rank(x, 2, "row");
  const Tensor& m = x.value();
  if (r >= m.rows()) throw UsageError("row: index out of range");
  Tape& tape = *x.tape;
  auto span = m.row(r);
  const std::size_t cols = m.cols();
  const std::size_t xid = x.id;
  return tape.record(Tensor::vector({span.begin(), span.end()}), tape.needs_grad(x),
                     [xid, r, cols](Tape& t, const Tensor&, const Tensor& g) {
                       Tensor* gx = t.grad_slot(xid);
                       for (std::size_t c = 0; c < cols; ++c) (*gx)[r * cols + c] += g[c];
                     });
}

/// Repeats a scalar into a vector of length n.
inline Var broadcast(Var scalar, std::size_t n) {
  if (scalar.value().size() != 1) throw ShapeError("broadcast: operand is not a scalar");
  Tape& tape = *scalar.tape;
  const std::size_t sid = scalar.id;
  return tape.record(Tensor(Shape{n}, scalar.value()[0]), tape.needs_grad(scalar),
                     [sid](Tape& t, const Tensor&, const Tensor& g) {
                       double acc = 0.0;
                       for (double v : g.data()) acc += v;
                       (*t.grad_slot(sid))[0] += acc;
                     });
}

/// Packs scalars into a vector.
inline Var stack(std::span<const Var> scalars) {
  if (scalars.empty()) throw ShapeError("stack of nothing");
  Tape& tape = *scalars.front().tape;
  std::vector<double> values;
  std::vector<std::size_t> ids;
  bool needs = false;
  for (Var s : scalars) {
    detail::common_tape(scalars.front(), s, "stack");
    if (s.value().size() != 1) throw ShapeError("stack: operand is not a scalar");
    values.push_back(s.value()[0]);
    ids.push_back(s.id);
    needs = needs || tape.needs_grad(s);
  }
  return tape.record(Tensor::vector(std::move(values)), needs,
                     [ids](Tape& t, const Tensor&, const Tensor& g) {
                       for (std::size_t i = 0; i < ids.size(); ++i) {
                         detail::add_into(t.grad_slot(ids[i]), 0, g[i]);
                       }
                     });
}

/// [a; b] for two vectors.
inline Var concat(Var a, Var b) {
  Tape& tape = detail::common_tape(a, b, "concat");
  detail::require_rank(a, 1, "concat");
  detail::require_rank(b, 1, "concat");
  std::vector<double> values(a.value().data().begin(), a.value().data().end());
  values.insert(values.end(), b.value().data().begin(), b.value().data().end());
  const std::size_t aid = a.id, bid = b.id, na = a.value().size();
  return tape.record(Tensor::vector(std::move(values)),
                     tape.needs_grad(a) || tape.needs_grad(b),
                     [aid, bid, na](Tape& t, const Tensor&, const Tensor& g) {
                       Tensor* ga = t.grad_slot(aid);
                       Tensor* gb = t.grad_slot(bid);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         if (i < na) {
                           detail::add_into(ga, i, g[i]);
                         } else {
                           detail::add_into(gb, i - na, g[i]);
                         }
                       }
                     });
}

/// Appends a constant 1 to a vector, or a column of ones to a matrix.
inline Var append_ones(Var x) {
  const Tensor& v = x.value();
  if (v.rank() != 1 && v.rank() != 2) throw ShapeError("append_ones: need rank 1 or 2");
  const std::size_t rows = v.rows();
  const std::size_t cols = v.cols();
  Tensor out(v.rank() == 1 ? Shape{cols + 1} : Shape{rows, cols + 1});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * (cols + 1) + c] = v[r * cols + c];
    out[r * (cols + 1) + cols] = 1.0;
  }
  Tape& tape = *x.tape;
  const std::size_t xid = x.id;
  return tape.record(std::move(out), tape.needs_grad(x),
                     [xid, rows, cols](Tape& t, const Tensor&, const Tensor& g) {
                       Tensor* gx = t.grad_slot(xid);
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t c = 0; c < cols; ++c) {
                           (*gx)[r * cols + c] += g[r * (cols + 1) + c];
                         }
                       }
                     });
}

namespace detail {

inline void check_pair_inputs(Var h, Var c, const char* op) {
  common_tape(h, c, op);
  require_rank(h, 2, op);
  require_rank(c, 2, op);
  if (h.value().cols() != c.value().cols()) {
    throw ShapeError(std::string(op) + ": instance width " +
                     std::to_string(h.value().cols()) + " vs class width " +
                     std::to_string(c.value().cols()));
  }
}

}  // namespace detail

/// Row (b * n + i) holds H[b] (.) C[i] for every instance b and class i.
inline Var pair_product(Var h, Var c) {
  detail::check_pair_inputs(h, c, "pair_product");
  const Tensor& H = h.value();
  const Tensor& C = c.value();
  const std::size_t batch = H.rows(), n = C.rows(), k = H.cols();
  Tensor out(Shape{batch * n, k});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      double* o = out.data().data() + (b * n + i) * k;
      for (std::size_t j = 0; j < k; ++j) o[j] = H.at(b, j) * C.at(i, j);
    }
  }
  Tape& tape = *h.tape;
  const std::size_t hid = h.id, cid = c.id;
  return tape.record(
      std::move(out), tape.needs_grad(h) || tape.needs_grad(c),
      [=](Tape& t, const Tensor&, const Tensor& g) {
        const Tensor& Hv = t.value(Var{&t, hid});
        const Tensor& Cv = t.value(Var{&t, cid});
        Tensor* gh = t.grad_slot(hid);
        Tensor* gc = t.grad_slot(cid);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t i = 0; i < n; ++i) {
            const double* go = g.data().data() + (b * n + i) * k;
            for (std::size_t j = 0; j < k; ++j) {
              if (gh != nullptr) gh->at(b, j) += go[j] * Cv.at(i, j);
              if (gc != nullptr) gc->at(i, j) += go[j] * Hv.at(b, j);
            }
          }
        }
      });
}

/// Row (b * n + i) holds [H[b]; C[i]].
inline Var pair_concat(Var h, Var c) {
  detail::check_pair_inputs(h, c, "pair_concat");
  const Tensor& H = h.value();
  const Tensor& C = c.value();
  const std::size_t batch = H.rows(), n = C.rows(), k = H.cols();
  Tensor out(Shape{batch * n, 2 * k});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      double* o = out.data().data() + (b * n + i) * 2 * k;
      for (std::size_t j = 0; j < k; ++j) {
        o[j] = H.at(b, j);
        o[k + j] = C.at(i, j);
      }
    }
  }
  Tape& tape = *h.tape;
  const std::size_t hid = h.id, cid = c.id;
  return tape.record(std::move(out), tape.needs_grad(h) || tape.needs_grad(c),
                     [=](Tape& t, const Tensor&, const Tensor& g) {
                       Tensor* gh = t.grad_slot(hid);
                       Tensor* gc = t.grad_slot(cid);
                       for (std::size_t b = 0; b < batch; ++b) {
                         for (std::size_t i = 0; i < n; ++i) {
                           const double* go = g.data().data() + (b * n + i) * 2 * k;
                           for (std::size_t j = 0; j < k; ++j) {
                             if (gh != nullptr) gh->at(b, j) += go[j];
                             if (gc != nullptr) gc->at(i, j) += go[k + j];
                           }
                         }
                       }
                     });
}

/// D[i][j] = x[j] - x[i] for a vector x.
inline Var outer_diff(Var x) {
  detail::require_rank(x, 1, "outer_diff");
  const Tensor& v = x.value();
  const std::size_t n = v.size();
  Tensor out(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = v[j] - v[i];
  }
  Tape& tape = *x.tape;
  const std::size_t xid = x.id;
  return tape.record(std::move(out), tape.needs_grad(x),
                     [xid, n](Tape& t, const Tensor&, const Tensor& g) {
                       Tensor* gx = t.grad_slot(xid);
                       for (std::size_t i = 0; i < n; ++i) {
                         for (std::size_t j = 0; j < n; ++j) {
                           (*gx)[j] += g[i * n + j];
                           (*gx)[i] -= g[i * n + j];
                         }
                       }
                     });
}

/// Sum along each row of a matrix.
inline Var row_sums(Var x) {
  detail::require_rank(x, 2, "row_sums");
  const Tensor& m = x.value();
  const std::size_t rows = m.rows(), cols = m.cols();
  Tensor out(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += m[r * cols + c];
    out[r] = acc;
  }
  Tape& tape = *x.tape;
  const std::size_t xid = x.id;
  return tape.record(std::move(out), tape.needs_grad(x),
                     [xid, rows, cols](Tape& t, const Tensor&, const Tensor& g) {
                       Tensor* gx = t.grad_slot(xid);
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t c = 0; c < cols; ++c) (*gx)[r * cols + c] += g[r];
                       }
                     });
}

inline Var reshape(Var x, Shape shape) {
  if (element_count(shape) != x.value().size()) {
    throw ShapeError("reshape: " + to_string(x.shape()) + " to " + to_string(shape));
  }
  Tape& tape = *x.tape;
  const std::size_t xid = x.id;
  return tape.record(x.value().reshaped(std::move(shape)), tape.needs_grad(x),
                     [xid](Tape& t, const Tensor&, const Tensor& g) {
                       Tensor* gx = t.grad_slot(xid);
                       for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
                     });
}

}  // namespace rank4class
