#pragma once

#include "relife/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace relife::nn {

/// Boolean mask; either the full shape of its target or a single row broadcast down.
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

inline void same_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw std::logic_error("operands recorded on different tapes");
}

inline double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

inline Var matmul(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  detail::require(a.cols() == b.rows(),
                  "matmul: " + shape_str(a.value()) + " x " + shape_str(b.value()));
  Matrix y = a.value() * b.value();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(y), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& dy = t.grad(self);
    if (t.needs_grad(ia)) t.accumulate(ia, dy * t.value(ib).transpose());
    if (t.needs_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * dy);
  });
}

/// a * b^T
inline Var matmul_nt(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  detail::require(a.cols() == b.cols(),
                  "matmul_nt: " + shape_str(a.value()) + " x " + shape_str(b.value()) + "^T");
  Matrix y = a.value() * b.value().transpose();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(y), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& dy = t.grad(self);
    if (t.needs_grad(ia)) t.accumulate(ia, dy * t.value(ib));
    if (t.needs_grad(ib)) t.accumulate(ib, dy.transpose() * t.value(ia));
  });
}

inline Var transpose(const Var& a) {
  Matrix y = a.value().transpose();
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).transpose());
  });
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic

inline Var add(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(),
                  "add: " + shape_str(a.value()) + " + " + shape_str(b.value()));
  Matrix y = a.value() + b.value();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(y), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(),
                  "sub: " + shape_str(a.value()) + " - " + shape_str(b.value()));
  Matrix y = a.value() - b.value();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(y), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, -t.grad(self));
  });
}

/// a [r,c] + row [1,c] broadcast over rows.
inline Var add_row(const Var& a, const Var& row) {
  detail::same_tape(a, row);
  detail::require(row.rows() == 1 && row.cols() == a.cols(),
                  "add_row: " + shape_str(a.value()) + " + " + shape_str(row.value()));
  Matrix y = a.value().rowwise() + row.value().row(0);
  const std::size_t ia = a.id(), ir = row.id();
  return a.tape()->record(std::move(y), {a, row}, [ia, ir](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    if (t.needs_grad(ir)) t.accumulate(ir, t.grad(self).colwise().sum());
  });
}

inline Var hadamard(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(),
                  "hadamard: " + shape_str(a.value()) + " * " + shape_str(b.value()));
  Matrix y = a.value().cwiseProduct(b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(y), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& dy = t.grad(self);
    if (t.needs_grad(ia)) t.accumulate(ia, dy.cwiseProduct(t.value(ib)));
    if (t.needs_grad(ib)) t.accumulate(ib, dy.cwiseProduct(t.value(ia)));
  });
}

inline Var scale(const Var& a, double s) {
  Matrix y = a.value() * s;
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia, s](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self) * s);
  });
}

/// 1 - a, elementwise.
inline Var one_minus(const Var& a) {
  Matrix y = (1.0 - a.value().array()).matrix();
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, -t.grad(self));
  });
}

// ---------------------------------------------------------------------------
// Nonlinearities

enum class Activation { tanh, leaky_relu, softplus, sigmoid };

inline Var tanh(const Var& a) {
  Matrix y = a.value().array().tanh().matrix();
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia](Tape& t, std::size_t self) {
    const auto y = t.value(self).array();
    t.accumulate(ia, (t.grad(self).array() * (1.0 - y * y)).matrix());
  });
}

inline Var sigmoid(const Var& a) {
  Matrix y = a.value().unaryExpr([](double x) { return detail::stable_sigmoid(x); });
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia](Tape& t, std::size_t self) {
    const auto y = t.value(self).array();
    t.accumulate(ia, (t.grad(self).array() * y * (1.0 - y)).matrix());
  });
}

inline Var softplus(const Var& a) {
  Matrix y = a.value().unaryExpr([](double x) { return detail::stable_softplus(x); });
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia](Tape& t, std::size_t self) {
    const Matrix s = t.value(ia).unaryExpr([](double x) { return detail::stable_sigmoid(x); });
    t.accumulate(ia, t.grad(self).cwiseProduct(s));
  });
}

/// Natural log; inputs must be positive.
inline Var log(const Var& a) {
  detail::require((a.value().array() > 0).all(), "log of a non-positive value");
  Matrix y = a.value().array().log().matrix();
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, (t.grad(self).array() / t.value(ia).array()).matrix());
  });
}

inline Var leaky_relu(const Var& a, double alpha) {
  Matrix y = a.value().unaryExpr([alpha](double x) { return x > 0 ? x : alpha * x; });
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia, alpha](Tape& t, std::size_t self) {
    const Matrix d = t.value(ia).unaryExpr([alpha](double x) { return x > 0 ? 1.0 : alpha; });
    t.accumulate(ia, t.grad(self).cwiseProduct(d));
  });
}

inline Var elementwise(Activation kind, const Var& x, double leaky_alpha = 0.01) {
  switch (kind) {
    case Activation::tanh: return tanh(x);
    case Activation::leaky_relu: return leaky_relu(x, leaky_alpha);
    case Activation::softplus: return softplus(x);
    case Activation::sigmoid: return sigmoid(x);
  }
  throw std::invalid_argument("unknown activation");
}

// ---------------------------------------------------------------------------
// Normalization

namespace detail {

inline bool mask_at(const Mask* mask, Eigen::Index r, Eigen::Index c) {
  if (!mask) return true;
  return mask->rows() == 1 ? (*mask)(0, c) : (*mask)(r, c);
}

}  // namespace detail

/// Row-wise softmax. Masked (false) entries are excluded and come out exactly 0.
inline Var masked_softmax(const Var& x, const Mask* mask = nullptr) {
  const Matrix& v = x.value();
  if (mask) {
    detail::require(mask->cols() == v.cols() && (mask->rows() == 1 || mask->rows() == v.rows()),
                    "masked_softmax: mask shape mismatch");
  }
  Matrix y = Matrix::Zero(v.rows(), v.cols());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      if (detail::mask_at(mask, r, c)) mx = std::max(mx, v(r, c));
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw std::invalid_argument("masked_softmax: row " + std::to_string(r) + " is fully masked");
    }
    double total = 0;
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      if (!detail::mask_at(mask, r, c)) continue;
      y(r, c) = std::exp(v(r, c) - mx);
      total += y(r, c);
    }
    y.row(r) /= total;
  }
  const std::size_t ix = x.id();
  return x.tape()->record(std::move(y), {x}, [ix](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    const Matrix& dy = t.grad(self);
    const Eigen::VectorXd inner = dy.cwiseProduct(y).rowwise().sum();
    Matrix dx = y.cwiseProduct(dy.colwise() - inner);
    t.accumulate(ix, dx);
  });
}

inline Var masked_softmax(const Var& x, const Mask& mask) { return masked_softmax(x, &mask); }

/// Row-wise log-softmax (no masking).
inline Var log_softmax(const Var& x) {
  const Matrix& v = x.value();
  Matrix y(v.rows(), v.cols());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double mx = v.row(r).maxCoeff();
    const double lse = mx + std::log((v.row(r).array() - mx).exp().sum());
    y.row(r) = v.row(r).array() - lse;
  }
  const std::size_t ix = x.id();
  return x.tape()->record(std::move(y), {x}, [ix](Tape& t, std::size_t self) {
    const Matrix p = t.value(self).array().exp().matrix();
    const Matrix& dy = t.grad(self);
    const Eigen::VectorXd total = dy.rowwise().sum();
    Matrix dx = dy - (p.array().colwise() * total.array()).matrix();
    t.accumulate(ix, dx);
  });
}

// ---------------------------------------------------------------------------
// Structural ops

inline Var hcat(const std::vector<Var>& parts) {
  detail::require(!parts.empty(), "hcat: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    detail::require(p.rows() == rows, "hcat: row count mismatch");
    detail::same_tape(parts.front(), p);
    cols += p.cols();
  }
  Matrix y(rows, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> spans;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    y.middleCols(at, p.cols()) = p.value();
    spans.emplace_back(p.id(), p.cols());
    at += p.cols();
  }
  return parts.front().tape()->record(std::move(y), parts, [spans](Tape& t, std::size_t self) {
    Eigen::Index off = 0;
    for (const auto& [id, w] : spans) {
      if (t.needs_grad(id)) t.accumulate(id, t.grad(self).middleCols(off, w));
      off += w;
    }
  });
}

inline Var vcat(const std::vector<Var>& parts) {
  detail::require(!parts.empty(), "vcat: no inputs");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    detail::require(p.cols() == cols, "vcat: column count mismatch");
    detail::same_tape(parts.front(), p);
    rows += p.rows();
  }
  Matrix y(rows, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> spans;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    y.middleRows(at, p.rows()) = p.value();
    spans.emplace_back(p.id(), p.rows());
    at += p.rows();
  }
  return parts.front().tape()->record(std::move(y), parts, [spans](Tape& t, std::size_t self) {
    Eigen::Index off = 0;
    for (const auto& [id, h] : spans) {
      if (t.needs_grad(id)) t.accumulate(id, t.grad(self).middleRows(off, h));
      off += h;
    }
  });
}

inline Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  detail::require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols out of range");
  Matrix y = a.value().middleCols(start, count);
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(y), {a}, [=](Tape& t, std::size_t self) {
    if (t.needs_grad(ia)) t.grad_buffer(ia).middleCols(start, count) += t.grad(self);
  });
}

inline Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  detail::require(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows out of range");
  Matrix y = a.value().middleRows(start, count);
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(y), {a}, [=](Tape& t, std::size_t self) {
    if (t.needs_grad(ia)) t.grad_buffer(ia).middleRows(start, count) += t.grad(self);
  });
}

inline Var row(const Var& a, Eigen::Index r) { return slice_rows(a, r, 1); }

inline std::vector<Var> unstack_rows(const Var& a) {
  std::vector<Var> out;
  out.reserve(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index r = 0; r < a.rows(); ++r) out.push_back(row(a, r));
  return out;
}

/// a [1,c] repeated into n rows.
inline Var repeat_rows(const Var& a, Eigen::Index n) {
  detail::require(a.rows() == 1, "repeat_rows expects a single row");
  Matrix y = a.value().replicate(n, 1);
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).colwise().sum());
  });
}

inline Var mean_rows(const Var& a) {
  detail::require(a.rows() >= 1, "mean_rows of empty matrix");
  Matrix y = a.value().colwise().mean();
  const std::size_t ia = a.id();
  const Eigen::Index n = a.rows();
  return a.tape()->record(std::move(y), {a}, [ia, n](Tape& t, std::size_t self) {
    t.accumulate(ia, (t.grad(self) / static_cast<double>(n)).replicate(n, 1));
  });
}

inline Var sum_all(const Var& a) {
  Matrix y = Matrix::Constant(1, 1, a.value().sum());
  const std::size_t ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return a.tape()->record(std::move(y), {a}, [ia, r, c](Tape& t, std::size_t self) {
    t.accumulate(ia, Matrix::Constant(r, c, t.grad(self)(0, 0)));
  });
}

/// Reinterprets the row-major storage with a new shape.
inline Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  detail::require(rows * cols == a.value().size(), "reshape: element count mismatch");
  Matrix y = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  const std::size_t ia = a.id();
  const Eigen::Index r0 = a.rows(), c0 = a.cols();
  return a.tape()->record(std::move(y), {a}, [ia, r0, c0](Tape& t, std::size_t self) {
    t.accumulate(ia, Eigen::Map<const Matrix>(t.grad(self).data(), r0, c0));
  });
}

/// Diagonal of a square matrix as a column [n,1].
inline Var diag(const Var& a) {
  detail::require(a.rows() == a.cols(), "diag expects a square matrix");
  Matrix y = a.value().diagonal();
  const std::size_t ia = a.id();
  const Eigen::Index n = a.rows();
  return a.tape()->record(std::move(y), {a}, [ia, n](Tape& t, std::size_t self) {
    Matrix g = Matrix::Zero(n, n);
    g.diagonal() = t.grad(self).col(0);
    t.accumulate(ia, g);
  });
}

/// Rows of table selected by ids. A pad id yields a zero row and sends no
/// gradient back, so the table's pad row never influences the result.
inline Var gather_rows(const Var& table, const std::vector<int>& ids,
                       std::optional<int> pad_id = std::nullopt) {
  const Matrix& tv = table.value();
  Matrix y(static_cast<Eigen::Index>(ids.size()), tv.cols());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] < 0 || ids[k] >= tv.rows()) {
      throw std::out_of_range("gather_rows: id " + std::to_string(ids[k]) + " outside vocabulary of " +
                              std::to_string(tv.rows()));
    }
    if (pad_id && ids[k] == *pad_id) {
      y.row(static_cast<Eigen::Index>(k)).setZero();
    } else {
      y.row(static_cast<Eigen::Index>(k)) = tv.row(ids[k]);
    }
  }
  const std::size_t it = table.id();
  return table.tape()->record(std::move(y), {table}, [=](Tape& t, std::size_t self) {
    if (!t.needs_grad(it)) return;
    Matrix& g = t.grad_buffer(it);
    const Matrix& dy = t.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (pad_id && ids[k] == *pad_id) continue;
      g.row(ids[k]) += dy.row(static_cast<Eigen::Index>(k));
    }
  });
}

/// Row i*k + j of the result is a_i + b_j, for a [m,d] and b [k,d].
inline Var pairwise_add(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  detail::require(a.cols() == b.cols(), "pairwise_add: width mismatch");
  const Eigen::Index m = a.rows(), k = b.rows();
  Matrix y(m * k, a.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    y.middleRows(i * k, k) = b.value().rowwise() + a.value().row(i);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(y), {a, b}, [=](Tape& t, std::size_t self) {
    const Matrix& dy = t.grad(self);
    if (t.needs_grad(ia)) {
      Matrix ga(m, dy.cols());
      for (Eigen::Index i = 0; i < m; ++i) ga.row(i) = dy.middleRows(i * k, k).colwise().sum();
      t.accumulate(ia, ga);
    }
    if (t.needs_grad(ib)) {
      Matrix gb = Matrix::Zero(k, dy.cols());
      for (Eigen::Index i = 0; i < m; ++i) gb += dy.middleRows(i * k, k);
      t.accumulate(ib, gb);
    }
  });
}

// ---------------------------------------------------------------------------
// Composite helpers

/// y = x W (+ b)
inline Var affine(const Var& x, const Var& w, const std::optional<Var>& b = std::nullopt) {
  Var y = matmul(x, w);
  return b ? add_row(y, *b) : y;
}

/// Binary cross-entropy summed over a column of probabilities. Probabilities are
/// clamped to [clamp, 1 - clamp]; clamped entries pass no gradient.
inline Var bce_sum(const Var& probs, const std::vector<double>& labels, double clamp = 1e-7) {
  detail::require(probs.cols() == 1 && probs.rows() == static_cast<Eigen::Index>(labels.size()),
                  "bce_sum: expected [" + std::to_string(labels.size()) + ",1] probabilities");
  double loss = 0;
  const Matrix& p = probs.value();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double c = std::clamp(p(static_cast<Eigen::Index>(i), 0), clamp, 1.0 - clamp);
    loss -= labels[i] * std::log(c) + (1.0 - labels[i]) * std::log(1.0 - c);
  }
  const std::size_t ip = probs.id();
  return probs.tape()->record(Matrix::Constant(1, 1, loss), {probs},
                              [ip, labels, clamp](Tape& t, std::size_t self) {
                                const Matrix& p = t.value(ip);
                                const double up = t.grad(self)(0, 0);
                                Matrix g(p.rows(), 1);
                                for (Eigen::Index i = 0; i < p.rows(); ++i) {
                                  const double v = p(i, 0);
                                  const double y = labels[static_cast<std::size_t>(i)];
                                  g(i, 0) = (v < clamp || v > 1.0 - clamp)
                                                ? 0.0
                                                : up * (-y / v + (1.0 - y) / (1.0 - v));
                                }
                                t.accumulate(ip, g);
                              });
}

}  // namespace relife::nn
