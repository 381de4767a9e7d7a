#pragma once

#include "relife/nn/ops.hpp"

namespace relife::nn {

/// Gate weights of a single-layer GRU. Input maps are [d_in, d_h], recurrent
/// maps [d_h, d_h], biases [1, d_h].
struct GruWeights {
  Var w_z, u_z, b_z;  // update gate
  Var w_r, u_r, b_r;  // reset gate
  Var w_n, u_n, b_n;  // candidate state
};

/// Runs the GRU over seq [T, d_in] from h0 [1, d_h]; row t of the result is
/// the hidden state after step t.
///
///   z = sigmoid(x W_z + h U_z + b_z)
///   r = sigmoid(x W_r + h U_r + b_r)
///   n = tanh(x W_n + (r * h) U_n + b_n)
///   h' = (1 - z) * n + z * h
inline Var gru_forward(const Var& seq, const GruWeights& w, const Var& h0) {
  if (seq.rows() < 1) throw ShapeError("gru_forward: empty sequence");
  if (h0.rows() != 1 || h0.cols() != w.u_z.rows()) throw ShapeError("gru_forward: bad h0 shape");

  // Input projections for every step at once.
  const Var xz = add_row(matmul(seq, w.w_z), w.b_z);
  const Var xr = add_row(matmul(seq, w.w_r), w.b_r);
  const Var xn = add_row(matmul(seq, w.w_n), w.b_n);

  Var h = h0;
  std::vector<Var> states;
  states.reserve(static_cast<std::size_t>(seq.rows()));
  for (Eigen::Index t = 0; t < seq.rows(); ++t) {
    const Var z = sigmoid(add(row(xz, t), matmul(h, w.u_z)));
    const Var r = sigmoid(add(row(xr, t), matmul(h, w.u_r)));
    const Var n = tanh(add(row(xn, t), matmul(hadamard(r, h), w.u_n)));
    h = add(hadamard(one_minus(z), n), hadamard(z, h));
    states.push_back(h);
  }
  return vcat(states);
}

}  // namespace relife::nn
