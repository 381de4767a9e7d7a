#pragma once

#include "relife/nn/ops.hpp"

#include <cmath>
#include <functional>

namespace relife::nn {

/// Query/key/value and output projections, each [d, d].
struct AttentionWeights {
  Var w_q, w_k, w_v, w_o;
};

/// Transform applied to each head's preliminary logits [n_q, n_k] before the
/// sqrt(d_a) division and the softmax.
using LogitHook = std::function<Var(const Var&)>;

/// Multi-head scaled dot-product attention.
///
/// Each head h sees columns [h*d_a, (h+1)*d_a) of the projected inputs, with
/// d_a = d / heads. The per-head outputs are concatenated back to width d and
/// multiplied by w_o. `key_mask` (row-broadcast or [n_q, n_k]) removes keys
/// from the softmax. When `weights_out` is given, each head's [n_q, n_k]
/// attention distribution is appended to it.
inline Var multi_head_attention(const Var& q_in, const Var& k_in, const Var& v_in,
                                const AttentionWeights& w, int heads, const LogitHook& hook = {},
                                const Mask* key_mask = nullptr, std::vector<Var>* weights_out = nullptr) {
  const Eigen::Index d = w.w_q.cols();
  if (heads < 1 || d % heads != 0) {
    throw ShapeError("multi_head_attention: width " + std::to_string(d) +
                     " is not divisible by heads=" + std::to_string(heads));
  }
  if (k_in.rows() != v_in.rows()) throw ShapeError("multi_head_attention: key/value length mismatch");
  const Eigen::Index d_a = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_a));

  const Var q = matmul(q_in, w.w_q);
  const Var k = matmul(k_in, w.w_k);
  const Var v = matmul(v_in, w.w_v);

  std::vector<Var> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const Var qh = heads == 1 ? q : slice_cols(q, h * d_a, d_a);
    const Var kh = heads == 1 ? k : slice_cols(k, h * d_a, d_a);
    const Var vh = heads == 1 ? v : slice_cols(v, h * d_a, d_a);
    Var logits = matmul_nt(qh, kh);
    if (hook) logits = hook(logits);
    const Var weights = masked_softmax(scale(logits, inv_sqrt), key_mask);
    if (weights_out) weights_out->push_back(weights);
    outs.push_back(matmul(weights, vh));
  }
  const Var joined = heads == 1 ? outs.front() : hcat(outs);
  return matmul(joined, w.w_o);
}

}  // namespace relife::nn
