#pragma once

// Embedding layer, intra-candidate context (self-attention over the candidate
// list), the disentangled interest miner (twin co-attention over positive and
// negative history) and the sequential preference mixer (GRU + candidate-aware
// attention over the chronological history).

#include "relife/datamodel.hpp"
#include "relife/model_config.hpp"
#include "relife/nn/attention.hpp"
#include "relife/nn/gru.hpp"
#include "relife/params.hpp"

#include <string>
#include <vector>

namespace relife::encoders {

using nn::Mask;
using nn::Matrix;
using nn::ParamRegistry;
using nn::Tape;
using nn::Var;

inline std::string field_table_name(std::size_t field) { return "emb.field." + std::to_string(field); }

inline void add_param_specs(const ModelConfig& cfg, std::vector<ParamSpec>& out) {
  const int dx = cfg.d_x(), dh = cfg.d_h();
  for (std::size_t k = 0; k < cfg.vocab_sizes.size(); ++k) {
    out.push_back({field_table_name(k), cfg.vocab_sizes[k], cfg.d_emb, Init::embedding});
  }
  out.push_back({"emb.feedback", 2, cfg.d_f, Init::table});
  if (cfg.uses_icc()) {
    for (const char* w : {"W_Q", "W_K", "W_V", "W_O"}) out.push_back({std::string("icc.") + w, dx, dx});
  }
  if (cfg.uses_dim()) {
    for (const char* side : {"pos", "neg"}) {
      const std::string p = std::string("dim.") + side + ".";
      out.push_back({p + "W_e", dx, dh});
      out.push_back({p + "W_x", dx, cfg.M});
      out.push_back({p + "W_h", dh, cfg.M});
    }
  }
  if (cfg.uses_spm()) {
    const int din = dx + cfg.d_f;
    for (const char* g : {"z", "r", "n"}) {
      out.push_back({std::string("spm.gru.W_") + g, din, cfg.d_gru});
      out.push_back({std::string("spm.gru.U_") + g, cfg.d_gru, cfg.d_gru});
      out.push_back({std::string("spm.gru.b_") + g, 1, cfg.d_gru, Init::zeros});
    }
    out.push_back({"spm.att.W_x", dx, cfg.d_gru});
    out.push_back({"spm.att.W_h", cfg.d_gru, cfg.d_gru});
    out.push_back({"spm.att.b", 1, cfg.d_gru, Init::zeros});
    out.push_back({"spm.att.w", cfg.d_gru, 1});
  }
}

// ---------------------------------------------------------------------------
// Embedding

/// Field embeddings of each item, concatenated: [items, fields * d_emb].
inline Var embed_items(Tape& tape, const std::vector<FeatureVector>& items, ParamRegistry& params,
                       const ModelConfig& cfg) {
  const auto fields = static_cast<std::size_t>(cfg.field_count());
  std::vector<Var> parts;
  for (std::size_t k = 0; k < fields; ++k) {
    std::vector<int> ids;
    ids.reserve(items.size());
    for (const auto& fv : items) {
      if (fv.field_values.size() != fields) {
        throw std::invalid_argument("item has " + std::to_string(fv.field_values.size()) + " fields, expected " +
                                    std::to_string(fields));
      }
      ids.push_back(fv.field_values[k]);
    }
    parts.push_back(nn::gather_rows(tape.param(params, field_table_name(k)), ids, 0));
  }
  return parts.size() == 1 ? parts.front() : nn::hcat(parts);
}

/// Feedback embeddings: row 0 of the table for a skip, row 1 for a click.
inline Var embed_feedback(Tape& tape, const std::vector<int>& feedback, ParamRegistry& params) {
  for (int f : feedback) {
    if (f != 0 && f != 1) throw std::out_of_range("feedback value " + std::to_string(f) + " is not binary");
  }
  return nn::gather_rows(tape.param(params, "emb.feedback"), feedback);
}

// ---------------------------------------------------------------------------
// Intra-candidate context

inline nn::AttentionWeights attention_weights(Tape& tape, ParamRegistry& params, const std::string& prefix) {
  return {tape.param(params, prefix + "W_Q"), tape.param(params, prefix + "W_K"), tape.param(params, prefix + "W_V"),
          tape.param(params, prefix + "W_O")};
}

/// Multi-head self-attention over the candidate list; row i is x~_i.
inline Var icc(const Var& x_hat, Tape& tape, ParamRegistry& params, int heads,
               std::vector<Var>* weights_out = nullptr) {
  return nn::multi_head_attention(x_hat, x_hat, x_hat, attention_weights(tape, params, "icc."), heads, {}, nullptr,
                                  weights_out);
}

// ---------------------------------------------------------------------------
// Co-attention and the disentangled interest miner

struct CoAttentionWeights {
  Var w_e;  // [d_x, d_h]
  Var w_x;  // [d_x, M]
  Var w_h;  // [d_h, M]
};

struct CoAttentionOutput {
  Var x_tilde;  // [M, d_x]
  Var h_tilde;  // [M, d_h]
  Var affinity; // E, [M, L]
  Var a_x;      // [M, M]
  Var a_h;      // [M, L]
};

/// E   = tanh(X W_e H^T)
/// A_x = softmax(tanh(X W_x + E (H W_h)))
/// A_h = softmax(tanh((H W_h)^T + (X W_x) E)), padded history columns excluded
/// X~  = A_x X,  H~ = A_h H
inline CoAttentionOutput coattention(const Var& x_hat, const Var& h_side, const std::vector<bool>& mask,
                                     const CoAttentionWeights& w) {
  if (static_cast<Eigen::Index>(mask.size()) != h_side.rows()) throw nn::ShapeError("coattention: mask length");
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
    throw std::invalid_argument("coattention: every history entry is masked");
  }
  Mask key_mask(1, static_cast<Eigen::Index>(mask.size()));
  for (std::size_t j = 0; j < mask.size(); ++j) key_mask(0, static_cast<Eigen::Index>(j)) = mask[j];

  CoAttentionOutput out;
  out.affinity = nn::tanh(nn::matmul_nt(nn::matmul(x_hat, w.w_e), h_side));
  const Var xw = nn::matmul(x_hat, w.w_x);   // [M, M]
  const Var hw = nn::matmul(h_side, w.w_h);  // [L, M]
  out.a_x = nn::masked_softmax(nn::tanh(nn::add(xw, nn::matmul(out.affinity, hw))));
  out.a_h = nn::masked_softmax(nn::tanh(nn::add(nn::transpose(hw), nn::matmul(xw, out.affinity))), &key_mask);
  out.x_tilde = nn::matmul(out.a_x, x_hat);
  out.h_tilde = nn::matmul(out.a_h, h_side);
  return out;
}

struct DisentangledInterest {
  Var q_pos;  // [M, d_x + d_h]
  Var q_neg;  // [M, d_x + d_h]
  Var q;      // [M, 2 (d_x + d_h)]
  CoAttentionOutput pos;
  CoAttentionOutput neg;
};

inline CoAttentionWeights coattention_weights(Tape& tape, ParamRegistry& params, const std::string& prefix) {
  return {tape.param(params, prefix + "W_e"), tape.param(params, prefix + "W_x"), tape.param(params, prefix + "W_h")};
}

/// A side with no real entries attends to its first (pad) slot, whose embedding is zero.
inline std::vector<bool> attendable_mask(std::vector<bool> mask) {
  if (!mask.empty() && std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) mask[0] = true;
  return mask;
}

/// Runs the positive and negative co-attention branches (separate weights).
inline DisentangledInterest dim_interest(const Var& x_hat, const Var& pos_hist, const std::vector<bool>& pos_mask,
                                         const Var& neg_hist, const std::vector<bool>& neg_mask, Tape& tape,
                                         ParamRegistry& params) {
  DisentangledInterest out;
  out.pos = coattention(x_hat, pos_hist, attendable_mask(pos_mask), coattention_weights(tape, params, "dim.pos."));
  out.neg = coattention(x_hat, neg_hist, attendable_mask(neg_mask), coattention_weights(tape, params, "dim.neg."));
  out.q_pos = nn::hcat({out.pos.x_tilde, out.pos.h_tilde});
  out.q_neg = nn::hcat({out.neg.x_tilde, out.neg.h_tilde});
  out.q = nn::hcat({out.q_pos, out.q_neg});
  return out;
}

// ---------------------------------------------------------------------------
// Sequential preference mixer

struct SequentialPreference {
  Var s;        // [M, d_gru]
  Var weights;  // [M, N*M], row i is the attention of candidate i over history
  Var gru_out;  // [N*M, d_gru]
};

inline nn::GruWeights gru_weights(Tape& tape, ParamRegistry& params) {
  auto p = [&](const char* n) { return tape.param(params, std::string("spm.gru.") + n); };
  return {p("W_z"), p("U_z"), p("b_z"), p("W_r"), p("U_r"), p("b_r"), p("W_n"), p("U_n"), p("b_n")};
}

/// GRU over [item ; feedback] embeddings of the chronological history, then
/// for each candidate a softmax over a(x_i, h~_j) = w^T tanh(x_i W_x + h~_j W_h + b).
inline SequentialPreference spm(const Var& x_hat, const Var& flat_items, const Var& flat_feedback, Tape& tape,
                                ParamRegistry& params, const ModelConfig& cfg) {
  if (flat_items.rows() < 1) throw std::invalid_argument("spm: empty history");
  SequentialPreference out;
  const Var seq = nn::hcat({flat_items, flat_feedback});
  const Var h0 = tape.constant(Matrix::Zero(1, cfg.d_gru));
  out.gru_out = nn::gru_forward(seq, gru_weights(tape, params), h0);

  const Eigen::Index m = x_hat.rows(), t = out.gru_out.rows();
  const Var cand_part = nn::matmul(x_hat, tape.param(params, "spm.att.W_x"));
  const Var hist_part = nn::add_row(nn::matmul(out.gru_out, tape.param(params, "spm.att.W_h")),
                                    tape.param(params, "spm.att.b"));
  const Var hidden = nn::tanh(nn::pairwise_add(cand_part, hist_part));  // [m*t, d_gru]
  const Var logits = nn::reshape(nn::matmul(hidden, tape.param(params, "spm.att.w")), m, t);
  out.weights = nn::masked_softmax(logits);
  out.s = nn::matmul(out.weights, out.gru_out);
  return out;
}

}  // namespace relife::encoders
