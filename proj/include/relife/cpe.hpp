#pragma once

// Comparison-aware pattern extraction: clicked items are compared against their
// neighbours in the same list, with an influence that decays with distance.

#include "relife/model_config.hpp"
#include "relife/nn/attention.hpp"
#include "relife/params.hpp"

#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

namespace relife::cpe {

using nn::Matrix;
using nn::ParamRegistry;
using nn::Tape;
using nn::Var;

inline void add_param_specs(const ModelConfig& cfg, std::vector<ParamSpec>& out) {
  if (!cfg.uses_cpe()) return;
  const int dx = cfg.d_x(), dh = cfg.d_h();
  auto attention = [&](const std::string& prefix) {
    for (const char* w : {"W_Q", "W_K", "W_V", "W_O"}) out.push_back({prefix + w, dh, dh});
    out.push_back({prefix + "v", 1, 1, Init::zeros});
  };
  attention("cpe.");
  if (!cfg.cpe_share_params) attention("cpe.cand.");
  out.push_back({"cpe.W_l", dh, dh});
  out.push_back({"cpe.b_l", 1, dh, Init::zeros});
  out.push_back({"cpe.query", 1, dh, Init::small_uniform});
  out.push_back({"cpe.W_c", dx, dh, Init::identity});
}

/// c_ij = |i - j| on rows whose item was clicked, 0 elsewhere.
inline Matrix comparison_matrix(const std::vector<int>& feedback) {
  const auto m = static_cast<Eigen::Index>(feedback.size());
  Matrix c = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const int f = feedback[static_cast<std::size_t>(i)];
    if (f != 0 && f != 1) throw std::invalid_argument("comparison_matrix: feedback must be 0 or 1");
    if (f == 0) continue;
    for (Eigen::Index j = 0; j < m; ++j) c(i, j) = static_cast<double>(std::abs(i - j));
  }
  return c;
}

/// f(c | v) = (1 + e^v) / (1 + e^(v + sigma c)); equals 1 at c = 0 and decreases in c.
inline double learnable_sigmoid(double c, double v, double sigma) {
  if (v <= 0) return (1.0 + std::exp(v)) / (1.0 + std::exp(v + sigma * c));
  // Same value with the e^v factor divided out, so large v cannot overflow.
  return (std::exp(-v) + 1.0) / (std::exp(-v) + std::exp(sigma * c));
}

/// Elementwise learnable sigmoid of a comparison matrix; `v` is a [1,1] parameter.
/// d f / d v = f (sigmoid(v) - sigmoid(v + sigma c)).
inline Var influence_factors(const Matrix& c, const Var& v, double sigma) {
  if (!(sigma > 0)) throw std::invalid_argument("influence_factors: sigma must be > 0");
  if (v.rows() != 1 || v.cols() != 1) throw nn::ShapeError("influence_factors: v must be [1,1]");
  const double vv = v.scalar();
  Matrix y(c.rows(), c.cols());
  for (Eigen::Index k = 0; k < c.size(); ++k) y.data()[k] = learnable_sigmoid(c.data()[k], vv, sigma);
  const std::size_t iv = v.id();
  return v.tape()->record(y, {v}, [iv, c, y, sigma](Tape& t, std::size_t self) {
    const double vv = t.value(iv)(0, 0);
    const Matrix& g = t.grad(self);
    const double sv = nn::detail::stable_sigmoid(vv);
    double total = 0;
    for (Eigen::Index k = 0; k < c.size(); ++k) {
      total += g.data()[k] * y.data()[k] * (sv - nn::detail::stable_sigmoid(vv + sigma * c.data()[k]));
    }
    t.accumulate(iv, Matrix::Constant(1, 1, total));
  });
}

/// Self-attention whose positive logits softplus(Q K^T) are scaled by the
/// influence factors before the sqrt(d_a) division; every head uses the same factors.
inline Var distance_aware_attention(const Var& h_t, const Var& c_hat, const nn::AttentionWeights& w, int heads,
                                    std::vector<Var>* weights_out = nullptr) {
  if (c_hat.rows() != h_t.rows() || c_hat.cols() != h_t.rows()) {
    throw nn::ShapeError("distance_aware_attention: influence matrix must be [" + std::to_string(h_t.rows()) + "," +
                         std::to_string(h_t.rows()) + "]");
  }
  auto hook = [&c_hat](const Var& logits) { return nn::hadamard(nn::softplus(logits), c_hat); };
  return nn::multi_head_attention(h_t, h_t, h_t, w, heads, hook, nullptr, weights_out);
}

/// Mean over the rows of one attended list.
inline Var list_pattern(const Var& o_t) { return nn::mean_rows(o_t); }

struct AggregatedPattern {
  Var p_h;    // [1, d_h]
  Var alpha;  // [1, N]
};

/// g_t = tanh(p_t W_l + b_l), alpha = softmax_t(g_t . query), p_h = sum_t alpha_t p_t.
inline AggregatedPattern aggregate_patterns(const Var& patterns, const Var& w_l, const Var& b_l, const Var& query) {
  const Var g = nn::tanh(nn::affine(patterns, w_l, b_l));
  const Var logits = nn::matmul_nt(query, g);  // [1, N]
  AggregatedPattern out;
  out.alpha = nn::masked_softmax(logits);
  out.p_h = nn::matmul(out.alpha, patterns);
  return out;
}

struct CpeWeights {
  nn::AttentionWeights attention;
  Var v;
};

inline CpeWeights cpe_weights(Tape& tape, ParamRegistry& params, const std::string& prefix) {
  return {{tape.param(params, prefix + "W_Q"), tape.param(params, prefix + "W_K"), tape.param(params, prefix + "W_V"),
           tape.param(params, prefix + "W_O")},
          tape.param(params, prefix + "v")};
}

/// Pattern of one list given its item embeddings and click feedback.
inline Var pattern_of_list(const Var& items, const std::vector<int>& feedback, const CpeWeights& w,
                           const ModelConfig& cfg) {
  const Var c_hat = influence_factors(comparison_matrix(feedback), w.v, cfg.sigma);
  return list_pattern(distance_aware_attention(items, c_hat, w.attention, cfg.heads));
}

struct HistoryPattern {
  Var patterns;  // [N, d_h], row t is p_t
  AggregatedPattern aggregated;
};

/// `lists[t]` holds the [M, d_h] embeddings of history list t, `feedback[t]` its clicks.
inline HistoryPattern history_pattern(const std::vector<Var>& lists, const std::vector<std::vector<int>>& feedback,
                                      Tape& tape, ParamRegistry& params, const ModelConfig& cfg) {
  if (lists.empty() || lists.size() != feedback.size()) {
    throw std::invalid_argument("history_pattern: need one feedback row per history list");
  }
  const CpeWeights w = cpe_weights(tape, params, "cpe.");
  std::vector<Var> rows;
  rows.reserve(lists.size());
  for (std::size_t t = 0; t < lists.size(); ++t) rows.push_back(pattern_of_list(lists[t], feedback[t], w, cfg));
  HistoryPattern out;
  out.patterns = rows.size() == 1 ? rows.front() : nn::vcat(rows);
  out.aggregated = aggregate_patterns(out.patterns, tape.param(params, "cpe.W_l"), tape.param(params, "cpe.b_l"),
                                      tape.param(params, "cpe.query"));
  return out;
}

/// Pattern of the candidate list under its click labels. Labels are only known
/// while training, so this path is never evaluated at inference.
inline Var candidate_pattern(const Var& x_hat, const std::vector<int>& labels, Tape& tape, ParamRegistry& params,
                             const ModelConfig& cfg) {
  const Var projected = nn::matmul(x_hat, tape.param(params, "cpe.W_c"));
  const CpeWeights w = cpe_weights(tape, params, cfg.cpe_share_params ? "cpe." : "cpe.cand.");
  return pattern_of_list(projected, labels, w, cfg);
}

/// In-batch InfoNCE: row u of p_h is scored against every candidate pattern in
/// the batch and the loss is the mean negative log-probability of its own.
inline Var infonce(const Var& p_c, const Var& p_h, double tau) {
  if (!(tau > 0)) throw std::invalid_argument("infonce: tau must be > 0");
  if (p_c.rows() != p_h.rows() || p_c.cols() != p_h.cols() || p_c.rows() < 1) {
    throw nn::ShapeError("infonce: pattern batches must have equal non-empty shapes");
  }
  const Var sim = nn::scale(nn::matmul_nt(p_h, p_c), 1.0 / tau);
  const Var log_probs = nn::diag(nn::log_softmax(sim));
  return nn::scale(nn::sum_all(log_probs), -1.0 / static_cast<double>(p_c.rows()));
}

}  // namespace relife::cpe
