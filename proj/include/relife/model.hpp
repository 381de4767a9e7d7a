#pragma once

// Full scoring model: candidate context, disentangled interests, sequential
// preference and the history pattern feed an MLP that scores each candidate.

#include "relife/cpe.hpp"
#include "relife/datamodel.hpp"
#include "relife/encoders.hpp"

#include <string>
#include <vector>

namespace relife {

using nn::Matrix;
using nn::ParamRegistry;
using nn::Tape;
using nn::Var;

/// In infer mode the candidate labels are never read.
enum class Mode { train, infer };

inline std::string mlp_weight_name(std::size_t layer) { return "mlp.W_" + std::to_string(layer); }
inline std::string mlp_bias_name(std::size_t layer) { return "mlp.b_" + std::to_string(layer); }

/// Every learnable tensor of the configured variant.
inline std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
  std::vector<ParamSpec> specs;
  encoders::add_param_specs(cfg, specs);
  cpe::add_param_specs(cfg, specs);
  int in = cfg.mlp_input_width();
  for (std::size_t k = 0; k < cfg.mlp_widths.size(); ++k) {
    specs.push_back({mlp_weight_name(k), in, cfg.mlp_widths[k]});
    specs.push_back({mlp_bias_name(k), 1, cfg.mlp_widths[k], Init::zeros});
    in = cfg.mlp_widths[k];
  }
  specs.push_back({"mlp.W_out", in, 1});
  specs.push_back({"mlp.b_out", 1, 1, Init::zeros});
  return specs;
}

inline ParamRegistry init_params(const ModelConfig& cfg) {
  cfg.validate();
  return build_registry(param_specs(cfg), cfg.seed);
}

struct ForwardOutputs {
  Var scores;   // [M, 1], sigmoid outputs
  Var x_tilde;  // [M, d_x] (x_hat itself when the context layer is ablated)
  Var q;        // [M, 2 (d_x + d_h)], if the interest miner runs
  Var s;        // [M, d_gru], if the sequential mixer runs
  Var p_h;      // [1, d_h], if the pattern extractor runs
  Var p_c;      // [1, d_h], train mode with the contrastive term only
  Var mlp_input;

  [[nodiscard]] std::vector<double> score_values() const {
    const Matrix& v = scores.value();
    return {v.data(), v.data() + v.size()};
  }
};

namespace detail {

inline void check_sample_shape(const Sample& s, const ModelConfig& cfg) {
  if (static_cast<int>(s.candidate.size()) != cfg.M) {
    throw std::invalid_argument("sample has " + std::to_string(s.candidate.size()) + " candidates, config M=" +
                                std::to_string(cfg.M));
  }
  if (static_cast<int>(s.history.size()) != cfg.N) {
    throw std::invalid_argument("sample has " + std::to_string(s.history.size()) + " history lists, config N=" +
                                std::to_string(cfg.N));
  }
}

/// Everything the MLP sees except the MLP itself.
inline ForwardOutputs encode(Tape& tape, const Sample& sample, ParamRegistry& params, const ModelConfig& cfg,
                             Mode mode) {
  check_sample_shape(sample, cfg);
  ForwardOutputs out;
  const Var x_hat = encoders::embed_items(tape, sample.candidate, params, cfg);
  out.x_tilde = cfg.uses_icc() ? encoders::icc(x_hat, tape, params, cfg.heads) : x_hat;

  std::vector<Var> parts;
  if (cfg.uses_dim()) {
    const SplitHistory split = split_by_feedback(sample, cfg.L);
    const Var pos = encoders::embed_items(tape, split.pos_items, params, cfg);
    const Var neg = encoders::embed_items(tape, split.neg_items, params, cfg);
    out.q = encoders::dim_interest(x_hat, pos, split.pos_mask, neg, split.neg_mask, tape, params).q;
    parts.push_back(out.q);
  }

  Var flat_items;
  FlatHistory flat;
  if (cfg.uses_spm() || cfg.uses_cpe()) {
    flat = flatten_chronological(sample);
    flat_items = encoders::embed_items(tape, flat.items, params, cfg);
  }
  if (cfg.uses_cpe()) {
    const auto m = static_cast<Eigen::Index>(cfg.M);
    std::vector<Var> lists;
    std::vector<std::vector<int>> feedback;
    for (int t = 0; t < cfg.N; ++t) {
      lists.push_back(nn::slice_rows(flat_items, t * m, m));
      feedback.emplace_back(flat.feedback.begin() + t * cfg.M, flat.feedback.begin() + (t + 1) * cfg.M);
    }
    out.p_h = cpe::history_pattern(lists, feedback, tape, params, cfg).aggregated.p_h;
    if (cfg.pattern_in_mlp()) parts.push_back(nn::repeat_rows(out.p_h, m));
    if (mode == Mode::train && cfg.uses_infonce()) {
      out.p_c = cpe::candidate_pattern(x_hat, sample.labels, tape, params, cfg);
    }
  }
  if (cfg.uses_spm()) {
    const Var fb = encoders::embed_feedback(tape, flat.feedback, params);
    out.s = encoders::spm(x_hat, flat_items, fb, tape, params, cfg).s;
    parts.push_back(out.s);
  }
  parts.push_back(out.x_tilde);
  out.mlp_input = parts.size() == 1 ? parts.front() : nn::hcat(parts);
  if (out.mlp_input.cols() != cfg.mlp_input_width()) {
    throw nn::ShapeError("mlp input width " + std::to_string(out.mlp_input.cols()) + " != configured " +
                         std::to_string(cfg.mlp_input_width()));
  }
  return out;
}

/// LeakyReLU hidden layers, sigmoid output; rows are scored independently.
inline Var mlp(const Var& input, Tape& tape, ParamRegistry& params, const ModelConfig& cfg) {
  Var h = input;
  for (std::size_t k = 0; k < cfg.mlp_widths.size(); ++k) {
    h = nn::leaky_relu(nn::affine(h, tape.param(params, mlp_weight_name(k)), tape.param(params, mlp_bias_name(k))),
                       cfg.leaky_alpha);
  }
  return nn::sigmoid(nn::affine(h, tape.param(params, "mlp.W_out"), tape.param(params, "mlp.b_out")));
}

}  // namespace detail

/// Scores of one sample: y_i = sigmoid(MLP([q_i ; p_h ; s_i ; x~_i])).
inline ForwardOutputs forward(Tape& tape, const Sample& sample, ParamRegistry& params, const ModelConfig& cfg,
                              Mode mode) {
  ForwardOutputs out = detail::encode(tape, sample, params, cfg, mode);
  out.scores = detail::mlp(out.mlp_input, tape, params, cfg);
  return out;
}

/// Infer-mode scores on a gradient-free tape.
inline std::vector<double> predict(const Sample& sample, ParamRegistry& params, const ModelConfig& cfg) {
  Tape tape(false);
  return forward(tape, sample, params, cfg, Mode::infer).score_values();
}

struct BatchForward {
  std::vector<ForwardOutputs> samples;
  Var scores;  // [B*M, 1], sample b occupies rows [b*M, (b+1)*M)
  Var p_h;     // [B, d_h] when the pattern extractor runs
  Var p_c;     // [B, d_h] in train mode with the contrastive term
};

/// Forward pass over a mini-batch; the MLP runs once on all stacked candidates.
inline BatchForward forward_batch(Tape& tape, const std::vector<const Sample*>& batch, ParamRegistry& params,
                                  const ModelConfig& cfg, Mode mode) {
  if (batch.empty()) throw std::invalid_argument("forward_batch: empty batch");
  BatchForward out;
  std::vector<Var> inputs, ph, pc;
  for (const Sample* s : batch) {
    out.samples.push_back(detail::encode(tape, *s, params, cfg, mode));
    inputs.push_back(out.samples.back().mlp_input);
    if (out.samples.back().p_h.valid()) ph.push_back(out.samples.back().p_h);
    if (out.samples.back().p_c.valid()) pc.push_back(out.samples.back().p_c);
  }
  out.scores = detail::mlp(inputs.size() == 1 ? inputs.front() : nn::vcat(inputs), tape, params, cfg);
  const auto m = static_cast<Eigen::Index>(cfg.M);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    out.samples[b].scores = nn::slice_rows(out.scores, static_cast<Eigen::Index>(b) * m, m);
  }
  if (!ph.empty()) out.p_h = ph.size() == 1 ? ph.front() : nn::vcat(ph);
  if (!pc.empty()) out.p_c = pc.size() == 1 ? pc.front() : nn::vcat(pc);
  return out;
}

/// Binary cross-entropy summed over the list (scores clamped to [1e-7, 1 - 1e-7]).
inline Var utility_loss(const Var& scores, const std::vector<int>& labels) {
  return nn::bce_sum(scores, std::vector<double>(labels.begin(), labels.end()));
}

inline double total_loss(double utility, double info, double beta) { return utility + beta * info; }

inline Var total_loss(const Var& utility, const Var& info, double beta) {
  return nn::add(utility, nn::scale(info, beta));
}

struct BatchLoss {
  Var utility;  // per-list BCE sum, averaged over the batch
  Var info;     // InfoNCE, invalid when the contrastive term is off
  Var total;
};

inline BatchLoss batch_loss(const BatchForward& fwd, const std::vector<const Sample*>& batch, const ModelConfig& cfg) {
  std::vector<int> labels;
  for (const Sample* s : batch) labels.insert(labels.end(), s->labels.begin(), s->labels.end());
  BatchLoss out;
  out.utility = nn::scale(utility_loss(fwd.scores, labels), 1.0 / static_cast<double>(batch.size()));
  out.total = out.utility;
  if (cfg.uses_infonce() && fwd.p_c.valid()) {
    out.info = cpe::infonce(fwd.p_c, fwd.p_h, cfg.tau);
    out.total = total_loss(out.utility, out.info, cfg.beta);
  }
  return out;
}

}  // namespace relife
