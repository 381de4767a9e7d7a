#pragma once

// Finite-difference checks over every differentiable operation and over the
// full training objective of a small configuration.

#include "relife/clicksim.hpp"
#include "relife/nn/gradcheck.hpp"
#include "relife/model.hpp"

#include <algorithm>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace relife {

struct GradCheckCase {
  std::string name;
  nn::GradCheckReport report;
};

namespace detail {

inline Matrix uniform_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double bound) {
  Matrix m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = (2 * clicksim::uniform01(rng) - 1) * bound;
  return m;
}

/// Sum of y weighted by a fixed pseudo-random matrix, so every entry of y matters.
inline Var readout(const Var& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return nn::sum_all(nn::hadamard(y, y.tape()->constant(uniform_matrix(rng, y.rows(), y.cols(), 1.0))));
}

}  // namespace detail

/// Two generated samples shaped for cfg, with the vocabularies taken from their schema.
inline std::pair<ModelConfig, std::vector<Sample>> gradcheck_batch(ModelConfig cfg, std::uint64_t seed) {
  clicksim::SynthConfig sc;
  sc.n_users = 2;
  sc.n_items = std::max(12, 2 * cfg.M * (cfg.N + 1));
  sc.n_categories = 3;
  sc.list_len = cfg.M;
  sc.n_history_lists = cfg.N;
  sc.dcm.seed = seed;
  auto ds = clicksim::synth_generate(sc);
  cfg.vocab_sizes = ds.schema.vocab_sizes();
  return {cfg, std::move(ds.samples)};
}

/// Runs every check. `cfg` sets the dimensions of the model-level cases.
inline std::vector<GradCheckCase> run_gradcheck_suite(const ModelConfig& base_cfg, std::uint64_t seed = 1) {
  using Fn = nn::ScalarFn;
  std::vector<GradCheckCase> out;
  std::mt19937_64 rng(seed);
  auto run = [&](const std::string& name, ParamRegistry reg, const Fn& f) {
    out.push_back({name, nn::grad_check(f, reg)});
  };
  auto P = [](Tape& t, ParamRegistry& p, const char* n) { return t.param(p, n); };
  auto R = [](const Var& y) { return detail::readout(y, 99); };

  // Primitive operations on small random operands.
  const Eigen::Index r = 3, c = 4, k = 2;
  ParamRegistry prim;
  prim.add("a", detail::uniform_matrix(rng, r, c, 1.0));
  prim.add("b", detail::uniform_matrix(rng, r, c, 1.0));
  prim.add("w", detail::uniform_matrix(rng, c, k, 1.0));
  prim.add("row", detail::uniform_matrix(rng, 1, c, 1.0));
  prim.add("sq", detail::uniform_matrix(rng, c, c, 1.0));
  prim.add("prob", (detail::uniform_matrix(rng, 4, 1, 0.4).array() + 0.5).matrix());
  nn::Mask mask(1, c);
  for (Eigen::Index j = 0; j < c; ++j) mask(0, j) = j != 1;

  const std::vector<std::pair<std::string, Fn>> primitives = {
      {"matmul", [&](Tape& t, ParamRegistry& p) { return R(nn::matmul(P(t, p, "a"), P(t, p, "w"))); }},
      {"matmul_nt", [&](Tape& t, ParamRegistry& p) { return R(nn::matmul_nt(P(t, p, "a"), P(t, p, "b"))); }},
      {"transpose", [&](Tape& t, ParamRegistry& p) { return R(nn::transpose(P(t, p, "a"))); }},
      {"add", [&](Tape& t, ParamRegistry& p) { return R(nn::add(P(t, p, "a"), P(t, p, "b"))); }},
      {"sub", [&](Tape& t, ParamRegistry& p) { return R(nn::sub(P(t, p, "a"), P(t, p, "b"))); }},
      {"add_row", [&](Tape& t, ParamRegistry& p) { return R(nn::add_row(P(t, p, "a"), P(t, p, "row"))); }},
      {"hadamard", [&](Tape& t, ParamRegistry& p) { return R(nn::hadamard(P(t, p, "a"), P(t, p, "b"))); }},
      {"scale", [&](Tape& t, ParamRegistry& p) { return R(nn::scale(P(t, p, "a"), -1.7)); }},
      {"one_minus", [&](Tape& t, ParamRegistry& p) { return R(nn::one_minus(P(t, p, "a"))); }},
      {"tanh", [&](Tape& t, ParamRegistry& p) { return R(nn::tanh(P(t, p, "a"))); }},
      {"sigmoid", [&](Tape& t, ParamRegistry& p) { return R(nn::sigmoid(P(t, p, "a"))); }},
      {"softplus", [&](Tape& t, ParamRegistry& p) { return R(nn::softplus(P(t, p, "a"))); }},
      {"log", [&](Tape& t, ParamRegistry& p) { return R(nn::log(P(t, p, "prob"))); }},
      {"leaky_relu", [&](Tape& t, ParamRegistry& p) { return R(nn::leaky_relu(P(t, p, "a"), 0.1)); }},
      {"masked_softmax", [&](Tape& t, ParamRegistry& p) { return R(nn::masked_softmax(P(t, p, "a"), mask)); }},
      {"log_softmax", [&](Tape& t, ParamRegistry& p) { return R(nn::log_softmax(P(t, p, "a"))); }},
      {"hcat", [&](Tape& t, ParamRegistry& p) { return R(nn::hcat({P(t, p, "a"), P(t, p, "b")})); }},
      {"vcat", [&](Tape& t, ParamRegistry& p) { return R(nn::vcat({P(t, p, "a"), P(t, p, "row")})); }},
      {"slice_cols", [&](Tape& t, ParamRegistry& p) { return R(nn::slice_cols(P(t, p, "a"), 1, c - 1)); }},
      {"slice_rows", [&](Tape& t, ParamRegistry& p) { return R(nn::slice_rows(P(t, p, "a"), 1, r - 1)); }},
      {"repeat_rows", [&](Tape& t, ParamRegistry& p) { return R(nn::repeat_rows(P(t, p, "row"), 3)); }},
      {"mean_rows", [&](Tape& t, ParamRegistry& p) { return R(nn::mean_rows(P(t, p, "a"))); }},
      {"sum_all", [&](Tape& t, ParamRegistry& p) { return nn::sum_all(nn::tanh(P(t, p, "a"))); }},
      {"reshape", [&](Tape& t, ParamRegistry& p) { return R(nn::reshape(P(t, p, "a"), c, r)); }},
      {"diag", [&](Tape& t, ParamRegistry& p) { return R(nn::diag(P(t, p, "sq"))); }},
      {"pairwise_add", [&](Tape& t, ParamRegistry& p) { return R(nn::pairwise_add(P(t, p, "a"), P(t, p, "b"))); }},
      {"gather_rows", [&](Tape& t, ParamRegistry& p) { return R(nn::gather_rows(P(t, p, "sq"), {1, 0, 3, 1}, 0)); }},
      {"affine", [&](Tape& t, ParamRegistry& p) { return R(nn::affine(P(t, p, "a"), P(t, p, "sq"), P(t, p, "row"))); }},
      {"bce_sum", [&](Tape& t, ParamRegistry& p) { return nn::bce_sum(P(t, p, "prob"), {1, 0, 0, 1}); }},
  };
  for (const auto& [name, f] : primitives) run(name, prim, f);

  // Layers.
  const Eigen::Index d = 4;
  ParamRegistry layer;
  for (const char* n : {"x", "h"}) layer.add(n, detail::uniform_matrix(rng, 3, d, 1.0));
  for (const char* n : {"W_Q", "W_K", "W_V", "W_O", "We"}) layer.add(n, detail::uniform_matrix(rng, d, d, 0.8));
  for (const char* n : {"Wx", "Wh"}) layer.add(n, detail::uniform_matrix(rng, d, 3, 0.8));
  layer.add("v", Matrix::Constant(1, 1, 0.3));
  auto attn = [&](Tape& t, ParamRegistry& p) {
    return nn::AttentionWeights{P(t, p, "W_Q"), P(t, p, "W_K"), P(t, p, "W_V"), P(t, p, "W_O")};
  };
  run("multi_head_attention", layer, [&](Tape& t, ParamRegistry& p) {
    const Var x = P(t, p, "x");
    return R(nn::multi_head_attention(x, x, x, attn(t, p), 2));
  });
  run("coattention", layer, [&](Tape& t, ParamRegistry& p) {
    const auto o = encoders::coattention(P(t, p, "x"), P(t, p, "h"), {true, false, true},
                                         {P(t, p, "We"), P(t, p, "Wx"), P(t, p, "Wh")});
    return nn::add(R(o.x_tilde), detail::readout(o.h_tilde, 7));
  });
  const Matrix comparison = cpe::comparison_matrix({1, 0, 1});
  run("influence_factors", layer,
      [&](Tape& t, ParamRegistry& p) { return R(cpe::influence_factors(comparison, P(t, p, "v"), 0.5)); });
  run("distance_aware_attention", layer, [&](Tape& t, ParamRegistry& p) {
    const Var c_hat = cpe::influence_factors(comparison, P(t, p, "v"), 0.5);
    return R(cpe::distance_aware_attention(P(t, p, "x"), c_hat, attn(t, p), 2));
  });
  run("aggregate_patterns", layer, [&](Tape& t, ParamRegistry& p) {
    return R(cpe::aggregate_patterns(P(t, p, "x"), P(t, p, "We"), nn::row(P(t, p, "h"), 0), nn::row(P(t, p, "h"), 1)).p_h);
  });
  run("infonce", layer, [&](Tape& t, ParamRegistry& p) { return cpe::infonce(P(t, p, "x"), P(t, p, "h"), 0.5); });

  ParamRegistry gru;
  const Eigen::Index din = 3, dg = 4;
  gru.add("seq", detail::uniform_matrix(rng, 5, din, 1.0));
  for (const char* g : {"z", "r", "n"}) {
    gru.add(std::string("W_") + g, detail::uniform_matrix(rng, din, dg, 0.8));
    gru.add(std::string("U_") + g, detail::uniform_matrix(rng, dg, dg, 0.8));
    gru.add(std::string("b_") + g, detail::uniform_matrix(rng, 1, dg, 0.3));
  }
  run("gru_forward", gru, [&](Tape& t, ParamRegistry& p) {
    const nn::GruWeights w{P(t, p, "W_z"), P(t, p, "U_z"), P(t, p, "b_z"), P(t, p, "W_r"), P(t, p, "U_r"),
                           P(t, p, "b_r"), P(t, p, "W_n"), P(t, p, "U_n"), P(t, p, "b_n")};
    return R(nn::gru_forward(P(t, p, "seq"), w, t.constant(Matrix::Zero(1, dg))));
  });

  // Full objective on a two-sample batch.
  const auto [cfg, samples] = gradcheck_batch(base_cfg, seed);
  std::vector<const Sample*> batch = {&samples[0], &samples[1]};
  run("total_loss", init_params(cfg), [&](Tape& t, ParamRegistry& p) {
    return batch_loss(forward_batch(t, batch, p, cfg, Mode::train), batch, cfg).total;
  });
  return out;
}

/// Configuration of the full-objective check: M=3, N=2, L=4, d_emb=4, two heads.
inline ModelConfig gradcheck_config() {
  ModelConfig cfg;
  cfg.M = 3;
  cfg.N = 2;
  cfg.L = 4;
  cfg.d_emb = 4;
  cfg.d_f = 4;
  cfg.d_gru = 4;
  cfg.heads = 2;
  cfg.mlp_widths = {8, 4};
  cfg.seed = 3;
  return cfg;
}

}  // namespace relife
