#pragma once

#include "relife/relife.hpp"

#include <gtest/gtest.h>

#include <random>

namespace relife::testing {

using nn::Matrix;
using nn::ParamRegistry;
using nn::Tape;
using nn::Var;

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

/// Registry holding the given named random tensors.
inline ParamRegistry random_registry(std::mt19937_64& rng,
                                     const std::vector<std::tuple<std::string, Eigen::Index, Eigen::Index>>& shapes,
                                     double scale = 1.0) {
  ParamRegistry reg;
  for (const auto& [name, r, c] : shapes) reg.add(name, random_matrix(rng, r, c, scale));
  return reg;
}

/// Fixed random readout so that every output coordinate matters to the scalar.
inline Var weighted_sum(const Var& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  const Matrix w = random_matrix(rng, y.rows(), y.cols());
  return nn::sum_all(nn::hadamard(y, y.tape()->constant(w)));
}

inline void expect_grad_ok(const nn::ScalarFn& f, ParamRegistry& reg, double tol = 1e-4) {
  const auto report = nn::grad_check(f, reg);
  EXPECT_LT(report.max_rel_err, tol) << "worst coordinate " << report.worst;
  EXPECT_GT(report.coords_checked, 0u);
}

/// Small ModelConfig for two fields with tiny vocabularies.
inline ModelConfig tiny_config(Variant v = Variant::full) {
  ModelConfig cfg;
  cfg.M = 3;
  cfg.N = 2;
  cfg.L = 4;
  cfg.d_emb = 4;
  cfg.d_f = 3;
  cfg.d_gru = 5;
  cfg.heads = 2;
  cfg.mlp_widths = {6, 4};
  cfg.vocab_sizes = {7, 4};
  cfg.batch_size = 2;
  cfg.seed = 5;
  return make_variant(cfg, v);
}

/// Random sample shaped for cfg with ids drawn from its vocabularies.
inline Sample random_sample(const ModelConfig& cfg, std::mt19937_64& rng, std::int64_t user = 0) {
  auto item = [&]() {
    FeatureVector fv;
    for (int v : cfg.vocab_sizes) fv.field_values.push_back(1 + static_cast<int>(rng() % (v - 1)));
    return fv;
  };
  Sample s;
  s.user_id = user;
  for (int t = 0; t < cfg.N; ++t) {
    std::vector<FeatureVector> list;
    std::vector<int> fb;
    for (int i = 0; i < cfg.M; ++i) {
      list.push_back(item());
      fb.push_back(static_cast<int>(rng() % 2));
    }
    s.history.push_back(list);
    s.feedback.push_back(fb);
    s.list_timestamps.push_back(100 + 10 * t);
  }
  for (int i = 0; i < cfg.M; ++i) {
    s.candidate.push_back(item());
    s.labels.push_back(static_cast<int>(rng() % 2));
  }
  return s;
}

}  // namespace relife::testing
