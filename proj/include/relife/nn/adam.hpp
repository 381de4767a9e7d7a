#pragma once

#include "relife/nn/tensor.hpp"

#include <cmath>
#include <cstdint>

namespace relife::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::map<std::string, Matrix> m;
  std::map<std::string, Matrix> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update using the gradients stored in the registry.
/// Tensors the loss did not reach carry a zero gradient and keep their moments decaying.
inline void adam_step(ParamRegistry& params, AdamState& state) {
  for (auto& [name, t] : params) {
    if (!t.has_grad()) throw std::logic_error("adam_step: missing gradient for " + name);
  }
  state.step += 1;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (auto& [name, t] : params) {
    Matrix& m = state.m.try_emplace(name, Matrix::Zero(t.value.rows(), t.value.cols())).first->second;
    Matrix& v = state.v.try_emplace(name, Matrix::Zero(t.value.rows(), t.value.cols())).first->second;
    m = c.beta1 * m + (1.0 - c.beta1) * t.grad;
    v = c.beta2 * v + (1.0 - c.beta2) * t.grad.cwiseAbs2();
    t.value.array() -= c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
  }
}

}  // namespace relife::nn
