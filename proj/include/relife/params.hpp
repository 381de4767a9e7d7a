#pragma once

#include "relife/nn/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace relife {

enum class Init {
  fan_in_uniform,  // U[-1/sqrt(rows), 1/sqrt(rows)]
  zeros,
  identity,        // rectangular identity
  embedding,       // U[-1/sqrt(cols), 1/sqrt(cols)], row 0 (pad) zero
  table,           // as embedding, without a pad row
  small_uniform,   // U[-0.1, 0.1]
};

struct ParamSpec {
  std::string name;
  int rows = 0;
  int cols = 0;
  Init init = Init::fan_in_uniform;
};

/// Creates every parameter and initializes them in sorted-name order from one
/// seeded stream, so two builds with the same seed are bitwise-identical.
inline nn::ParamRegistry build_registry(const std::vector<ParamSpec>& specs, std::uint64_t seed) {
  nn::ParamRegistry reg;
  std::map<std::string, const ParamSpec*> sorted;
  for (const auto& s : specs) {
    if (!sorted.emplace(s.name, &s).second) throw std::invalid_argument("duplicate parameter spec " + s.name);
  }
  std::mt19937_64 rng(seed);
  auto uniform = [&](double bound) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return (2 * u - 1) * bound;
  };
  for (const auto& [name, spec] : sorted) {
    nn::Matrix m = nn::Matrix::Zero(spec->rows, spec->cols);
    switch (spec->init) {
      case Init::fan_in_uniform: {
        const double b = 1.0 / std::sqrt(static_cast<double>(spec->rows));
        for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = uniform(b);
        break;
      }
      case Init::zeros: break;
      case Init::identity: m.setIdentity(); break;
      case Init::embedding:
      case Init::table: {
        const double b = 1.0 / std::sqrt(static_cast<double>(spec->cols));
        for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = uniform(b);
        if (spec->init == Init::embedding) m.row(0).setZero();
        break;
      }
      case Init::small_uniform:
        for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = uniform(0.1);
        break;
    }
    reg.add(name, std::move(m));
  }
  return reg;
}

}  // namespace relife
