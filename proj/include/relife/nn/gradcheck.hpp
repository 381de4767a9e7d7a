#pragma once

#include "relife/nn/tape.hpp"

#include <cmath>
#include <functional>
#include <string>

namespace relife::nn {

struct GradCheckReport {
  double max_rel_err = 0;
  double max_abs_err = 0;
  std::string worst;  // "name[index]" of the coordinate with the largest relative error
  std::size_t coords_checked = 0;
};

/// Builds a scalar on the given tape, reading learnable inputs from the registry.
using ScalarFn = std::function<Var(Tape&, ParamRegistry&)>;

/// Compares reverse-mode gradients of f with central differences for every
/// coordinate of every tensor in `inputs`. The relative error of a coordinate
/// is |a - n| / max(|a|, |n|, abs_floor).
inline GradCheckReport grad_check(const ScalarFn& f, ParamRegistry& inputs, double eps = 1e-5,
                                  double abs_floor = 1e-6) {
  inputs.zero_grad();
  {
    Tape tape(true);
    const Var out = f(tape, inputs);
    tape.backward(out);
  }
  auto eval = [&]() {
    Tape tape(false);
    return f(tape, inputs).scalar();
  };

  GradCheckReport report;
  for (auto& [name, t] : inputs) {
    for (Eigen::Index k = 0; k < t.value.size(); ++k) {
      double& x = t.value.data()[k];
      const double orig = x;
      x = orig + eps;
      const double fp = eval();
      x = orig - eps;
      const double fm = eval();
      x = orig;
      const double numeric = (fp - fm) / (2 * eps);
      const double analytic = t.grad.data()[k];
      const double abs_err = std::abs(analytic - numeric);
      const double rel = abs_err / std::max({std::abs(analytic), std::abs(numeric), abs_floor});
      report.max_abs_err = std::max(report.max_abs_err, abs_err);
      if (report.worst.empty() || rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = name + "[" + std::to_string(k) + "]";
      }
      ++report.coords_checked;
    }
  }
  return report;
}

}  // namespace relife::nn
