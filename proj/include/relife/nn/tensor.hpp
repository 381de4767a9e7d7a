#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace relife::nn {

/// Dense row-major matrix of 64-bit reals. Vectors are stored as 1 x d rows.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
  return "[" + std::to_string(rows) + "," + std::to_string(cols) + "]";
}

inline std::string shape_str(const Matrix& m) { return shape_str(m.rows(), m.cols()); }

/// A learnable (or plain) dense value with an optional gradient buffer.
struct Tensor {
  Matrix value;
  Matrix grad;
  bool requires_grad = true;

  Tensor() = default;
  explicit Tensor(Matrix v, bool trainable = true)
      : value(std::move(v)), requires_grad(trainable) {
    if (requires_grad) grad = Matrix::Zero(value.rows(), value.cols());
  }

  [[nodiscard]] std::vector<std::size_t> shape() const {
    return {static_cast<std::size_t>(value.rows()), static_cast<std::size_t>(value.cols())};
  }
  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(value.size()); }
  [[nodiscard]] bool has_grad() const {
    return grad.rows() == value.rows() && grad.cols() == value.cols();
  }
  void zero_grad() {
    if (!has_grad()) grad.resize(value.rows(), value.cols());
    grad.setZero();
  }
};

/// Named learnable tensors, iterated in sorted-name order.
class ParamRegistry {
 public:
  using Map = std::map<std::string, Tensor>;

  Tensor& add(const std::string& name, Matrix init) {
    auto [it, inserted] = params_.try_emplace(name, std::move(init), true);
    if (!inserted) throw std::invalid_argument("duplicate parameter name: " + name);
    return it->second;
  }

  [[nodiscard]] bool contains(const std::string& name) const { return params_.count(name) != 0; }

  Tensor& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
  }
  [[nodiscard]] const Tensor& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
  }

  void zero_grad() {
    for (auto& [_, t] : params_) t.zero_grad();
  }

  [[nodiscard]] std::size_t size() const { return params_.size(); }
  [[nodiscard]] std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : params_) n += t.size();
    return n;
  }

  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }
  [[nodiscard]] Map::const_iterator begin() const { return params_.begin(); }
  [[nodiscard]] Map::const_iterator end() const { return params_.end(); }

  [[nodiscard]] std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, _] : params_) out.push_back(name);
    return out;
  }

 private:
  Map params_;
};

}  // namespace relife::nn
