#pragma once

#include "relife/nn/tensor.hpp"

#include <functional>
#include <initializer_list>
#include <unordered_map>
#include <utility>
#include <vector>

namespace relife::nn {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  [[nodiscard]] const Matrix& value() const;
  [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
  [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
  [[nodiscard]] std::size_t id() const { return id_; }
  [[nodiscard]] Tape* tape() const { return tape_; }
  [[nodiscard]] bool valid() const { return tape_ != nullptr; }
  [[nodiscard]] double scalar() const { return value()(0, 0); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode gradient tape. Every forward pass builds a fresh tape; nodes are
/// never mutated after being recorded. Parameter leaves reference registry storage
/// and flush their accumulated gradient into Tensor::grad on backward().
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) { nodes_.reserve(512); }

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  [[nodiscard]] bool grad_enabled() const { return grad_enabled_; }

  Var constant(Matrix v) {
    Node n;
    n.value = std::move(v);
    return push(std::move(n));
  }

  /// Leaf for a learnable tensor; repeated calls on the same tensor share one node.
  Var param(Tensor& t) {
    auto it = param_nodes_.find(&t);
    if (it != param_nodes_.end()) return Var(this, it->second);
    Node n;
    n.external = &t;
    n.requires_grad = grad_enabled_ && t.requires_grad;
    Var v = push(std::move(n));
    param_nodes_.emplace(&t, v.id());
    return v;
  }

  Var param(ParamRegistry& reg, const std::string& name) { return param(reg.at(name)); }

  /// Records an op output. The backward closure runs only if some input needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(std::move(value), std::vector<Var>(inputs), std::move(fn));
  }

  Var record(Matrix value, const std::vector<Var>& inputs, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    if (grad_enabled_) {
      for (const Var& in : inputs) {
        if (nodes_[in.id()].requires_grad) {
          n.requires_grad = true;
          break;
        }
      }
    }
    if (n.requires_grad) n.backward = std::move(fn);
    return push(std::move(n));
  }

  [[nodiscard]] const Matrix& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external ? n.external->value : n.value;
  }

  [[nodiscard]] bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Upstream gradient of a node during backward. Only valid inside a BackwardFn.
  [[nodiscard]] const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }

  template <class Expr>
  void accumulate(std::size_t id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Gradient storage of a node, zero-filled on first use, for ops that
  /// scatter into part of their input. Only valid inside a BackwardFn.
  Matrix& grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) {
      const Matrix& v = value(id);
      n.grad = Matrix::Zero(v.rows(), v.cols());
    }
    return n.grad;
  }

  /// Adds the gradient of a 1x1 loss into every reachable parameter's Tensor::grad.
  void backward(const Var& loss, double seed = 1.0) {
    if (loss.rows() != 1 || loss.cols() != 1) {
      throw ShapeError("backward expects a scalar loss, got " + shape_str(loss.value()));
    }
    if (!grad_enabled_) throw std::logic_error("backward on a tape with gradients disabled");
    Node& root = nodes_[loss.id()];
    if (!root.requires_grad) return;
    root.grad = Matrix::Constant(1, 1, seed);
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, id);
    }
    for (auto& [tensor, id] : param_nodes_) {
      Node& n = nodes_[id];
      if (n.grad.size() == 0) continue;
      if (!tensor->has_grad()) tensor->zero_grad();
      tensor->grad += n.grad;
    }
  }

  /// Gradient accumulated on a node by the last backward() (empty if unreached).
  [[nodiscard]] const Matrix& grad_of(const Var& v) const { return nodes_[v.id()].grad; }

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Tensor* external = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Node&& n) {
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  bool grad_enabled_;
  std::vector<Node> nodes_;
  std::unordered_map<Tensor*, std::size_t> param_nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }

}  // namespace relife::nn
