#pragma once

#include <Eigen/Dense>

#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mrpd/errors.hpp"

namespace mrpd {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MatMap = Eigen::Map<RowMat<Scalar>>;
template <typename Scalar>
using ConstMatMap = Eigen::Map<const RowMat<Scalar>>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace detail {

inline thread_local bool grad_mode_enabled = true;

template <typename Scalar>
struct Node {
  Shape shape;
  Vec<Scalar> value;
  Vec<Scalar> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  Vec<Scalar>& grad_buffer() {
    if (grad.size() != value.size()) grad = Vec<Scalar>::Zero(value.size());
    return grad;
  }
};

}  // namespace detail

/// Disables tape recording on this thread for its lifetime (inference, finite differences).
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_enabled) { detail::grad_mode_enabled = false; }
  ~NoGradGuard() { detail::grad_mode_enabled = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline bool grad_enabled() { return detail::grad_mode_enabled; }

/// Dense row-major tensor handle. Copies share storage; use clone() for a deep copy.
template <typename Scalar = float>
class Tensor {
 public:
  using scalar_type = Scalar;
  using NodePtr = std::shared_ptr<detail::Node<Scalar>>;

  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = false) : node_(std::make_shared<detail::Node<Scalar>>()) {
    validate_shape(shape);
    node_->value = Vec<Scalar>::Zero(shape_size(shape));
    node_->shape = std::move(shape);
    node_->requires_grad = requires_grad;
  }

  Tensor(Shape shape, Vec<Scalar> values, bool requires_grad = false)
      : node_(std::make_shared<detail::Node<Scalar>>()) {
    validate_shape(shape);
    if (values.size() != shape_size(shape))
      throw DimensionError("tensor data length " + std::to_string(values.size()) + " does not match shape " +
                           shape_string(shape));
    node_->value = std::move(values);
    node_->shape = std::move(shape);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor constant(Shape shape, Scalar v) {
    Tensor t(std::move(shape));
    t.values().setConstant(v);
    return t;
  }

  static Tensor from(Shape shape, std::initializer_list<Scalar> values) {
    Vec<Scalar> v(static_cast<Index>(values.size()));
    Index i = 0;
    for (Scalar x : values) v[i++] = x;
    return Tensor(std::move(shape), std::move(v));
  }

  static Tensor scalar(Scalar v) { return Tensor({1}, Vec<Scalar>::Constant(1, v)); }

  explicit operator bool() const { return static_cast<bool>(node_); }

  const Shape& shape() const { return node_->shape; }
  Index rank() const { return static_cast<Index>(node_->shape.size()); }
  Index dim(Index i) const { return node_->shape[static_cast<std::size_t>(i)]; }
  Index size() const { return node_->value.size(); }
  Index rows() const { return rank() == 1 ? 1 : dim(0); }
  Index cols() const { return rank() == 1 ? dim(0) : size() / dim(0); }

  Vec<Scalar>& values() { return node_->value; }
  const Vec<Scalar>& values() const { return node_->value; }

  /// Row-major 2-D view. Rank-1 tensors view as a single row; higher ranks fold trailing dims.
  MatMap<Scalar> matrix() { return MatMap<Scalar>(node_->value.data(), rows(), cols()); }
  ConstMatMap<Scalar> matrix() const { return ConstMatMap<Scalar>(node_->value.data(), rows(), cols()); }

  Scalar item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
    return node_->value[0];
  }
  Scalar operator[](Index i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    node_->requires_grad = on;
    return *this;
  }

  bool has_grad() const { return node_->grad.size() == node_->value.size() && size() > 0; }
  const Vec<Scalar>& grad() const { return node_->grad; }
  Vec<Scalar>& grad() { return node_->grad_buffer(); }
  void zero_grad() {
    if (has_grad()) node_->grad.setZero();
  }
  void clear_grad() { node_->grad.resize(0); }

  Tensor clone() const { return Tensor(shape(), values(), requires_grad()); }

  const NodePtr& node() const { return node_; }
  bool same(const Tensor& other) const { return node_ == other.node_; }

  static Tensor wrap(NodePtr node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  static void validate_shape(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
    for (Index d : shape)
      if (d <= 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
  }

  NodePtr node_;
};

/// Ordered record of differentiable operations on this thread, replayed in reverse by backward().
template <typename Scalar>
class Tape {
 public:
  using NodePtr = std::shared_ptr<detail::Node<Scalar>>;

  static Tape& current() {
    thread_local Tape tape;
    return tape;
  }

  void record(NodePtr node) { ops_.push_back(std::move(node)); }
  std::size_t size() const { return ops_.size(); }

  void clear() {
    for (auto& node : ops_) release(*node);
    ops_.clear();
  }

  void backward(const Tensor<Scalar>& loss) {
    if (!loss) throw ContractError("backward on an empty tensor");
    if (loss.size() != 1)
      throw ContractError("backward requires a scalar loss, got shape " + shape_string(loss.shape()));
    auto& root = *loss.node();
    root.grad_buffer().setConstant(Scalar(1));
    // Creation order is a topological order, so its reverse visits every op after all its consumers.
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
      auto& node = **it;
      if (node.backward && node.grad.size() == node.value.size()) node.backward(node);
    }
    clear();
  }

 private:
  static void release(detail::Node<Scalar>& node) {
    node.backward = nullptr;
    node.inputs.clear();
  }

  std::vector<NodePtr> ops_;
};

template <typename Scalar>
void backward(const Tensor<Scalar>& loss) {
  Tape<Scalar>::current().backward(loss);
}

namespace detail {

/// Builds the result of a differentiable op. `rule(grad_out, inputs)` is recorded only when
/// grad mode is on and some input requires a gradient.
template <typename Scalar, typename Rule>
Tensor<Scalar> make_result(Shape shape, Vec<Scalar> value, std::initializer_list<Tensor<Scalar>> inputs,
                           Rule&& rule) {
  Tensor<Scalar> out(std::move(shape), std::move(value));
  if (!grad_mode_enabled) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  for (const auto& in : inputs) node.inputs.push_back(in.node());
  node.backward = [rule = std::forward<Rule>(rule)](Node<Scalar>& self) { rule(self.grad, self.inputs); };
  Tape<Scalar>::current().record(out.node());
  return out;
}

template <typename Scalar, typename Rule>
Tensor<Scalar> make_result(Shape shape, Vec<Scalar> value, std::span<const Tensor<Scalar>> inputs, Rule&& rule) {
  Tensor<Scalar> out(std::move(shape), std::move(value));
  if (!grad_mode_enabled) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  for (const auto& in : inputs) node.inputs.push_back(in.node());
  node.backward = [rule = std::forward<Rule>(rule)](Node<Scalar>& self) { rule(self.grad, self.inputs); };
  Tape<Scalar>::current().record(out.node());
  return out;
}

/// Grad accumulator of an input, or nullptr when that input does not need one.
template <typename Scalar>
Vec<Scalar>* grad_of(const std::shared_ptr<Node<Scalar>>& node) {
  return node->requires_grad ? &node->grad_buffer() : nullptr;
}

}  // namespace detail

/// Named learnable tensor, the unit of checkpoints and optimizer state.
template <typename Scalar>
struct NamedParameter {
  std::string name;
  Tensor<Scalar> tensor;
};

template <typename Scalar>
using ParameterList = std::vector<NamedParameter<Scalar>>;

}  // namespace mrpd
