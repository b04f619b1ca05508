#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spt {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

// One vertex of the dynamic gradient tape. Leaves own persistent gradient
// buffers; interior nodes own scratch gradients that are reset at the start of
// every backward pass.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool is_leaf = true;
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node& self)> backward;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

/// Dense row-major tensor of 64-bit floats taking part in reverse-mode
/// differentiation.
///
/// A Tensor is a cheap handle: copies share the same storage and tape node.
/// Values produced by ops are immutable; only leaves (parameters) are mutated
/// in place, and only by optimizers and weight fusion.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Mutable access to a leaf's values. Throws ContractError on interior nodes.
  std::span<double> mutable_data();
  std::vector<double> to_vector() const;
  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t i, std::size_t j) const;
  double at(std::size_t i, std::size_t j, std::size_t k) const;

  bool requires_grad() const;
  // Only valid on leaves.
  void set_requires_grad(bool on);
  bool is_leaf() const;
  bool has_grad() const;
  // Gradient buffer; zeros when no backward pass has reached this tensor.
  std::vector<double> grad() const;
  std::span<const double> grad_view() const;
  void zero_grad();

  // Fresh leaf holding a copy of the values, cut off from the tape.
  Tensor detach() const;
  // Deep copy as a leaf with the given gradient flag.
  Tensor clone(bool requires_grad) const;

  /// Runs reverse-mode accumulation from this scalar. Leaf gradients
  /// accumulate across calls; interior gradients are recomputed. Returns the
  /// number of tape nodes visited (each exactly once).
  std::size_t backward() const;

  std::string_view op_name() const;

  // Internal: used by op implementations.
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Disables tape recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

}  // namespace spt
