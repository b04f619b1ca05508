#include "spt/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "spt/error.hpp"

namespace spt {
namespace {
thread_local bool t_grad_mode = true;

const detail::Node& checked(const std::shared_ptr<detail::Node>& node) {
  if (!node) throw ContractError("operation on an undefined tensor");
  return *node;
}
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_to_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return checked(node_).data.size(); }

std::span<const double> Tensor::data() const { return checked(node_).data; }

std::span<double> Tensor::mutable_data() {
  if (!checked(node_).is_leaf) throw ContractError("mutable_data on a non-leaf tensor");
  return node_->data;
}

std::vector<double> Tensor::to_vector() const {
  auto d = data();
  return {d.begin(), d.end()};
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_to_string(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t i) const { return data()[i]; }

double Tensor::at(std::size_t i, std::size_t j) const { return data()[i * dim(1) + j]; }

double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  return data()[(i * dim(1) + j) * dim(2) + k];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

void Tensor::set_requires_grad(bool on) {
  if (!checked(node_).is_leaf) throw ContractError("set_requires_grad on a non-leaf tensor");
  node_->requires_grad = on;
  if (!on) node_->grad.clear();
}

bool Tensor::is_leaf() const { return checked(node_).is_leaf; }

bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }

std::vector<double> Tensor::grad() const {
  const auto& n = checked(node_);
  if (n.grad.empty()) return std::vector<double>(n.data.size(), 0.0);
  return n.grad;
}

std::span<const double> Tensor::grad_view() const { return checked(node_).grad; }

void Tensor::zero_grad() {
  auto& n = *node_;
  if (!n.grad.empty()) std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

Tensor Tensor::detach() const { return clone(false); }

Tensor Tensor::clone(bool requires_grad) const {
  const auto& n = checked(node_);
  return from(n.shape, n.data, requires_grad);
}

std::string_view Tensor::op_name() const { return checked(node_).op; }

std::size_t Tensor::backward() const {
  const auto& root = checked(node_);
  if (root.data.size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_to_string(root.shape));
  }
  if (!root.requires_grad) return 0;

  // Iterative post-order DFS yields a topological order (inputs first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (n->is_leaf) {
      n->ensure_grad();
    } else {
      n->grad.assign(n->data.size(), 0.0);
    }
  }
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
  return order.size();
}

NoGradGuard::NoGradGuard() : previous_(t_grad_mode) { t_grad_mode = false; }
NoGradGuard::~NoGradGuard() { t_grad_mode = previous_; }

bool grad_mode_enabled() { return t_grad_mode; }

}  // namespace spt
