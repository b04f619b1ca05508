#include "spt/optimizer.hpp"

#include <cmath>

#include "spt/error.hpp"

namespace spt {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::kSgd ? "sgd" : "adam"; }

OptimizerKind optimizer_kind_from_string(const std::string& text) {
  if (text == "sgd") return OptimizerKind::kSgd;
  if (text == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + text + "' (expected sgd or adam)");
}

Optimizer::Optimizer(std::vector<Tensor> params, double lr) : params_(std::move(params)), lr_(lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
  for (const auto& p : params_) {
    if (!p.is_leaf() || !p.requires_grad()) throw ContractError("optimizer parameters must be trainable leaves");
  }
}

void Optimizer::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

Sgd::Sgd(std::vector<Tensor> params, double lr) : Optimizer(std::move(params), lr) {}

void Sgd::step() {
  for (auto& p : params_) {
    auto g = p.grad_view();
    if (g.empty()) continue;
    auto w = p.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr_ * g[i];
  }
}

Adam::Adam(std::vector<Tensor> params, double lr, AdamSettings settings)
    : Optimizer(std::move(params), lr), settings_(settings) {
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(settings_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(settings_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto g = params_[k].grad_view();
    if (g.empty()) continue;
    auto w = params_[k].mutable_data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = settings_.beta1 * m[i] + (1.0 - settings_.beta1) * g[i];
      v[i] = settings_.beta2 * v[i] + (1.0 - settings_.beta2) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + settings_.epsilon);
    }
  }
}

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, std::vector<Tensor> params, double lr) {
  if (kind == OptimizerKind::kSgd) return std::make_unique<Sgd>(std::move(params), lr);
  return std::make_unique<Adam>(std::move(params), lr);
}

}  // namespace spt
