#pragma once

#include <memory>
#include <string>
#include <vector>

#include "spt/tensor.hpp"

namespace spt {

enum class OptimizerKind { kSgd, kAdam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& text);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Updates trainable leaf tensors in place from their accumulated gradients.
/// Parameters without a gradient are skipped for that step.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step() = 0;
  void zero_grad();
  const std::vector<Tensor>& parameters() const { return params_; }

 protected:
  explicit Optimizer(std::vector<Tensor> params, double lr);
  std::vector<Tensor> params_;
  double lr_;
};

// theta <- theta - lr * g
class Sgd final : public Optimizer {
 public:
  Sgd(std::vector<Tensor> params, double lr);
  void step() override;
};

// Bias-corrected first/second moment update.
class Adam final : public Optimizer {
 public:
  Adam(std::vector<Tensor> params, double lr, AdamSettings settings = {});
  void step() override;

 private:
  AdamSettings settings_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, std::vector<Tensor> params, double lr);

}  // namespace spt
