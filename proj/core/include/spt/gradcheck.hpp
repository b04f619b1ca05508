#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spt/tensor.hpp"

namespace spt {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

struct GradCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-4;
  // Relative error is |tape - numeric| / max(|tape|, |numeric|, floor).
  double denominator_floor = 1e-6;
  // 0 checks every entry; otherwise a seeded subset of this many per tensor.
  std::size_t max_entries_per_param = 0;
  std::uint64_t seed = 7;
};

struct ParamCheck {
  std::string name;
  std::size_t entries_checked = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
  bool passed = true;
};

/// Compares tape gradients of a scalar function against fourth-order central
/// finite differences. `loss_fn` must rebuild its graph from the current parameter
/// values on every call; parameters are perturbed in place and restored.
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, std::vector<NamedParam> params,
                           const GradCheckOptions& options = {});

}  // namespace spt
