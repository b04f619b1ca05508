#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spt/gradcheck.hpp"
#include "spt/tagger.hpp"

namespace spt {

struct LossPathCheck {
  std::string path;  // ce, kd, pkd-lax, pkd, weighted-ce, total
  GradCheckReport report;
};

struct GradCheckSuiteOptions {
  std::uint64_t seed = 7;
  AttentionMode mode = AttentionMode::kPreSoftmax;
  double lambda = 2.0;
  GradCheckOptions check;
};

/// Finite-difference checks of every training loss path on a seeded
/// L=2, K=2, d=32 tagger, with respect to every weight of the trained model.
std::vector<LossPathCheck> run_gradcheck_suite(const GradCheckSuiteOptions& options = {});

}  // namespace spt
