#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spt/encoded.hpp"
#include "spt/schedule.hpp"
#include "spt/tagger.hpp"

namespace spt::fusion {

enum class FusionKind { kNone, kVanilla, kSelective };

std::string to_string(FusionKind kind);
FusionKind fusion_kind_from_string(const std::string& text);

/// Dynamic balance factor: 1 - sqrt(E^t / (sum_{m<=t} E^m + 1)).
double compute_alpha(const EntityTypeSchedule& schedule, std::size_t t);
/// Selection ratio: sigmoid(-(E^t - sum_{m<t} E^m - 1) / (sum_{m<=t} E^m + 1)).
/// Requires t >= 2.
double compute_gamma(const EntityTypeSchedule& schedule, std::size_t t);

/// Diagonal empirical Fisher: one non-negative tensor per weight of the model
/// it was estimated on, in the same order and shapes.
struct FisherMap {
  std::vector<NamedTensor> entries;
  std::size_t samples = 0;  // tokens averaged over

  const Tensor* find(const std::string& name) const;
};

struct FisherOptions {
  std::size_t max_sentences = 2048;
  std::uint64_t seed = 1;
};

/// Mean over tokens of the squared gradient of each token's cross-entropy
/// against its label. Sentences beyond the cap are subsampled (seeded, order
/// preserved). Throws ContractError on empty data.
FisherMap estimate_fisher(const ModelCheckpoint& model, std::span<const EncodedSentence> data,
                          const FisherOptions& options = {});

struct FusionPlan {
  double alpha = 0.0;
  double gamma = 0.0;
  std::size_t k = 0;
  double threshold_value = 0.0;
  std::size_t selected_count = 0;
  std::size_t total_count = 0;
  std::vector<std::string> fusable_names;
};

/// alpha * old + (1 - alpha) * new on every weight entry the old model has;
/// classifier rows that only exist in `new_model` are copied from it.
ModelCheckpoint fuse_vanilla(const ModelCheckpoint& old_model, const ModelCheckpoint& new_model, double alpha);

/// Fuses only entries whose Fisher value is >= the k-th largest over all
/// fusable entries, k = round(gamma * count); the rest keep new values. With
/// k == 0 the result is the new model and a warning is logged.
std::pair<ModelCheckpoint, FusionPlan> fuse_selective(const ModelCheckpoint& old_model,
                                                      const ModelCheckpoint& new_model, const FisherMap& fisher,
                                                      double alpha, double gamma);

/// Flat-vector core of fuse_selective: writes fused values into `fused`
/// (which starts as the new values) and returns the plan.
FusionPlan fuse_selective_flat(std::span<const double> old_values, std::span<double> fused,
                               std::span<const double> fisher, double alpha, double gamma);

}  // namespace spt::fusion
