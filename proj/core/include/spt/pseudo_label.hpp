#pragma once

#include <span>
#include <string>
#include <vector>

#include "spt/encoded.hpp"
#include "spt/schedule.hpp"
#include "spt/tagger.hpp"

// Pseudo-labels for tokens whose step-t label is O, taken from the frozen
// previous-step model and filtered by per-tag median-entropy thresholds.
// Rules apply at BIO-tag granularity over the old model's tag space.
namespace spt::pseudo {

enum class PseudoKind {
  kNone,        // targets are the step-t labels as given
  kNaive,       // every O token takes the old model's argmax
  kConfidence,  // ... only when its entropy is below that tag's threshold
};

std::string to_string(PseudoKind kind);
PseudoKind pseudo_kind_from_string(const std::string& text);

/// -sum p ln p with 0 ln 0 = 0.
double token_entropy(std::span<const double> probs);

/// Median; an even count averages the two middle values. Empty input gives 0.
double median(std::vector<double> values);

struct ConfidenceStats {
  std::vector<std::string> tags;  // the old model's tag space
  std::vector<double> tau;
  std::vector<std::size_t> population;

  std::size_t size() const { return tags.size(); }
};

/// Groups every label-O token by the old model's argmax tag and takes the
/// median entropy of each group; empty groups get tau = 0.
/// `old_probs[s]` is the old model's [n, C_old] distribution for sentence s.
ConfidenceStats thresholds_from_predictions(const std::vector<std::string>& old_tags,
                                            std::span<const Tensor> old_probs,
                                            std::span<const EncodedSentence> data);
ConfidenceStats compute_thresholds(const ModelCheckpoint& old_model, std::span<const EncodedSentence> data);

/// Per-token training targets: an [n, width] 0/1 matrix, each row one-hot or
/// all-zero (masked out of the loss).
struct PseudoTarget {
  std::size_t tokens = 0;
  std::size_t width = 0;
  std::vector<double> rows;
  std::vector<std::size_t> target_tag;  // argmax of each row, or width when masked
  std::size_t masked_count = 0;

  bool masked(std::size_t i) const { return target_tag[i] == width; }
};

// One-hot targets straight from the labels.
PseudoTarget label_targets(const EncodedSentence& sentence, std::size_t width);

/// Ground truth for entity-labeled tokens; for O-labeled tokens the old
/// model's argmax tag when kind allows it (strict u < tau for kConfidence),
/// otherwise an all-zero row. `old_probs` is [n, C_old] with C_old <= width.
PseudoTarget build_targets(std::span<const double> old_probs, std::size_t old_width,
                           const EncodedSentence& sentence, const ConfidenceStats& stats, std::size_t width,
                           PseudoKind kind);
PseudoTarget build_targets(const ModelCheckpoint& old_model, const EncodedSentence& sentence,
                           const ConfidenceStats& stats, std::size_t width, PseudoKind kind);

struct TokenWeighting {
  std::vector<std::vector<double>> eta;  // per sentence, per token
  std::size_t n_old = 0;
  std::size_t n_new = 0;
};

/// eta = 0.5 + sigmoid(N_old / N_new) for tokens targeted at an old entity
/// tag (indices 1 .. old_width-1), 1.0 otherwise. Counts span the whole batch;
/// N_new == 0 saturates the sigmoid (eta = 1.5).
TokenWeighting token_weights(std::span<const PseudoTarget* const> batch, std::size_t old_width);
TokenWeighting token_weights(std::span<const PseudoTarget* const> batch, const EntityTypeSchedule& schedule,
                             std::size_t t);

/// -(1/n) sum_i eta_i * target_i . log_probs_i; masked rows add 0 but count in n.
Tensor weighted_ce(const PredictionDistribution& prediction, const PseudoTarget& target,
                   std::span<const double> eta);

/// Per-tag audit of one step's pseudo-labeling pass.
struct PseudoAudit {
  std::size_t step = 0;
  ConfidenceStats stats;
  std::vector<std::size_t> retained;  // per old tag
  std::vector<std::size_t> rejected;  // per old tag
  std::size_t masked_count = 0;
  std::size_t ground_truth_tokens = 0;
};

}  // namespace spt::pseudo
