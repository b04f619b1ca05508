#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spt/distill.hpp"
#include "spt/encoded.hpp"
#include "spt/fusion.hpp"
#include "spt/metrics.hpp"
#include "spt/optimizer.hpp"
#include "spt/pseudo_label.hpp"
#include "spt/schedule.hpp"
#include "spt/slicing.hpp"
#include "spt/tagger.hpp"

namespace spt {

/// Which anti-forgetting components a run enables.
struct MethodVariant {
  distill::DistillKind distill = distill::DistillKind::kPkd;
  fusion::FusionKind fusion = fusion::FusionKind::kSelective;
  pseudo::PseudoKind pseudo = pseudo::PseudoKind::kConfidence;
  bool eta_weighting = true;

  bool operator==(const MethodVariant&) const = default;
};

MethodVariant spt_method();
MethodVariant ft_method();

/// Named presets: spt, ft and the single-component ablations
/// w-kd, w-pkd-lax, wo-pkd, w-vwf, wo-wsm, wo-threshold, wo-pseudo.
/// Throws ConfigError on an unknown name.
MethodVariant method_from_name(const std::string& name);
const std::vector<std::string>& method_names();
// Preset name for a variant, or "custom".
std::string method_name(const MethodVariant& method);

struct TrainConfig {
  double lambda = 2.0;
  double lr = 1e-3;
  std::size_t batch_size = 8;
  std::size_t epochs_pg1 = 10;
  std::size_t epochs_pgn = 20;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::uint64_t seed = 1;
  MethodVariant method;
  TaggerConfig model;
  std::size_t fisher_max_sentences = 2048;
  // Count N_old / N_new for eta over the whole step instead of per batch.
  bool eta_per_dataset = false;
  // Score types without gold or predicted spans as F1 = 0 in Ma-F1.
  bool absent_types_score_zero = true;

  // Throws ConfigError listing every violated invariant.
  void validate() const;
  std::size_t epochs_for(const EntityTypeSchedule& schedule) const;
};

/// One continual step's training material.
struct StepInputs {
  std::size_t step = 1;
  // Labels indexed into the step's full tag space (old tags first).
  std::vector<EncodedSentence> train;
  // Dev sentences masked to the step's own types, for epoch selection.
  std::vector<TaggedSentence> dev;
  std::vector<std::string> dev_types;
  const Vocabulary* vocab = nullptr;
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double dev_mi_f1 = 0.0;
};

struct TrainResult {
  ModelCheckpoint model;
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  std::optional<pseudo::PseudoAudit> audit;
};

/// Old-model outputs reused across every epoch of a step.
struct OldModelCache {
  std::vector<AttentionTrace> traces;
  std::vector<pseudo::PseudoTarget> targets;
  pseudo::PseudoAudit audit;
};

/// Runs the frozen old model once over the step's training data: attention
/// traces for distillation and (per `kind`) pseudo-label targets.
OldModelCache precompute_old_outputs(const ModelCheckpoint& old_model, std::span<const EncodedSentence> train,
                                     std::size_t width, pseudo::PseudoKind kind, std::size_t step);

/// Epoch loop over mean_s(weighted CE_s + lambda * distill_s) per batch. At
/// step 1 (no old model) only the CE term applies. Returns the weights of the
/// epoch with the best dev Mi-F1 (latest on ties), before fusion.
/// Throws TrainingError on a non-finite batch loss.
TrainResult train_step(const ModelCheckpoint& model, const ModelCheckpoint* old_model, const StepInputs& inputs,
                       const TrainConfig& cfg, std::size_t epochs);

struct FusionOutcome {
  ModelCheckpoint model;
  std::optional<fusion::FusionPlan> plan;
};

/// Merges the previous step's model into the freshly trained one per
/// cfg.method.fusion. Selective fusion uses `cached` when it matches the old
/// model and otherwise re-estimates Fisher on `prev_train` with a warning.
FusionOutcome fisher_then_fuse(const ModelCheckpoint& old_model, const ModelCheckpoint& new_model,
                               const fusion::FisherMap* cached, std::span<const EncodedSentence> prev_train,
                               const EntityTypeSchedule& schedule, std::size_t t, const TrainConfig& cfg);

/// Span-level scores of a model on gold-labeled sentences.
StepReport evaluate(const ModelCheckpoint& model, const Vocabulary& vocab, const std::vector<TaggedSentence>& gold,
                    const std::vector<std::string>& types_old, const std::vector<std::string>& types_new,
                    const F1Options& options = {});

struct StepOutcome {
  std::size_t step = 0;
  const StepReport* report = nullptr;
  const ModelCheckpoint* model = nullptr;  // post-fusion
  const TrainResult* training = nullptr;
  const std::optional<fusion::FusionPlan>* plan = nullptr;
};

struct RunResult {
  ModelCheckpoint final_model;
  std::vector<StepReport> reports;
  Vocabulary vocab;
};

/// Trains through every step of the schedule, fusing from step 2 on, and
/// scores each step on the test pool masked to all types seen so far.
/// `on_step` fires after each step, before the next one begins.
RunResult run_continual(const SlicedDataset& data, const EntityTypeSchedule& schedule, const TrainConfig& cfg,
                        const std::function<void(const StepOutcome&)>& on_step = {});

}  // namespace spt
