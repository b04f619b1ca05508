#include "spt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <utility>

#include "spt/error.hpp"
#include "spt/log.hpp"
#include "spt/ops.hpp"

namespace spt {
namespace {

using distill::DistillKind;
using fusion::FusionKind;
using pseudo::PseudoKind;

const std::vector<std::pair<std::string, MethodVariant>>& presets() {
  static const std::vector<std::pair<std::string, MethodVariant>> table = {
      {"spt", {DistillKind::kPkd, FusionKind::kSelective, PseudoKind::kConfidence, true}},
      {"ft", {DistillKind::kNone, FusionKind::kNone, PseudoKind::kNone, false}},
      {"w-kd", {DistillKind::kKd, FusionKind::kSelective, PseudoKind::kConfidence, true}},
      {"w-pkd-lax", {DistillKind::kPkdLax, FusionKind::kSelective, PseudoKind::kConfidence, true}},
      {"wo-pkd", {DistillKind::kNone, FusionKind::kSelective, PseudoKind::kConfidence, true}},
      {"w-vwf", {DistillKind::kPkd, FusionKind::kVanilla, PseudoKind::kConfidence, true}},
      {"wo-wsm", {DistillKind::kPkd, FusionKind::kNone, PseudoKind::kConfidence, true}},
      {"wo-threshold", {DistillKind::kPkd, FusionKind::kSelective, PseudoKind::kNaive, true}},
      {"wo-pseudo", {DistillKind::kPkd, FusionKind::kSelective, PseudoKind::kNone, false}},
  };
  return table;
}

std::vector<std::string> ordered_types_before(const EntityTypeSchedule& schedule, std::size_t t) {
  std::vector<std::string> out;
  for (std::size_t m = 1; m < t; ++m) {
    const auto& types = schedule.types_at(m);
    out.insert(out.end(), types.begin(), types.end());
  }
  return out;
}

std::vector<std::string> decode_tags(const ModelCheckpoint& model, const std::vector<std::size_t>& ids) {
  std::vector<std::string> tags;
  tags.reserve(ids.size());
  for (auto id : ids) tags.push_back(model.tag_space.at(id));
  return tags;
}

std::vector<std::vector<double>> snapshot(const ModelCheckpoint& model) {
  std::vector<std::vector<double>> out;
  out.reserve(model.weights.size());
  for (const auto& w : model.weights) out.push_back(w.value.to_vector());
  return out;
}

void restore(ModelCheckpoint& model, const std::vector<std::vector<double>>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = model.weights[i].value.mutable_data();
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

bool fisher_matches(const fusion::FisherMap& fisher, const ModelCheckpoint& model) {
  for (const auto& w : model.weights) {
    const Tensor* f = fisher.find(w.name);
    if (f == nullptr || f->shape() != w.value.shape()) return false;
  }
  return true;
}

std::size_t argmax(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

MethodVariant spt_method() { return presets()[0].second; }
MethodVariant ft_method() { return presets()[1].second; }

MethodVariant method_from_name(const std::string& name) {
  for (const auto& [key, method] : presets())
    if (key == name) return method;
  std::string known;
  for (const auto& [key, method] : presets()) known += (known.empty() ? "" : ", ") + key;
  throw ConfigError("unknown method '" + name + "' (expected one of: " + known + ")");
}

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [key, method] : presets()) out.push_back(key);
    return out;
  }();
  return names;
}

std::string method_name(const MethodVariant& method) {
  for (const auto& [key, preset] : presets())
    if (preset == method) return key;
  return "custom";
}

void TrainConfig::validate() const {
  std::vector<std::string> problems;
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) problems.push_back("lambda must be >= 0");
  if (!(lr > 0.0) || !std::isfinite(lr)) problems.push_back("lr must be > 0");
  if (batch_size == 0) problems.push_back("batch_size must be >= 1");
  if (epochs_pg1 == 0) problems.push_back("epochs_pg1 must be >= 1");
  if (epochs_pgn == 0) problems.push_back("epochs_pgn must be >= 1");
  try {
    model.validate();
  } catch (const ConfigError& e) {
    problems.push_back(e.what());
  }
  if (problems.empty()) return;
  std::string msg = "invalid training config: ";
  for (std::size_t i = 0; i < problems.size(); ++i) msg += (i ? "; " : "") + problems[i];
  throw ConfigError(msg);
}

std::size_t TrainConfig::epochs_for(const EntityTypeSchedule& schedule) const {
  return schedule.pg == 1 ? epochs_pg1 : epochs_pgn;
}

OldModelCache precompute_old_outputs(const ModelCheckpoint& old_model, std::span<const EncodedSentence> train,
                                     std::size_t width, PseudoKind kind, std::size_t step) {
  NoGradGuard guard;
  const std::size_t old_width = old_model.tag_space.size();
  std::vector<Tensor> probs;
  OldModelCache cache;
  probs.reserve(train.size());
  cache.traces.reserve(train.size());
  for (const auto& s : train) {
    auto out = forward(old_model, s.token_ids);
    probs.push_back(out.prediction.probs);
    cache.traces.push_back(std::move(out.trace));
  }

  auto& audit = cache.audit;
  audit.step = step;
  audit.retained.assign(old_width, 0);
  audit.rejected.assign(old_width, 0);
  if (kind == PseudoKind::kConfidence) {
    audit.stats = pseudo::thresholds_from_predictions(old_model.tag_space, probs, train);
  } else {
    audit.stats.tags = old_model.tag_space;
  }

  cache.targets.reserve(train.size());
  for (std::size_t s = 0; s < train.size(); ++s) {
    auto target = pseudo::build_targets(probs[s].data(), old_width, train[s], audit.stats, width, kind);
    auto p = probs[s].data();
    for (std::size_t i = 0; i < target.tokens; ++i) {
      if (train[s].tag_ids[i] != 0) {
        ++audit.ground_truth_tokens;
        continue;
      }
      if (kind == PseudoKind::kNone) continue;
      const std::size_t e = argmax(p.subspan(i * old_width, old_width));
      if (target.masked(i)) {
        ++audit.rejected[e];
      } else {
        ++audit.retained[e];
      }
    }
    audit.masked_count += target.masked_count;
    cache.targets.push_back(std::move(target));
  }
  return cache;
}

TrainResult train_step(const ModelCheckpoint& model, const ModelCheckpoint* old_model, const StepInputs& inputs,
                       const TrainConfig& cfg, std::size_t epochs) {
  if (inputs.train.empty()) throw ContractError("train_step: empty training slice");
  if (inputs.vocab == nullptr) throw ContractError("train_step: vocabulary missing");
  if (epochs == 0) throw ConfigError("train_step: epochs must be >= 1");
  if (inputs.step >= 2 && old_model == nullptr) throw ContractError("train_step: steps >= 2 need the old model");

  const auto& method = cfg.method;
  const bool use_old = old_model != nullptr && inputs.step >= 2;
  const bool distilling = use_old && method.distill != DistillKind::kNone && cfg.lambda > 0.0;
  const PseudoKind pseudo_kind = use_old ? method.pseudo : PseudoKind::kNone;
  const std::size_t width = model.tag_space.size();
  const std::size_t old_width = use_old ? old_model->tag_space.size() : 0;

  TrainResult result;
  result.model = clone_trainable(model);
  auto& net = result.model;

  std::vector<pseudo::PseudoTarget> targets;
  std::vector<AttentionTrace> old_traces;
  if (use_old && (distilling || pseudo_kind != PseudoKind::kNone)) {
    auto cache = precompute_old_outputs(*old_model, inputs.train, width, pseudo_kind, inputs.step);
    targets = std::move(cache.targets);
    old_traces = std::move(cache.traces);
    if (pseudo_kind != PseudoKind::kNone) result.audit = std::move(cache.audit);
  } else {
    targets.reserve(inputs.train.size());
    for (const auto& s : inputs.train) targets.push_back(pseudo::label_targets(s, width));
  }

  std::vector<std::vector<double>> dataset_eta;
  if (use_old && method.eta_weighting && cfg.eta_per_dataset) {
    std::vector<const pseudo::PseudoTarget*> all;
    for (const auto& t : targets) all.push_back(&t);
    dataset_eta = pseudo::token_weights(all, old_width).eta;
  }

  auto optimizer = make_optimizer(cfg.optimizer, net.parameters(), cfg.lr);
  std::seed_seq seq{cfg.seed, static_cast<std::uint64_t>(inputs.step), std::uint64_t{0x7a1e}};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(inputs.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<std::vector<double>> best;
  double best_score = -1.0;
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const pseudo::PseudoTarget*> batch_targets;
      for (std::size_t b = start; b < end; ++b) batch_targets.push_back(&targets[order[b]]);
      pseudo::TokenWeighting weights;
      if (use_old && method.eta_weighting && !cfg.eta_per_dataset) {
        weights = pseudo::token_weights(batch_targets, old_width);
      }

      std::vector<Tensor> losses;
      losses.reserve(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        const auto& target = targets[idx];
        auto out = forward(net, inputs.train[idx].token_ids);
        std::vector<double> eta = !weights.eta.empty()        ? std::move(weights.eta[b - start])
                                  : !dataset_eta.empty() ? dataset_eta[idx]
                                                         : std::vector<double>(target.tokens, 1.0);
        Tensor loss = pseudo::weighted_ce(out.prediction, target, eta);
        if (distilling) {
          loss = ops::add(loss, ops::scale(distill::distillation_loss(method.distill, out.trace, old_traces[idx]),
                                           cfg.lambda));
        }
        losses.push_back(loss);
      }
      Tensor batch_loss = ops::scale(ops::add_n(losses), 1.0 / static_cast<double>(losses.size()));
      const double value = batch_loss.item();
      if (!std::isfinite(value)) {
        throw TrainingError("non-finite loss at step " + std::to_string(inputs.step) + ", epoch " +
                            std::to_string(epoch) + ", batch " + std::to_string(batches));
      }
      optimizer->zero_grad();
      batch_loss.backward();
      optimizer->step();
      loss_total += value;
      ++batches;
    }

    EpochLog log_entry;
    log_entry.epoch = epoch;
    log_entry.mean_loss = loss_total / static_cast<double>(batches);
    if (!inputs.dev.empty()) {
      log_entry.dev_mi_f1 = evaluate(net, *inputs.vocab, inputs.dev, {}, inputs.dev_types).mi_f1_all;
    }
    result.epochs.push_back(log_entry);
    // Ties (and runs without dev data) go to the later epoch.
    const double score = inputs.dev.empty() ? 0.0 : log_entry.dev_mi_f1;
    if (score >= best_score) {
      best_score = score;
      best = snapshot(net);
      result.best_epoch = epoch;
    }
  }
  restore(net, best);
  return result;
}

FusionOutcome fisher_then_fuse(const ModelCheckpoint& old_model, const ModelCheckpoint& new_model,
                               const fusion::FisherMap* cached, std::span<const EncodedSentence> prev_train,
                               const EntityTypeSchedule& schedule, std::size_t t, const TrainConfig& cfg) {
  if (t < 2) throw ContractError("fisher_then_fuse: fusion starts at step 2");
  FusionOutcome outcome;
  const auto kind = cfg.method.fusion;
  if (kind == FusionKind::kNone) {
    outcome.model = new_model;
    return outcome;
  }
  const double alpha = fusion::compute_alpha(schedule, t);
  if (kind == FusionKind::kVanilla) {
    outcome.model = fusion::fuse_vanilla(old_model, new_model, alpha);
    fusion::FusionPlan plan;
    plan.alpha = alpha;
    plan.gamma = 1.0;
    plan.total_count = old_model.parameter_count();
    plan.k = plan.total_count;
    plan.selected_count = plan.total_count;
    plan.threshold_value = -std::numeric_limits<double>::infinity();
    for (const auto& w : old_model.weights) plan.fusable_names.push_back(w.name);
    outcome.plan = std::move(plan);
    return outcome;
  }
  fusion::FisherMap recomputed;
  const fusion::FisherMap* fisher = cached;
  if (fisher == nullptr || !fisher_matches(*fisher, old_model)) {
    log::warning("fisher_then_fuse: no cached Fisher information for step " + std::to_string(t - 1) +
                 "; recomputing");
    recomputed = fusion::estimate_fisher(old_model, prev_train, {cfg.fisher_max_sentences, cfg.seed});
    fisher = &recomputed;
  }
  auto [model, plan] =
      fusion::fuse_selective(old_model, new_model, *fisher, alpha, fusion::compute_gamma(schedule, t));
  log::info("fusion at step " + std::to_string(t) + ": alpha=" + std::to_string(plan.alpha) +
            " gamma=" + std::to_string(plan.gamma) + " selected " + std::to_string(plan.selected_count) + "/" +
            std::to_string(plan.total_count));
  outcome.model = std::move(model);
  outcome.plan = std::move(plan);
  return outcome;
}

StepReport evaluate(const ModelCheckpoint& model, const Vocabulary& vocab, const std::vector<TaggedSentence>& gold,
                    const std::vector<std::string>& types_old, const std::vector<std::string>& types_new,
                    const F1Options& options) {
  std::vector<std::vector<Span>> gold_spans, pred_spans;
  gold_spans.reserve(gold.size());
  pred_spans.reserve(gold.size());
  for (const auto& s : gold) {
    gold_spans.push_back(extract_spans(s.tags));
    pred_spans.push_back(extract_spans(decode_tags(model, predict_tags(model, vocab.encode(s.tokens)))));
  }
  return f1_scores(gold_spans, pred_spans, types_old, types_new, options);
}

RunResult run_continual(const SlicedDataset& data, const EntityTypeSchedule& schedule, const TrainConfig& cfg,
                        const std::function<void(const StepOutcome&)>& on_step) {
  cfg.validate();
  const std::size_t steps = schedule.num_steps();
  if (data.num_steps() != steps) {
    throw ScheduleError("dataset has " + std::to_string(data.num_steps()) + " slices but the schedule has " +
                        std::to_string(steps) + " steps");
  }

  RunResult run;
  std::vector<TaggedSentence> all_train;
  for (const auto& slice : data.train) all_train.insert(all_train.end(), slice.begin(), slice.end());
  run.vocab = Vocabulary::build(all_train);

  TaggerConfig model_cfg = cfg.model;
  model_cfg.vocab_size = run.vocab.size();
  model_cfg.seed = cfg.seed;
  std::size_t longest = 0;
  for (const auto* pool : {&std::as_const(all_train), &data.dev, &data.test})
    for (const auto& s : *pool) longest = std::max(longest, s.tokens.size());
  if (longest > model_cfg.max_len) {
    log::info("raising max_len from " + std::to_string(model_cfg.max_len) + " to " + std::to_string(longest));
    model_cfg.max_len = longest;
  }
  const F1Options f1_options{cfg.absent_types_score_zero};
  const std::size_t epochs = cfg.epochs_for(schedule);

  ModelCheckpoint current = init_model(model_cfg);
  current.vocabulary = run.vocab.tokens();
  std::optional<fusion::FisherMap> fisher;
  std::vector<EncodedSentence> prev_train;

  for (std::size_t t = 1; t <= steps; ++t) {
    ModelCheckpoint old_model;
    if (t >= 2) old_model = clone_frozen(current);
    ModelCheckpoint start = expand_head(current, schedule.tags_at(t));
    start.step_index = t;

    StepInputs inputs;
    inputs.step = t;
    inputs.train = encode_all(data.train_slice(t), run.vocab, start.tag_space);
    inputs.dev = data.dev_view(schedule, t);
    inputs.dev_types = schedule.types_at(t);
    inputs.vocab = &run.vocab;

    TrainResult trained = train_step(start, t >= 2 ? &old_model : nullptr, inputs, cfg, epochs);

    std::optional<fusion::FusionPlan> plan;
    if (t >= 2) {
      auto fused = fisher_then_fuse(old_model, trained.model, fisher ? &*fisher : nullptr, prev_train, schedule,
                                    t, cfg);
      current = std::move(fused.model);
      plan = std::move(fused.plan);
    } else {
      current = trained.model;
    }
    current.step_index = t;

    if (cfg.method.fusion == FusionKind::kSelective && t < steps) {
      fisher = fusion::estimate_fisher(current, inputs.train, {cfg.fisher_max_sentences, cfg.seed});
    }
    prev_train = std::move(inputs.train);

    run.reports.push_back(evaluate(current, run.vocab, data.test_view(schedule, t), ordered_types_before(schedule, t),
                                   schedule.types_at(t), f1_options));
    run.reports.back().step = t;

    if (on_step) {
      StepOutcome outcome;
      outcome.step = t;
      outcome.report = &run.reports.back();
      outcome.model = &current;
      outcome.training = &trained;
      outcome.plan = &plan;
      on_step(outcome);
    }
  }
  run.final_model = std::move(current);
  return run;
}

}  // namespace spt
