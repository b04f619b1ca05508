#include "spt/pseudo_label.hpp"

#include <algorithm>
#include <cmath>

#include "spt/error.hpp"
#include "spt/ops.hpp"

namespace spt::pseudo {
namespace {

std::size_t argmax(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

void check_old_probs(std::span<const double> probs, std::size_t old_width, const EncodedSentence& sentence) {
  if (old_width == 0 || probs.size() != sentence.size() * old_width) {
    throw DimensionError("old-model predictions do not match the sentence length / old tag space");
  }
}

}  // namespace

std::string to_string(PseudoKind kind) {
  switch (kind) {
    case PseudoKind::kNone: return "none";
    case PseudoKind::kNaive: return "naive";
    case PseudoKind::kConfidence: return "confidence";
  }
  return "none";
}

PseudoKind pseudo_kind_from_string(const std::string& text) {
  if (text == "none") return PseudoKind::kNone;
  if (text == "naive") return PseudoKind::kNaive;
  if (text == "confidence") return PseudoKind::kConfidence;
  throw ConfigError("unknown pseudo-labeling kind '" + text + "'");
}

double token_entropy(std::span<const double> probs) {
  double u = 0.0;
  for (double p : probs)
    if (p > 0.0) u -= p * std::log(p);
  return u;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

ConfidenceStats thresholds_from_predictions(const std::vector<std::string>& old_tags,
                                            std::span<const Tensor> old_probs,
                                            std::span<const EncodedSentence> data) {
  if (old_probs.size() != data.size()) throw DimensionError("one old-model prediction per sentence is required");
  const std::size_t c = old_tags.size();
  std::vector<std::vector<double>> groups(c);
  for (std::size_t s = 0; s < data.size(); ++s) {
    auto probs = old_probs[s].data();
    check_old_probs(probs, c, data[s]);
    for (std::size_t i = 0; i < data[s].size(); ++i) {
      if (data[s].tag_ids[i] != 0) continue;
      auto row = probs.subspan(i * c, c);
      groups[argmax(row)].push_back(token_entropy(row));
    }
  }
  ConfidenceStats stats;
  stats.tags = old_tags;
  for (auto& g : groups) {
    stats.population.push_back(g.size());
    stats.tau.push_back(median(std::move(g)));
  }
  return stats;
}

ConfidenceStats compute_thresholds(const ModelCheckpoint& old_model, std::span<const EncodedSentence> data) {
  NoGradGuard guard;
  std::vector<Tensor> probs;
  probs.reserve(data.size());
  for (const auto& s : data) probs.push_back(forward(old_model, s.token_ids).prediction.probs);
  return thresholds_from_predictions(old_model.tag_space, probs, data);
}

PseudoTarget label_targets(const EncodedSentence& sentence, std::size_t width) {
  PseudoTarget t;
  t.tokens = sentence.size();
  t.width = width;
  t.rows.assign(t.tokens * width, 0.0);
  t.target_tag.resize(t.tokens);
  for (std::size_t i = 0; i < t.tokens; ++i) {
    const auto tag = sentence.tag_ids[i];
    if (tag >= width) throw ScheduleError("label index outside the target tag space");
    t.rows[i * width + tag] = 1.0;
    t.target_tag[i] = tag;
  }
  return t;
}

PseudoTarget build_targets(std::span<const double> old_probs, std::size_t old_width,
                           const EncodedSentence& sentence, const ConfidenceStats& stats, std::size_t width,
                           PseudoKind kind) {
  if (old_width > width) throw ScheduleError("old tag space is wider than the step's target space");
  if (kind == PseudoKind::kConfidence && stats.size() != old_width) {
    throw ScheduleError("confidence thresholds do not match the old model's tag space");
  }
  check_old_probs(old_probs, old_width, sentence);
  PseudoTarget t = label_targets(sentence, width);
  if (kind == PseudoKind::kNone) return t;
  for (std::size_t i = 0; i < t.tokens; ++i) {
    if (sentence.tag_ids[i] != 0) continue;
    auto row = old_probs.subspan(i * old_width, old_width);
    const std::size_t e = argmax(row);
    const bool keep = kind == PseudoKind::kNaive || token_entropy(row) < stats.tau[e];
    t.rows[i * width] = 0.0;
    if (keep) {
      t.rows[i * width + e] = 1.0;
      t.target_tag[i] = e;
    } else {
      t.target_tag[i] = width;
      ++t.masked_count;
    }
  }
  return t;
}

PseudoTarget build_targets(const ModelCheckpoint& old_model, const EncodedSentence& sentence,
                           const ConfidenceStats& stats, std::size_t width, PseudoKind kind) {
  NoGradGuard guard;
  auto probs = forward(old_model, sentence.token_ids).prediction.probs;
  return build_targets(probs.data(), old_model.tag_space.size(), sentence, stats, width, kind);
}

TokenWeighting token_weights(std::span<const PseudoTarget* const> batch, std::size_t old_width) {
  TokenWeighting w;
  for (const auto* t : batch) {
    for (std::size_t i = 0; i < t->tokens; ++i) {
      const auto tag = t->target_tag[i];
      if (tag == t->width || tag == 0) continue;
      if (tag < old_width) {
        ++w.n_old;
      } else {
        ++w.n_new;
      }
    }
  }
  double old_eta = 1.0;
  if (w.n_old > 0) {
    old_eta = w.n_new == 0 ? 1.5
                           : 0.5 + 1.0 / (1.0 + std::exp(-static_cast<double>(w.n_old) / static_cast<double>(w.n_new)));
  }
  for (const auto* t : batch) {
    std::vector<double> eta(t->tokens, 1.0);
    for (std::size_t i = 0; i < t->tokens; ++i) {
      const auto tag = t->target_tag[i];
      if (tag != t->width && tag != 0 && tag < old_width) eta[i] = old_eta;
    }
    w.eta.push_back(std::move(eta));
  }
  return w;
}

TokenWeighting token_weights(std::span<const PseudoTarget* const> batch, const EntityTypeSchedule& schedule,
                             std::size_t t) {
  return token_weights(batch, 1 + 2 * schedule.types_before(t).size());
}

Tensor weighted_ce(const PredictionDistribution& prediction, const PseudoTarget& target,
                   std::span<const double> eta) {
  const auto& lp = prediction.log_probs;
  if (lp.rank() != 2 || lp.dim(0) != target.tokens || lp.dim(1) != target.width) {
    throw DimensionError("weighted_ce: prediction " + shape_to_string(lp.shape()) + " does not match targets [" +
                         std::to_string(target.tokens) + "," + std::to_string(target.width) + "]");
  }
  return ops::weighted_cross_entropy(lp, target.rows, eta, static_cast<double>(target.tokens));
}

}  // namespace spt::pseudo
