#include "spt/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>

#include "spt/error.hpp"
#include "spt/log.hpp"
#include "spt/ops.hpp"

namespace spt::fusion {
namespace {

inline double blend(double old_value, double new_value, double alpha) {
  return alpha * old_value + (1.0 - alpha) * new_value;
}

// The old weight must be a leading block of the new one: identical shape, or
// (for the classifier) the same trailing dims with fewer leading rows.
void check_fusable(const std::string& name, const Tensor& old_w, const Tensor& new_w) {
  const auto& so = old_w.shape();
  const auto& sn = new_w.shape();
  bool ok = so.size() == sn.size() && !so.empty() && so[0] <= sn[0];
  for (std::size_t i = 1; ok && i < so.size(); ++i) ok = so[i] == sn[i];
  if (so.empty() && sn.empty()) ok = true;
  if (!ok) {
    throw CheckpointError("cannot fuse weight '" + name + "': old shape " + shape_to_string(so) +
                          " vs new shape " + shape_to_string(sn));
  }
}

}  // namespace

std::string to_string(FusionKind kind) {
  switch (kind) {
    case FusionKind::kNone: return "none";
    case FusionKind::kVanilla: return "vanilla";
    case FusionKind::kSelective: return "selective";
  }
  return "none";
}

FusionKind fusion_kind_from_string(const std::string& text) {
  if (text == "none") return FusionKind::kNone;
  if (text == "vanilla") return FusionKind::kVanilla;
  if (text == "selective") return FusionKind::kSelective;
  throw ConfigError("unknown fusion kind '" + text + "'");
}

double compute_alpha(const EntityTypeSchedule& schedule, std::size_t t) {
  const auto current = static_cast<double>(schedule.step_size(t));
  const auto seen = static_cast<double>(schedule.cumulative_size(t));
  return 1.0 - std::sqrt(current / (seen + 1.0));
}

double compute_gamma(const EntityTypeSchedule& schedule, std::size_t t) {
  if (t < 2) throw ContractError("gamma is defined for steps t >= 2");
  const auto current = static_cast<double>(schedule.step_size(t));
  const auto before = static_cast<double>(schedule.cumulative_size(t - 1));
  const auto seen = static_cast<double>(schedule.cumulative_size(t));
  return 1.0 / (1.0 + std::exp((current - before - 1.0) / (seen + 1.0)));
}

const Tensor* FisherMap::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e.value;
  return nullptr;
}

FisherMap estimate_fisher(const ModelCheckpoint& model, std::span<const EncodedSentence> data,
                          const FisherOptions& options) {
  if (data.empty()) throw ContractError("estimate_fisher: no data");

  std::vector<std::size_t> chosen(data.size());
  std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  if (options.max_sentences > 0 && chosen.size() > options.max_sentences) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(options.max_sentences);
    std::sort(chosen.begin(), chosen.end());
  }

  // Gradients are taken on a private trainable copy so the caller's model
  // keeps its gradient flags and buffers.
  ModelCheckpoint probe = clone_trainable(model);
  std::vector<Tensor> params = probe.parameters();
  std::vector<std::vector<double>> acc;
  acc.reserve(params.size());
  for (const auto& p : params) acc.emplace_back(p.numel(), 0.0);

  std::size_t tokens = 0;
  for (auto idx : chosen) {
    const auto& sentence = data[idx];
    auto result = forward(probe, sentence.token_ids);
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      for (auto& p : params) p.zero_grad();
      ops::nll_at(result.prediction.log_probs, i, sentence.tag_ids[i]).backward();
      for (std::size_t w = 0; w < params.size(); ++w) {
        auto g = params[w].grad_view();
        if (g.empty()) continue;
        for (std::size_t j = 0; j < g.size(); ++j) acc[w][j] += g[j] * g[j];
      }
      ++tokens;
    }
  }
  if (tokens == 0) throw ContractError("estimate_fisher: data contains no tokens");

  FisherMap fisher;
  fisher.samples = tokens;
  const double inv = 1.0 / static_cast<double>(tokens);
  for (std::size_t w = 0; w < params.size(); ++w) {
    for (auto& v : acc[w]) v *= inv;
    fisher.entries.push_back({probe.weights[w].name, Tensor::from(params[w].shape(), std::move(acc[w]))});
  }
  return fisher;
}

ModelCheckpoint fuse_vanilla(const ModelCheckpoint& old_model, const ModelCheckpoint& new_model, double alpha) {
  ModelCheckpoint out = clone_trainable(new_model);
  for (const auto& w : old_model.weights) {
    Tensor& target = out.weight(w.name);
    check_fusable(w.name, w.value, target);
    auto old_values = w.value.data();
    auto fused = target.mutable_data();
    for (std::size_t i = 0; i < old_values.size(); ++i) fused[i] = blend(old_values[i], fused[i], alpha);
  }
  return out;
}

FusionPlan fuse_selective_flat(std::span<const double> old_values, std::span<double> fused,
                               std::span<const double> fisher, double alpha, double gamma) {
  if (old_values.size() != fisher.size() || fused.size() != old_values.size()) {
    throw DimensionError("fuse_selective: old, new and Fisher vectors differ in length");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw ContractError("fuse_selective: gamma must lie in (0, 1)");
  FusionPlan plan;
  plan.alpha = alpha;
  plan.gamma = gamma;
  plan.total_count = old_values.size();
  plan.k = static_cast<std::size_t>(std::llround(gamma * static_cast<double>(plan.total_count)));
  if (plan.k == 0) {
    log::warning("fuse_selective: gamma * |theta| rounds to 0; keeping the new weights unchanged");
    plan.threshold_value = std::numeric_limits<double>::infinity();
    return plan;
  }
  std::vector<double> sorted(fisher.begin(), fisher.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(plan.k - 1), sorted.end(),
                   std::greater<>());
  plan.threshold_value = sorted[plan.k - 1];
  for (std::size_t i = 0; i < fisher.size(); ++i) {
    if (fisher[i] >= plan.threshold_value) {
      fused[i] = blend(old_values[i], fused[i], alpha);
      ++plan.selected_count;
    }
  }
  return plan;
}

std::pair<ModelCheckpoint, FusionPlan> fuse_selective(const ModelCheckpoint& old_model,
                                                      const ModelCheckpoint& new_model, const FisherMap& fisher,
                                                      double alpha, double gamma) {
  ModelCheckpoint out = clone_trainable(new_model);

  // Flatten every fusable region (old-sized prefix of each new weight).
  std::vector<double> old_flat, fused_flat, fisher_flat;
  std::vector<std::string> names;
  for (const auto& w : old_model.weights) {
    const Tensor& target = out.weight(w.name);
    check_fusable(w.name, w.value, target);
    const Tensor* f = fisher.find(w.name);
    if (f == nullptr || f->shape() != w.value.shape()) {
      throw ContractError("fuse_selective: Fisher map does not cover weight '" + w.name + "'");
    }
    auto ov = w.value.data();
    auto nv = target.data();
    auto fv = f->data();
    old_flat.insert(old_flat.end(), ov.begin(), ov.end());
    fused_flat.insert(fused_flat.end(), nv.begin(), nv.begin() + static_cast<std::ptrdiff_t>(ov.size()));
    fisher_flat.insert(fisher_flat.end(), fv.begin(), fv.end());
    names.push_back(w.name);
  }

  FusionPlan plan = fuse_selective_flat(old_flat, fused_flat, fisher_flat, alpha, gamma);
  plan.fusable_names = std::move(names);

  std::size_t offset = 0;
  for (const auto& w : old_model.weights) {
    auto dst = out.weight(w.name).mutable_data();
    const std::size_t n = w.value.numel();
    std::copy_n(fused_flat.begin() + static_cast<std::ptrdiff_t>(offset), n, dst.begin());
    offset += n;
  }
  return {std::move(out), std::move(plan)};
}

}  // namespace spt::fusion
