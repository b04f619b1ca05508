#include "spt/distill.hpp"

#include <vector>

#include "spt/error.hpp"
#include "spt/ops.hpp"

namespace spt::distill {
namespace {

void check_pair(const AttentionTrace& a, const AttentionTrace& b) {
  if (a.layers.size() != b.layers.size()) {
    throw DimensionError("attention traces have " + std::to_string(a.layers.size()) + " vs " +
                         std::to_string(b.layers.size()) + " layers");
  }
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const auto& sa = a.layers[l].shape();
    const auto& sb = b.layers[l].shape();
    if (sa != sb || sa.size() != 3 || sa[1] != sa[2]) {
      throw DimensionError("attention trace layer " + std::to_string(l) + " shape mismatch " + shape_to_string(sa) +
                           " vs " + shape_to_string(sb));
    }
  }
}

Tensor squared_gap(const Tensor& a, const Tensor& b) { return ops::sum(ops::square(ops::sub(a, b))); }

Tensor sum_over_layers(std::vector<Tensor> per_layer) {
  if (per_layer.empty()) return Tensor::scalar(0.0);
  return ops::add_n(per_layer);
}

}  // namespace

std::string to_string(DistillKind kind) {
  switch (kind) {
    case DistillKind::kNone: return "none";
    case DistillKind::kKd: return "kd";
    case DistillKind::kPkdLax: return "pkd-lax";
    case DistillKind::kPkd: return "pkd";
  }
  return "none";
}

DistillKind distill_kind_from_string(const std::string& text) {
  if (text == "none") return DistillKind::kNone;
  if (text == "kd") return DistillKind::kKd;
  if (text == "pkd-lax") return DistillKind::kPkdLax;
  if (text == "pkd") return DistillKind::kPkd;
  throw ConfigError("unknown distillation kind '" + text + "'");
}

Tensor loss_kd(const AttentionTrace& new_trace, const AttentionTrace& old_trace) {
  check_pair(new_trace, old_trace);
  std::vector<Tensor> per_layer;
  for (std::size_t l = 0; l < new_trace.layers.size(); ++l) {
    per_layer.push_back(squared_gap(new_trace.layers[l], old_trace.layers[l].detach()));
  }
  return sum_over_layers(std::move(per_layer));
}

Tensor loss_pkd_lax(const AttentionTrace& new_trace, const AttentionTrace& old_trace) {
  check_pair(new_trace, old_trace);
  std::vector<Tensor> per_layer;
  for (std::size_t l = 0; l < new_trace.layers.size(); ++l) {
    auto pool = [](const Tensor& a) { return ops::sum_axis(ops::sum_axis(a, 2), 1); };
    per_layer.push_back(squared_gap(pool(new_trace.layers[l]), pool(old_trace.layers[l].detach())));
  }
  return sum_over_layers(std::move(per_layer));
}

PkdTerms pkd_terms(const AttentionTrace& new_trace, const AttentionTrace& old_trace) {
  check_pair(new_trace, old_trace);
  std::vector<Tensor> heads, rows, cols;
  for (std::size_t l = 0; l < new_trace.layers.size(); ++l) {
    const Tensor& a = new_trace.layers[l];
    const Tensor b = old_trace.layers[l].detach();
    heads.push_back(squared_gap(ops::sum_axis(a, 0), ops::sum_axis(b, 0)));
    rows.push_back(squared_gap(ops::sum_axis(a, 1), ops::sum_axis(b, 1)));
    cols.push_back(squared_gap(ops::sum_axis(a, 2), ops::sum_axis(b, 2)));
  }
  return {sum_over_layers(std::move(heads)), sum_over_layers(std::move(rows)), sum_over_layers(std::move(cols))};
}

Tensor loss_pkd(const AttentionTrace& new_trace, const AttentionTrace& old_trace) {
  auto terms = pkd_terms(new_trace, old_trace);
  const Tensor parts[] = {terms.over_heads, terms.over_queries, terms.over_keys};
  return ops::add_n(parts);
}

Tensor distillation_loss(DistillKind kind, const AttentionTrace& new_trace, const AttentionTrace& old_trace) {
  switch (kind) {
    case DistillKind::kNone: return Tensor::scalar(0.0);
    case DistillKind::kKd: return loss_kd(new_trace, old_trace);
    case DistillKind::kPkdLax: return loss_pkd_lax(new_trace, old_trace);
    case DistillKind::kPkd: return loss_pkd(new_trace, old_trace);
  }
  return Tensor::scalar(0.0);
}

}  // namespace spt::distill
