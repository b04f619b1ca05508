#include "spt/metrics.hpp"

#include <algorithm>
#include <set>

#include "spt/bio.hpp"
#include "spt/error.hpp"

namespace spt {

std::vector<Span> extract_spans(std::span<const std::string> tags) {
  std::vector<Span> spans;
  bool open = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto parsed = parse_tag(tags[i]);
    if (parsed.prefix == BioPrefix::kOutside) {
      open = false;
      continue;
    }
    if (parsed.prefix == BioPrefix::kInside && open && spans.back().type == parsed.type) {
      spans.back().end = i + 1;
      continue;
    }
    spans.push_back({parsed.type, i, i + 1});
    open = true;
  }
  return spans;
}

std::vector<std::string> spans_to_tags(std::span<const Span> spans, std::size_t length) {
  std::vector<std::string> tags(length, kOutsideTag);
  for (const auto& s : spans) {
    if (s.start >= s.end || s.end > length) throw InputError("span outside the sentence");
    for (std::size_t i = s.start; i < s.end; ++i) {
      if (tags[i] != kOutsideTag) throw InputError("overlapping spans");
    }
    tags[s.start] = begin_tag(s.type);
    for (std::size_t i = s.start + 1; i < s.end; ++i) tags[i] = inside_tag(s.type);
  }
  return tags;
}

double TypeCounts::precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }

double TypeCounts::recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }

double TypeCounts::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

StepReport f1_scores(const std::vector<std::vector<Span>>& gold, const std::vector<std::vector<Span>>& pred,
                     const std::vector<std::string>& types_old, const std::vector<std::string>& types_new,
                     const F1Options& options) {
  if (gold.size() != pred.size()) throw DimensionError("gold and predicted span lists differ in sentence count");
  StepReport report;
  report.types_old = types_old;
  report.types_new = types_new;
  std::set<std::string> scored(types_old.begin(), types_old.end());
  scored.insert(types_new.begin(), types_new.end());
  for (const auto& type : scored) report.counts[type] = {};

  for (std::size_t s = 0; s < gold.size(); ++s) {
    std::multiset<Span> remaining;
    for (const auto& g : gold[s])
      if (scored.contains(g.type)) remaining.insert(g);
    for (const auto& p : pred[s]) {
      if (!scored.contains(p.type)) continue;
      auto it = remaining.find(p);
      if (it != remaining.end()) {
        ++report.counts[p.type].tp;
        remaining.erase(it);
      } else {
        ++report.counts[p.type].fp;
      }
    }
    for (const auto& g : remaining) ++report.counts[g.type].fn;
  }

  TypeCounts pooled;
  for (const auto& [type, c] : report.counts) {
    report.per_type_f1[type] = c.f1();
    pooled.tp += c.tp;
    pooled.fp += c.fp;
    pooled.fn += c.fn;
  }
  report.mi_f1_all = pooled.f1();

  auto macro = [&](const std::vector<std::string>& types) -> std::optional<double> {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& type : types) {
      const auto& c = report.counts.at(type);
      if (!options.absent_types_score_zero && c.tp + c.fp + c.fn == 0) continue;
      total += report.per_type_f1.at(type);
      ++n;
    }
    if (n == 0) return std::nullopt;
    return total / static_cast<double>(n);
  };
  report.ma_f1_old = macro(types_old);
  report.ma_f1_new = macro(types_new);
  std::vector<std::string> all = types_old;
  all.insert(all.end(), types_new.begin(), types_new.end());
  report.ma_f1_all = macro(all).value_or(0.0);
  return report;
}

RunSummary run_averages(std::span<const StepReport> reports) {
  if (reports.empty()) throw ContractError("run_averages: no step reports");
  RunSummary summary;
  summary.steps = reports.size();
  for (const auto& r : reports) {
    summary.avg_mi_f1_all += r.mi_f1_all;
    summary.avg_ma_f1_all += r.ma_f1_all;
  }
  summary.avg_mi_f1_all /= static_cast<double>(reports.size());
  summary.avg_ma_f1_all /= static_cast<double>(reports.size());
  if (reports.size() > 1) {
    double old_sum = 0.0, new_sum = 0.0;
    std::size_t old_n = 0, new_n = 0;
    for (std::size_t i = 1; i < reports.size(); ++i) {
      if (reports[i].ma_f1_old) {
        old_sum += *reports[i].ma_f1_old;
        ++old_n;
      }
      if (reports[i].ma_f1_new) {
        new_sum += *reports[i].ma_f1_new;
        ++new_n;
      }
    }
    if (old_n > 0) summary.avg_ma_f1_old = old_sum / static_cast<double>(old_n);
    if (new_n > 0) summary.avg_ma_f1_new = new_sum / static_cast<double>(new_n);
  }
  return summary;
}

}  // namespace spt
