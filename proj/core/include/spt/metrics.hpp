#pragma once

#include <compare>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spt {

/// Entity mention over token positions [start, end).
struct Span {
  std::string type;
  std::size_t start = 0;
  std::size_t end = 0;

  auto operator<=>(const Span&) const = default;
};

/// Maximal B-led runs; an I- tag of a different type (or with nothing open)
/// starts a new span as if it were B-.
std::vector<Span> extract_spans(std::span<const std::string> tags);
// Inverse of extract_spans. Throws InputError on out-of-range or overlapping spans.
std::vector<std::string> spans_to_tags(std::span<const Span> spans, std::size_t length);

struct TypeCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  double precision() const;
  double recall() const;
  double f1() const;  // 0 when precision + recall == 0
};

struct StepReport {
  std::size_t step = 0;
  std::vector<std::string> types_old;
  std::vector<std::string> types_new;
  std::map<std::string, TypeCounts> counts;
  std::map<std::string, double> per_type_f1;
  std::optional<double> ma_f1_old;  // absent when there are no old types
  std::optional<double> ma_f1_new;
  double ma_f1_all = 0.0;
  double mi_f1_all = 0.0;
};

struct F1Options {
  // A type with no gold and no predicted spans scores F1 = 0 and still counts
  // in Ma-F1; when false such types are left out of the macro means.
  bool absent_types_score_zero = true;
};

/// Exact-match (type, start, end) scoring restricted to types_old + types_new;
/// spans of any other type are ignored on both sides.
StepReport f1_scores(const std::vector<std::vector<Span>>& gold, const std::vector<std::vector<Span>>& pred,
                     const std::vector<std::string>& types_old, const std::vector<std::string>& types_new,
                     const F1Options& options = {});

struct RunSummary {
  std::size_t steps = 0;
  double avg_mi_f1_all = 0.0;
  double avg_ma_f1_all = 0.0;
  // Averaged over steps 2..T; absent for single-step runs.
  std::optional<double> avg_ma_f1_old;
  std::optional<double> avg_ma_f1_new;
};

// Throws ContractError on an empty report list.
RunSummary run_averages(std::span<const StepReport> reports);

}  // namespace spt
