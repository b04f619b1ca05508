#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spt/fusion.hpp"
#include "spt/harness.hpp"
#include "spt/metrics.hpp"
#include "spt/pseudo_label.hpp"

namespace spt {

// Fixed 6-decimal rendering used by every text artifact.
std::string format_number(double value);

/// "step,metric,value" rows. Order per step: mi_f1_all, ma_f1_all, ma_f1_old,
/// ma_f1_new (when present), then f1/tp/fp/fn per type, old types first in
/// schedule order.
std::string step_report_rows(const StepReport& report);
std::string step_reports_csv(std::span<const StepReport> reports);

// Metric-vs-step table for plotting; absent values are empty cells.
std::string plot_csv(std::span<const StepReport> reports);

std::string summary_json(const RunSummary& summary, std::span<const StepReport> reports,
                         const std::string& method, const std::string& setting);

std::string fusion_plan_json(std::size_t step, const fusion::FusionPlan& plan);
std::string pseudo_audit_json(const pseudo::PseudoAudit& audit);
std::string epoch_log_csv(std::size_t step, std::span<const EpochLog> epochs, std::size_t best_epoch);

// Writes text atomically enough for a single process: truncate then write.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace spt
