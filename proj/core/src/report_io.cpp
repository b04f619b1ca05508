#include "spt/report_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "spt/error.hpp"

namespace spt {
namespace {

using nlohmann::ordered_json;

// JSON numbers go through format_number so files are byte-stable.
ordered_json number(double value) { return ordered_json::parse(format_number(value)); }

ordered_json optional_number(const std::optional<double>& value) {
  return value ? number(*value) : ordered_json(nullptr);
}

std::vector<std::string> scored_types(const StepReport& r) {
  std::vector<std::string> types = r.types_old;
  types.insert(types.end(), r.types_new.begin(), r.types_new.end());
  return types;
}

}  // namespace

std::string format_number(double value) {
  if (value == 0.0) value = 0.0;  // folds -0
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

std::string step_report_rows(const StepReport& r) {
  std::string out;
  const std::string step = std::to_string(r.step);
  auto row = [&](const std::string& metric, const std::string& value) { out += step + "," + metric + "," + value + "\n"; };
  row("mi_f1_all", format_number(r.mi_f1_all));
  row("ma_f1_all", format_number(r.ma_f1_all));
  if (r.ma_f1_old) row("ma_f1_old", format_number(*r.ma_f1_old));
  if (r.ma_f1_new) row("ma_f1_new", format_number(*r.ma_f1_new));
  for (const auto& type : scored_types(r)) {
    const auto& c = r.counts.at(type);
    row("f1/" + type, format_number(r.per_type_f1.at(type)));
    row("tp/" + type, std::to_string(c.tp));
    row("fp/" + type, std::to_string(c.fp));
    row("fn/" + type, std::to_string(c.fn));
  }
  return out;
}

std::string step_reports_csv(std::span<const StepReport> reports) {
  std::string out = "step,metric,value\n";
  for (const auto& r : reports) out += step_report_rows(r);
  return out;
}

std::string plot_csv(std::span<const StepReport> reports) {
  std::string out = "step,mi_f1_all,ma_f1_all,ma_f1_old,ma_f1_new\n";
  for (const auto& r : reports) {
    out += std::to_string(r.step) + "," + format_number(r.mi_f1_all) + "," + format_number(r.ma_f1_all) + "," +
           (r.ma_f1_old ? format_number(*r.ma_f1_old) : "") + "," +
           (r.ma_f1_new ? format_number(*r.ma_f1_new) : "") + "\n";
  }
  return out;
}

std::string summary_json(const RunSummary& summary, std::span<const StepReport> reports, const std::string& method,
                         const std::string& setting) {
  ordered_json root;
  root["method"] = method;
  root["setting"] = setting;
  root["steps"] = summary.steps;
  root["avg_mi_f1_all"] = number(summary.avg_mi_f1_all);
  root["avg_ma_f1_all"] = number(summary.avg_ma_f1_all);
  root["avg_ma_f1_old"] = optional_number(summary.avg_ma_f1_old);
  root["avg_ma_f1_new"] = optional_number(summary.avg_ma_f1_new);
  ordered_json per_step = ordered_json::array();
  for (const auto& r : reports) {
    ordered_json s;
    s["step"] = r.step;
    s["mi_f1_all"] = number(r.mi_f1_all);
    s["ma_f1_all"] = number(r.ma_f1_all);
    s["ma_f1_old"] = optional_number(r.ma_f1_old);
    s["ma_f1_new"] = optional_number(r.ma_f1_new);
    per_step.push_back(std::move(s));
  }
  root["per_step"] = std::move(per_step);
  return root.dump(2) + "\n";
}

std::string fusion_plan_json(std::size_t step, const fusion::FusionPlan& plan) {
  ordered_json root;
  root["step"] = step;
  root["alpha"] = number(plan.alpha);
  root["gamma"] = number(plan.gamma);
  root["k"] = plan.k;
  if (std::isfinite(plan.threshold_value)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9e", plan.threshold_value);
    root["threshold"] = buf;
  } else {
    root["threshold"] = nullptr;
  }
  root["selected"] = plan.selected_count;
  root["total"] = plan.total_count;
  root["fusable_weights"] = plan.fusable_names;
  return root.dump(2) + "\n";
}

std::string pseudo_audit_json(const pseudo::PseudoAudit& audit) {
  ordered_json root;
  root["step"] = audit.step;
  root["ground_truth_tokens"] = audit.ground_truth_tokens;
  root["masked_tokens"] = audit.masked_count;
  ordered_json tags = ordered_json::array();
  for (std::size_t i = 0; i < audit.stats.tags.size(); ++i) {
    ordered_json t;
    t["tag"] = audit.stats.tags[i];
    t["tau"] = i < audit.stats.tau.size() ? number(audit.stats.tau[i]) : ordered_json(nullptr);
    t["population"] = i < audit.stats.population.size() ? audit.stats.population[i] : 0;
    t["retained"] = i < audit.retained.size() ? audit.retained[i] : 0;
    t["rejected"] = i < audit.rejected.size() ? audit.rejected[i] : 0;
    tags.push_back(std::move(t));
  }
  root["tags"] = std::move(tags);
  return root.dump(2) + "\n";
}

std::string epoch_log_csv(std::size_t step, std::span<const EpochLog> epochs, std::size_t best_epoch) {
  std::string out = "step,epoch,mean_loss,dev_mi_f1,selected\n";
  for (const auto& e : epochs) {
    out += std::to_string(step) + "," + std::to_string(e.epoch) + "," + format_number(e.mean_loss) + "," +
           format_number(e.dev_mi_f1) + "," + (e.epoch == best_epoch ? "1" : "0") + "\n";
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

}  // namespace spt
