#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spt/checkpoint.hpp"
#include "spt/conll.hpp"
#include "spt/error.hpp"
#include "spt/gradcheck_suite.hpp"
#include "spt/harness.hpp"
#include "spt/log.hpp"
#include "spt/ops.hpp"
#include "spt/report_io.hpp"
#include "spt/run_config.hpp"
#include "spt/schedule.hpp"
#include "spt/slicing.hpp"
#include "spt/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitError = 1;
constexpr int kExitConfig = 2;

std::vector<spt::TaggedSentence> load_corpus(const fs::path& path) {
  if (path.extension() == ".json") return spt::synth_corpus(spt::read_synth_spec(path)).sentences;
  auto parsed = spt::read_conll(path);
  if (parsed.repaired_tags > 0) {
    spt::log::warning("repaired " + std::to_string(parsed.repaired_tags) + " dangling I- tags to B-");
  }
  return std::move(parsed.sentences);
}

ordered_json schedule_manifest(const spt::EntityTypeSchedule& schedule) {
  ordered_json j;
  j["setting"] = schedule.setting_name();
  j["fg"] = schedule.fg;
  j["pg"] = schedule.pg;
  j["order_seed"] = schedule.permutation_seed ? ordered_json(*schedule.permutation_seed) : ordered_json(nullptr);
  j["types"] = schedule.ordered_types;
  j["steps"] = ordered_json::array();
  for (std::size_t t = 1; t <= schedule.num_steps(); ++t) {
    ordered_json s;
    s["step"] = t;
    s["types"] = schedule.types_at(t);
    s["tags"] = schedule.tags_at(t);
    j["steps"].push_back(std::move(s));
  }
  return j;
}

std::string summary_table(const spt::RunSummary& summary, const std::vector<spt::StepReport>& reports) {
  auto cell = [](const std::optional<double>& v) { return v ? spt::format_number(*v) : std::string("-"); };
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-6s %-10s %-10s %-10s %-10s\n", "step", "Mi-F1", "Ma-F1", "Ma-F1 old",
                "Ma-F1 new");
  out << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-6zu %-10s %-10s %-10s %-10s\n", r.step, spt::format_number(r.mi_f1_all).c_str(),
                  spt::format_number(r.ma_f1_all).c_str(), cell(r.ma_f1_old).c_str(), cell(r.ma_f1_new).c_str());
    out << line;
  }
  std::snprintf(line, sizeof line, "%-6s %-10s %-10s %-10s %-10s\n", "avg", spt::format_number(summary.avg_mi_f1_all).c_str(),
                spt::format_number(summary.avg_ma_f1_all).c_str(), cell(summary.avg_ma_f1_old).c_str(),
                cell(summary.avg_ma_f1_new).c_str());
  out << line;
  return out.str();
}

struct RunOutput {
  spt::RunSummary summary;
  std::vector<spt::StepReport> reports;
};

// Runs one configuration and writes every artifact under config.out.
RunOutput execute_run(const spt::RunConfig& config) {
  const auto prepared = spt::prepare_run(config);
  const fs::path out = config.out;
  fs::create_directories(out / "checkpoints");
  spt::write_text(out / "config.json", spt::to_json(config));
  spt::write_text(out / "schedule.json", schedule_manifest(prepared.schedule).dump(2) + "\n");

  std::string reports_csv = "step,metric,value\n";
  std::string epochs_csv;
  spt::write_text(out / "reports.csv", reports_csv);

  auto on_step = [&](const spt::StepOutcome& step) {
    const std::string tag = "step_" + std::to_string(step.step);
    spt::save_checkpoint(*step.model, out / "checkpoints" / (tag + ".sptckpt"));
    std::string log = spt::epoch_log_csv(step.step, step.training->epochs, step.training->best_epoch);
    epochs_csv += epochs_csv.empty() ? log : log.substr(log.find('\n') + 1);
    spt::write_text(out / "epochs.csv", epochs_csv);
    if (*step.plan) spt::write_text(out / "fusion" / (tag + ".json"), spt::fusion_plan_json(step.step, **step.plan));
    if (step.training->audit) {
      spt::write_text(out / "pseudo_audit" / (tag + ".json"), spt::pseudo_audit_json(*step.training->audit));
    }
    reports_csv += spt::step_report_rows(*step.report);
    spt::write_text(out / "reports.csv", reports_csv);
  };

  RunOutput result;
  auto run = spt::run_continual(prepared.data, prepared.schedule, config.train, on_step);
  result.reports = std::move(run.reports);
  result.summary = spt::run_averages(result.reports);
  spt::write_text(out / "plot.csv", spt::plot_csv(result.reports));
  spt::write_text(out / "summary.json", spt::summary_json(result.summary, result.reports, config.method,
                                                          prepared.schedule.setting_name()));
  return result;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

void add_override_flags(CLI::App& cmd, spt::RunOverrides& o) {
  auto opt = [&cmd](const char* name, auto& target, const char* help) {
    cmd.add_option_function<typename std::decay_t<decltype(target)>::value_type>(
        name, [&target](const auto& v) { target = v; }, help);
  };
  opt("--corpus", o.corpus, "CoNLL corpus or synthetic spec (.json)");
  opt("--fg", o.fg, "types in the first step");
  opt("--pg", o.pg, "types per later step");
  opt("--seed", o.seed, "training seed");
  opt("--order-seed", o.order_seed, "permute the entity-type order with this seed");
  opt("--method", o.method, "spt, ft or an ablation name");
  opt("--lambda", o.lambda, "distillation weight");
  opt("--out", o.out, "output directory");
}

int cmd_slice(const fs::path& corpus_path, std::size_t fg, std::size_t pg, std::uint64_t seed,
              std::optional<std::uint64_t> order_seed, const fs::path& out) {
  const auto corpus = load_corpus(corpus_path);
  const auto types = spt::entity_types(corpus);
  const auto schedule = spt::build_schedule({types.begin(), types.end()}, fg, pg, order_seed);
  const auto sliced = spt::greedy_slice(corpus, schedule, seed);
  fs::create_directories(out);
  auto manifest = schedule_manifest(schedule);
  manifest["slice_seed"] = seed;
  for (std::size_t t = 1; t <= schedule.num_steps(); ++t) {
    const std::string file = "step_" + std::to_string(t) + ".conll";
    spt::write_text(out / file, spt::serialize_conll(sliced.train_slice(t)));
    manifest["steps"][t - 1]["file"] = file;
    manifest["steps"][t - 1]["sentences"] = sliced.train_slice(t).size();
  }
  spt::write_text(out / "schedule.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << schedule.num_steps() << " slices (" << schedule.setting_name() << ") to " << out.string()
            << "\n";
  return 0;
}

int cmd_synth(const fs::path& spec_path, std::optional<std::uint64_t> seed, const fs::path& out) {
  const auto spec = spt::read_synth_spec(spec_path);
  const auto corpus = seed ? spt::synth_corpus(spec, *seed) : spt::synth_corpus(spec);
  spt::write_text(out, spt::serialize_conll(corpus.sentences));
  std::cout << "wrote " << corpus.sentences.size() << " sentences to " << out.string() << "\n";
  for (const auto& [type, count] : corpus.mention_counts) std::cout << "  " << type << ": " << count << "\n";
  return 0;
}

int cmd_run(const fs::path& config_path, const spt::RunOverrides& overrides) {
  auto config = spt::read_run_config(config_path);
  spt::apply_overrides(config, overrides);
  const auto result = execute_run(config);
  std::cout << "method " << config.method << ", output " << config.out.string() << "\n"
            << summary_table(result.summary, result.reports);
  return 0;
}

int cmd_sweep(const fs::path& config_path, const spt::RunOverrides& base, const std::string& methods,
              const std::string& seeds, const std::string& lambdas, std::size_t jobs) {
  auto config = spt::read_run_config(config_path);
  spt::apply_overrides(config, base);
  const fs::path root = config.out;

  struct Job {
    spt::RunConfig config;
    std::string method;
    std::uint64_t seed;
    std::string lambda;
    RunOutput output;
    std::string error;
  };
  std::vector<Job> todo;
  const auto method_list = split_list(methods);
  const auto seed_list = split_list(seeds);
  auto lambda_list = split_list(lambdas);
  if (lambda_list.empty()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", config.train.lambda);
    lambda_list.push_back(buf);
  }
  std::vector<std::string> problems;
  if (method_list.empty()) problems.push_back("--methods is empty");
  if (seed_list.empty()) problems.push_back("--seeds is empty");
  for (const auto& m : method_list) {
    try {
      spt::method_from_name(m);
    } catch (const spt::ConfigError& e) {
      problems.push_back(e.what());
    }
  }
  auto whole = [](const std::string& s) {
    return !s.empty() && s.find_first_not_of("0123456789") == std::string::npos;
  };
  auto real = [](const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    return !s.empty() && *end == '\0' && std::isfinite(v) && v >= 0.0;
  };
  for (const auto& s : seed_list)
    if (!whole(s)) problems.push_back("seed '" + s + "' is not a non-negative integer");
  for (const auto& l : lambda_list)
    if (!real(l)) problems.push_back("lambda '" + l + "' is not a non-negative number");
  if (!problems.empty()) {
    std::string msg = "invalid sweep grid: ";
    for (std::size_t i = 0; i < problems.size(); ++i) msg += (i ? "; " : "") + problems[i];
    throw spt::ConfigError(msg);
  }
  for (const auto& m : method_list)
    for (const auto& l : lambda_list)
      for (const auto& s : seed_list) {
        spt::RunOverrides o;
        o.method = m;
        o.seed = std::stoull(s);
        o.lambda = std::stod(l);
        o.out = root / (m + "_lambda" + l + "_seed" + s);
        Job job{config, m, *o.seed, l, {}, {}};
        spt::apply_overrides(job.config, o);
        todo.push_back(std::move(job));
      }

  std::size_t next = 0;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      Job* job = nullptr;
      {
        std::lock_guard lock(mu);
        if (next == todo.size()) return;
        job = &todo[next++];
      }
      try {
        job->output = execute_run(job->config);
      } catch (const std::exception& e) {
        job->error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < std::max<std::size_t>(1, jobs); ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  auto cell = [](const std::optional<double>& v) { return v ? spt::format_number(*v) : std::string(); };
  std::string csv = "method,lambda,seed,avg_mi_f1_all,avg_ma_f1_all,avg_ma_f1_old,avg_ma_f1_new,final_ma_f1_old\n";
  int status = 0;
  for (const auto& job : todo) {
    if (!job.error.empty()) {
      std::cerr << "error: " << job.method << " seed " << job.seed << ": " << job.error << "\n";
      status = kExitError;
      continue;
    }
    const auto& s = job.output.summary;
    csv += job.method + "," + job.lambda + "," + std::to_string(job.seed) + "," +
           spt::format_number(s.avg_mi_f1_all) + "," + spt::format_number(s.avg_ma_f1_all) + "," +
           cell(s.avg_ma_f1_old) + "," + cell(s.avg_ma_f1_new) + "," + cell(job.output.reports.back().ma_f1_old) +
           "\n";
  }
  spt::write_text(root / "sweep.csv", csv);
  std::cout << csv;
  return status;
}

int cmd_gradcheck(std::uint64_t seed, const std::string& mode, bool inject_fault) {
  spt::GradCheckSuiteOptions options;
  options.seed = seed;
  options.mode = spt::attention_mode_from_string(mode);
  spt::testing::set_softmax_gradient_fault(inject_fault);
  const auto results = spt::run_gradcheck_suite(options);
  spt::testing::set_softmax_gradient_fault(false);

  bool ok = true;
  std::printf("%-12s %-9s %-14s %s\n", "loss", "entries", "max_rel_err", "status");
  for (const auto& r : results) {
    std::size_t entries = 0;
    for (const auto& p : r.report.params) entries += p.entries_checked;
    std::printf("%-12s %-9zu %-14.3e %s\n", r.path.c_str(), entries, r.report.max_rel_error,
                r.report.passed ? "PASS" : "FAIL");
    ok = ok && r.report.passed;
  }
  std::printf("tolerance %.0e: %s\n", options.check.tolerance, ok ? "all checks passed" : "FAILED");
  return ok ? 0 : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual NER training toolkit"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "log progress");

  auto* slice = app.add_subcommand("slice", "cut a corpus into per-step training slices");
  fs::path slice_corpus, slice_out;
  std::size_t slice_fg = 1, slice_pg = 1;
  std::uint64_t slice_seed = 1;
  std::optional<std::uint64_t> slice_order_seed;
  slice->add_option("--corpus", slice_corpus, "CoNLL corpus or synthetic spec (.json)")->required();
  slice->add_option("--fg", slice_fg, "types in the first step");
  slice->add_option("--pg", slice_pg, "types per later step");
  slice->add_option("--seed", slice_seed, "slicing seed");
  slice->add_option("--order-seed", slice_order_seed, "permute the entity-type order");
  slice->add_option("--out", slice_out, "output directory")->required();

  auto* synth = app.add_subcommand("synth", "generate a synthetic tagged corpus");
  fs::path synth_spec, synth_out;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--spec", synth_spec, "synthetic corpus spec (JSON)")->required();
  synth->add_option("--seed", synth_seed, "override the spec's seed");
  synth->add_option("--out", synth_out, "output CoNLL file")->required();

  auto* run = app.add_subcommand("run", "run continual training from a config");
  fs::path run_config;
  spt::RunOverrides run_overrides;
  run->add_option("--config", run_config, "run config (JSON)")->required();
  add_override_flags(*run, run_overrides);

  auto* sweep = app.add_subcommand("sweep", "run a method x lambda x seed grid");
  fs::path sweep_config;
  spt::RunOverrides sweep_overrides;
  std::string sweep_methods = "spt,ft,w-kd,w-pkd-lax,w-vwf,wo-threshold", sweep_seeds = "1,2,3,4,5", sweep_lambdas;
  std::size_t sweep_jobs = 1;
  sweep->add_option("--config", sweep_config, "base run config (JSON)")->required();
  sweep->add_option("--methods", sweep_methods, "comma-separated method names");
  sweep->add_option("--seeds", sweep_seeds, "comma-separated seeds");
  sweep->add_option("--lambdas", sweep_lambdas, "comma-separated lambda values, e.g. 0.5,1,2,5");
  sweep->add_option("--jobs", sweep_jobs, "runs in parallel");
  add_override_flags(*sweep, sweep_overrides);

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every loss path");
  std::uint64_t gc_seed = 7;
  std::string gc_mode = "pre-softmax";
  bool gc_fault = false;
  gradcheck->add_option("--seed", gc_seed, "model seed");
  gradcheck->add_option("--attention-mode", gc_mode, "pre-softmax or post-softmax");
  gradcheck->add_flag("--inject-fault", gc_fault, "flip the softmax gradient sign")->group("");

  CLI11_PARSE(app, argc, argv);
  if (verbose) spt::log::set_level(spt::log::Level::kInfo);

  try {
    if (*slice) return cmd_slice(slice_corpus, slice_fg, slice_pg, slice_seed, slice_order_seed, slice_out);
    if (*synth) return cmd_synth(synth_spec, synth_seed, synth_out);
    if (*run) return cmd_run(run_config, run_overrides);
    if (*sweep) return cmd_sweep(sweep_config, sweep_overrides, sweep_methods, sweep_seeds, sweep_lambdas, sweep_jobs);
    if (*gradcheck) return cmd_gradcheck(gc_seed, gc_mode, gc_fault);
  } catch (const spt::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return 0;
}
