#include "spt/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "spt/conll.hpp"
#include "spt/error.hpp"
#include "spt/log.hpp"
#include "spt/synth.hpp"

namespace spt {
namespace {

using nlohmann::json;

// Collects problems instead of throwing so one pass reports all of them.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& problems) : problems_(problems) {}

  const json* section(const json& root, const char* key, std::initializer_list<const char*> allowed) {
    if (!root.contains(key)) return nullptr;
    const json& node = root.at(key);
    if (!node.is_object()) {
      problems_.push_back(std::string(key) + ": expected an object");
      return nullptr;
    }
    check_keys(node, key, allowed);
    return &node;
  }

  void check_keys(const json& node, const std::string& where, std::initializer_list<const char*> allowed) {
    std::set<std::string> known(allowed.begin(), allowed.end());
    for (const auto& item : node.items()) {
      if (!known.contains(item.key())) problems_.push_back(where + ": unknown key '" + item.key() + "'");
    }
  }

  template <typename T>
  void get(const json* node, const char* section, const char* key, T& out) {
    if (node == nullptr || !node->contains(key)) return;
    const json& v = node->at(key);
    const std::string where = std::string(section) + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) return fail(where, "a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) return fail(where, "a number");
      out = v.get<double>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_unsigned()) return fail(where, "a non-negative integer");
      out = v.get<T>();
    } else {
      if (!v.is_string()) return fail(where, "a string");
      out = T(v.get<std::string>());
    }
  }

  void add(std::string problem) { problems_.push_back(std::move(problem)); }

 private:
  void fail(const std::string& where, const char* expected) { problems_.push_back(where + ": expected " + expected); }

  std::vector<std::string>& problems_;
};

void raise(const std::vector<std::string>& problems) {
  if (problems.empty()) return;
  std::string msg = "invalid run config (" + std::to_string(problems.size()) + " problem" +
                    (problems.size() == 1 ? "" : "s") + "):";
  for (const auto& p : problems) msg += "\n  - " + p;
  throw ConfigError(msg);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

void collect_problems(const RunConfig& c, std::vector<std::string>& problems) {
  if (c.corpus.train.empty() && c.corpus.synth.empty()) {
    problems.push_back("corpus: one of corpus.train or corpus.synth is required");
  }
  if (!c.corpus.train.empty() && !c.corpus.synth.empty()) {
    problems.push_back("corpus: corpus.train and corpus.synth are mutually exclusive");
  }
  const auto& f = c.corpus;
  if (!(f.dev_fraction >= 0.0 && f.test_fraction >= 0.0 && f.dev_fraction + f.test_fraction < 1.0)) {
    problems.push_back("corpus: dev_fraction and test_fraction must be >= 0 and sum to < 1");
  }
  if (c.fg == 0) problems.push_back("schedule.fg must be >= 1");
  if (c.pg == 0) problems.push_back("schedule.pg must be >= 1");
  if (c.out.empty()) problems.push_back("out: output directory is required");
  try {
    c.train.validate();
  } catch (const ConfigError& e) {
    problems.push_back(e.what());
  }
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("run config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("run config must be a JSON object");

  std::vector<std::string> problems;
  Reader r(problems);
  r.check_keys(root, "config", {"corpus", "schedule", "method", "train", "model", "out"});

  RunConfig c;
  if (const json* n = r.section(root, "corpus",
                                {"train", "dev", "test", "synth", "dev_fraction", "test_fraction", "split_seed"})) {
    r.get(n, "corpus", "train", c.corpus.train);
    r.get(n, "corpus", "dev", c.corpus.dev);
    r.get(n, "corpus", "test", c.corpus.test);
    r.get(n, "corpus", "synth", c.corpus.synth);
    r.get(n, "corpus", "dev_fraction", c.corpus.dev_fraction);
    r.get(n, "corpus", "test_fraction", c.corpus.test_fraction);
    r.get(n, "corpus", "split_seed", c.corpus.split_seed);
  }
  if (const json* n = r.section(root, "schedule", {"fg", "pg", "order_seed", "slice_seed"})) {
    r.get(n, "schedule", "fg", c.fg);
    r.get(n, "schedule", "pg", c.pg);
    if (n->contains("order_seed") && !n->at("order_seed").is_null()) {
      std::uint64_t seed = 0;
      r.get(n, "schedule", "order_seed", seed);
      c.order_seed = seed;
    }
    r.get(n, "schedule", "slice_seed", c.slice_seed);
  }
  if (root.contains("method")) {
    const json& m = root.at("method");
    if (m.is_string()) {
      c.method = m.get<std::string>();
      try {
        c.train.method = method_from_name(c.method);
      } catch (const ConfigError& e) {
        r.add(e.what());
      }
    } else if (m.is_object()) {
      r.check_keys(m, "method", {"distill", "fusion", "pseudo", "eta_weighting"});
      std::string distill = "pkd", fusion = "selective", pseudo = "confidence";
      r.get(&m, "method", "distill", distill);
      r.get(&m, "method", "fusion", fusion);
      r.get(&m, "method", "pseudo", pseudo);
      r.get(&m, "method", "eta_weighting", c.train.method.eta_weighting);
      try {
        c.train.method.distill = distill::distill_kind_from_string(distill);
      } catch (const ConfigError& e) {
        r.add(e.what());
      }
      try {
        c.train.method.fusion = fusion::fusion_kind_from_string(fusion);
      } catch (const ConfigError& e) {
        r.add(e.what());
      }
      try {
        c.train.method.pseudo = pseudo::pseudo_kind_from_string(pseudo);
      } catch (const ConfigError& e) {
        r.add(e.what());
      }
      c.method = method_name(c.train.method);
    } else {
      r.add("method: expected a preset name or an object");
    }
  }
  if (const json* n = r.section(root, "train",
                                {"lambda", "lr", "batch_size", "epochs_pg1", "epochs_pgn", "optimizer", "seed",
                                 "fisher_max_sentences", "eta_scope", "absent_types_score_zero"})) {
    r.get(n, "train", "lambda", c.train.lambda);
    r.get(n, "train", "lr", c.train.lr);
    r.get(n, "train", "batch_size", c.train.batch_size);
    r.get(n, "train", "epochs_pg1", c.train.epochs_pg1);
    r.get(n, "train", "epochs_pgn", c.train.epochs_pgn);
    std::string optimizer = to_string(c.train.optimizer);
    r.get(n, "train", "optimizer", optimizer);
    try {
      c.train.optimizer = optimizer_kind_from_string(optimizer);
    } catch (const ConfigError& e) {
      r.add(e.what());
    }
    r.get(n, "train", "seed", c.train.seed);
    r.get(n, "train", "fisher_max_sentences", c.train.fisher_max_sentences);
    r.get(n, "train", "absent_types_score_zero", c.train.absent_types_score_zero);
    std::string eta_scope = c.train.eta_per_dataset ? "dataset" : "batch";
    r.get(n, "train", "eta_scope", eta_scope);
    if (eta_scope != "batch" && eta_scope != "dataset") {
      r.add("train.eta_scope: expected 'batch' or 'dataset', got '" + eta_scope + "'");
    }
    c.train.eta_per_dataset = eta_scope == "dataset";
  }
  if (const json* n =
          r.section(root, "model", {"d_model", "n_layers", "n_heads", "d_ff", "max_len", "attention_mode"})) {
    auto& m = c.train.model;
    r.get(n, "model", "d_model", m.d_model);
    r.get(n, "model", "n_layers", m.n_layers);
    r.get(n, "model", "n_heads", m.n_heads);
    r.get(n, "model", "d_ff", m.d_ff);
    r.get(n, "model", "max_len", m.max_len);
    std::string mode = to_string(m.attention_mode);
    r.get(n, "model", "attention_mode", mode);
    try {
      m.attention_mode = attention_mode_from_string(mode);
    } catch (const ConfigError& e) {
      r.add(e.what());
    }
  }
  r.get(&root, "config", "out", c.out);

  c.corpus.train = resolve(base_dir, c.corpus.train);
  c.corpus.dev = resolve(base_dir, c.corpus.dev);
  c.corpus.test = resolve(base_dir, c.corpus.test);
  c.corpus.synth = resolve(base_dir, c.corpus.synth);
  c.out = resolve(base_dir, c.out);

  collect_problems(c, problems);
  raise(problems);
  return c;
}

RunConfig read_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read run config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path.parent_path());
}

void apply_overrides(RunConfig& config, const RunOverrides& o) {
  std::vector<std::string> problems;
  if (o.corpus) {
    if (o.corpus->extension() == ".json") {
      config.corpus.synth = *o.corpus;
      config.corpus.train.clear();
    } else {
      config.corpus.train = *o.corpus;
      config.corpus.synth.clear();
    }
    config.corpus.dev.clear();
    config.corpus.test.clear();
  }
  if (o.fg) config.fg = *o.fg;
  if (o.pg) config.pg = *o.pg;
  if (o.seed) config.train.seed = *o.seed;
  if (o.order_seed) config.order_seed = *o.order_seed;
  if (o.method) {
    try {
      config.train.method = method_from_name(*o.method);
      config.method = *o.method;
    } catch (const ConfigError& e) {
      problems.push_back(e.what());
    }
  }
  if (o.lambda) config.train.lambda = *o.lambda;
  if (o.out) config.out = *o.out;
  collect_problems(config, problems);
  raise(problems);
}

void validate(const RunConfig& config) {
  std::vector<std::string> problems;
  collect_problems(config, problems);
  raise(problems);
}

std::string to_json(const RunConfig& c) {
  json corpus = {{"dev_fraction", c.corpus.dev_fraction},
                 {"test_fraction", c.corpus.test_fraction},
                 {"split_seed", c.corpus.split_seed}};
  if (!c.corpus.train.empty()) corpus["train"] = c.corpus.train.generic_string();
  if (!c.corpus.dev.empty()) corpus["dev"] = c.corpus.dev.generic_string();
  if (!c.corpus.test.empty()) corpus["test"] = c.corpus.test.generic_string();
  if (!c.corpus.synth.empty()) corpus["synth"] = c.corpus.synth.generic_string();
  json schedule = {{"fg", c.fg}, {"pg", c.pg}, {"slice_seed", c.slice_seed}};
  schedule["order_seed"] = c.order_seed ? json(*c.order_seed) : json(nullptr);
  const auto& t = c.train;
  json method = {{"distill", distill::to_string(t.method.distill)},
                 {"fusion", fusion::to_string(t.method.fusion)},
                 {"pseudo", pseudo::to_string(t.method.pseudo)},
                 {"eta_weighting", t.method.eta_weighting}};
  json train = {{"lambda", t.lambda},
                {"lr", t.lr},
                {"batch_size", t.batch_size},
                {"epochs_pg1", t.epochs_pg1},
                {"epochs_pgn", t.epochs_pgn},
                {"optimizer", to_string(t.optimizer)},
                {"seed", t.seed},
                {"fisher_max_sentences", t.fisher_max_sentences},
                {"eta_scope", t.eta_per_dataset ? "dataset" : "batch"},
                {"absent_types_score_zero", t.absent_types_score_zero}};
  json model = {{"d_model", t.model.d_model},
                {"n_layers", t.model.n_layers},
                {"n_heads", t.model.n_heads},
                {"d_ff", t.model.d_ff},
                {"max_len", t.model.max_len},
                {"attention_mode", to_string(t.model.attention_mode)}};
  json root = {{"corpus", corpus}, {"schedule", schedule}, {"method", method},
               {"train", train},   {"model", model},       {"out", c.out.generic_string()}};
  return root.dump(2) + "\n";
}

PreparedRun prepare_run(const RunConfig& config) {
  validate(config);
  PreparedRun run;
  std::vector<TaggedSentence> train, dev, test;
  if (!config.corpus.synth.empty()) {
    const auto spec = read_synth_spec(config.corpus.synth);
    train = synth_corpus(spec).sentences;
  } else {
    auto parsed = read_conll(config.corpus.train);
    run.repaired_tags += parsed.repaired_tags;
    train = std::move(parsed.sentences);
    if (!config.corpus.dev.empty()) {
      auto d = read_conll(config.corpus.dev);
      run.repaired_tags += d.repaired_tags;
      dev = std::move(d.sentences);
    }
    if (!config.corpus.test.empty()) {
      auto d = read_conll(config.corpus.test);
      run.repaired_tags += d.repaired_tags;
      test = std::move(d.sentences);
    }
  }
  if (run.repaired_tags > 0) {
    log::warning("repaired " + std::to_string(run.repaired_tags) + " dangling I- tags to B-");
  }
  if (dev.empty() || test.empty()) {
    const double dev_fraction = dev.empty() ? config.corpus.dev_fraction : 0.0;
    const double test_fraction = test.empty() ? config.corpus.test_fraction : 0.0;
    auto split = split_corpus(train, dev_fraction, test_fraction, config.corpus.split_seed);
    train = std::move(split.train);
    if (dev.empty()) dev = std::move(split.dev);
    if (test.empty()) test = std::move(split.test);
  }

  const auto types = entity_types(train);
  run.schedule = build_schedule({types.begin(), types.end()}, config.fg, config.pg, config.order_seed);
  run.data = greedy_slice(train, run.schedule, config.slice_seed);
  run.data.dev = std::move(dev);
  run.data.test = std::move(test);
  return run;
}

}  // namespace spt
