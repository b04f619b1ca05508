#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spt/harness.hpp"
#include "spt/schedule.hpp"
#include "spt/slicing.hpp"

namespace spt {

/// Where a run's sentences come from: a CoNLL training file (with optional
/// dev/test files) or a synthetic spec. Missing dev/test pools are split off
/// the training sentences.
struct CorpusSource {
  std::filesystem::path train;
  std::filesystem::path dev;
  std::filesystem::path test;
  std::filesystem::path synth;
  double dev_fraction = 0.1;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 1;
};

struct RunConfig {
  CorpusSource corpus;
  std::size_t fg = 1;
  std::size_t pg = 1;
  std::optional<std::uint64_t> order_seed;
  std::uint64_t slice_seed = 1;
  std::string method = "spt";
  TrainConfig train;
  std::filesystem::path out = "runs/spt";
};

/// Parses the JSON run config. Relative paths resolve against `base_dir`.
/// Every problem found is reported together in one ConfigError.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig read_run_config(const std::filesystem::path& path);

struct RunOverrides {
  std::optional<std::filesystem::path> corpus;  // .json selects a synth spec
  std::optional<std::size_t> fg;
  std::optional<std::size_t> pg;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> order_seed;
  std::optional<std::string> method;
  std::optional<double> lambda;
  std::optional<std::filesystem::path> out;
};

// Applies flags on top of a config, then revalidates it.
void apply_overrides(RunConfig& config, const RunOverrides& overrides);

// Throws ConfigError listing every violated constraint.
void validate(const RunConfig& config);

// Resolved config as JSON (written next to run outputs).
std::string to_json(const RunConfig& config);

struct PreparedRun {
  EntityTypeSchedule schedule;
  SlicedDataset data;
  std::size_t repaired_tags = 0;
};

/// Loads the corpus, builds the schedule over its entity types and slices it.
PreparedRun prepare_run(const RunConfig& config);

}  // namespace spt
