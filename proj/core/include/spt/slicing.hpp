#pragma once

#include <cstdint>
#include <vector>

#include "spt/bio.hpp"
#include "spt/schedule.hpp"

namespace spt {

/// Training corpus cut into one slice per continual step, each slice masked to
/// its own step's types, plus shared dev/test pools with full labels.
struct SlicedDataset {
  std::vector<std::vector<TaggedSentence>> train;
  // Corpus index of every sentence in each slice.
  std::vector<std::vector<std::size_t>> train_sources;
  std::vector<TaggedSentence> dev;
  std::vector<TaggedSentence> test;

  std::size_t num_steps() const { return train.size(); }
  const std::vector<TaggedSentence>& train_slice(std::size_t t) const;
  // Dev keeps only step-t types; test keeps every type learned through t.
  std::vector<TaggedSentence> dev_view(const EntityTypeSchedule& schedule, std::size_t t) const;
  std::vector<TaggedSentence> test_view(const EntityTypeSchedule& schedule, std::size_t t) const;
};

/// Stand-in for greedy sampling: sentences are visited in a seeded order and
/// each goes to the step whose types it mentions most often; ties go to the
/// step holding fewer sentences, then to the earlier step. Sentences without
/// scheduled entities are dealt round-robin. Throws SlicingError when the
/// corpus is empty, a scheduled type never occurs, or a step ends up empty.
SlicedDataset greedy_slice(const std::vector<TaggedSentence>& corpus, const EntityTypeSchedule& schedule,
                           std::uint64_t seed);

std::vector<TaggedSentence> mask_all(const std::vector<TaggedSentence>& sentences,
                                     const std::set<std::string>& visible_types);

}  // namespace spt

namespace spt {

struct CorpusSplit {
  std::vector<TaggedSentence> train;
  std::vector<TaggedSentence> dev;
  std::vector<TaggedSentence> test;
};

/// Seeded shuffle, then the leading dev_fraction goes to dev, the next
/// test_fraction to test and the rest to train.
CorpusSplit split_corpus(const std::vector<TaggedSentence>& corpus, double dev_fraction, double test_fraction,
                         std::uint64_t seed);

}  // namespace spt
