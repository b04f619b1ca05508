#include "spt/slicing.hpp"

#include <algorithm>
#include <numeric>
#include <cmath>
#include <random>

#include "spt/error.hpp"

namespace spt {

const std::vector<TaggedSentence>& SlicedDataset::train_slice(std::size_t t) const {
  if (t == 0 || t > train.size()) throw ScheduleError("no train slice for step " + std::to_string(t));
  return train[t - 1];
}

std::vector<TaggedSentence> mask_all(const std::vector<TaggedSentence>& sentences,
                                     const std::set<std::string>& visible_types) {
  std::vector<TaggedSentence> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(mask_labels(s, visible_types));
  return out;
}

std::vector<TaggedSentence> SlicedDataset::dev_view(const EntityTypeSchedule& schedule, std::size_t t) const {
  const auto& types = schedule.types_at(t);
  return mask_all(dev, {types.begin(), types.end()});
}

std::vector<TaggedSentence> SlicedDataset::test_view(const EntityTypeSchedule& schedule, std::size_t t) const {
  return mask_all(test, schedule.types_through(t));
}

SlicedDataset greedy_slice(const std::vector<TaggedSentence>& corpus, const EntityTypeSchedule& schedule,
                           std::uint64_t seed) {
  if (corpus.empty()) throw SlicingError("cannot slice an empty corpus");
  const std::size_t steps = schedule.num_steps();
  if (steps == 0) throw SlicingError("schedule has no steps");

  const auto present = entity_types(corpus);
  for (const auto& type : schedule.ordered_types) {
    if (!present.contains(type)) throw SlicingError("scheduled type " + type + " never occurs in the corpus");
  }

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  SlicedDataset out;
  out.train.resize(steps);
  out.train_sources.resize(steps);
  std::size_t round_robin = 0;
  for (auto idx : order) {
    std::vector<std::size_t> mentions(steps, 0);
    for (const auto& tag : corpus[idx].tags) {
      const auto parsed = parse_tag(tag);
      if (parsed.prefix != BioPrefix::kBegin) continue;
      if (auto step = schedule.step_of(parsed.type); step > 0) ++mentions[step - 1];
    }
    std::size_t best = steps;
    for (std::size_t s = 0; s < steps; ++s) {
      if (mentions[s] == 0) continue;
      if (best == steps || mentions[s] > mentions[best] ||
          (mentions[s] == mentions[best] && out.train[s].size() < out.train[best].size())) {
        best = s;
      }
    }
    if (best == steps) best = round_robin++ % steps;
    out.train[best].push_back(corpus[idx]);
    out.train_sources[best].push_back(idx);
  }

  for (std::size_t s = 0; s < steps; ++s) {
    if (out.train[s].empty()) throw SlicingError("step " + std::to_string(s + 1) + " received no sentences");
    const auto& types = schedule.steps[s];
    out.train[s] = mask_all(out.train[s], {types.begin(), types.end()});
  }
  return out;
}

}  // namespace spt

namespace spt {

CorpusSplit split_corpus(const std::vector<TaggedSentence>& corpus, double dev_fraction, double test_fraction,
                         std::uint64_t seed) {
  if (dev_fraction < 0.0 || test_fraction < 0.0 || dev_fraction + test_fraction >= 1.0) {
    throw ConfigError("split fractions must be non-negative and sum to less than 1");
  }
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n = static_cast<double>(corpus.size());
  const auto n_dev = static_cast<std::size_t>(std::lround(dev_fraction * n));
  const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * n));
  CorpusSplit out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& s = corpus[order[i]];
    if (i < n_dev) {
      out.dev.push_back(s);
    } else if (i < n_dev + n_test) {
      out.test.push_back(s);
    } else {
      out.train.push_back(s);
    }
  }
  return out;
}

}  // namespace spt
