#include "spt/schedule.hpp"

#include <algorithm>
#include <random>

#include "spt/bio.hpp"
#include "spt/error.hpp"

namespace spt {

std::size_t EntityTypeSchedule::step_size(std::size_t t) const { return types_at(t).size(); }

std::size_t EntityTypeSchedule::cumulative_size(std::size_t t) const {
  if (t > steps.size()) throw ScheduleError("step " + std::to_string(t) + " beyond T=" + std::to_string(steps.size()));
  std::size_t total = 0;
  for (std::size_t m = 0; m < t; ++m) total += steps[m].size();
  return total;
}

const std::vector<std::string>& EntityTypeSchedule::types_at(std::size_t t) const {
  if (t == 0 || t > steps.size()) {
    throw ScheduleError("step " + std::to_string(t) + " outside 1.." + std::to_string(steps.size()));
  }
  return steps[t - 1];
}

std::set<std::string> EntityTypeSchedule::types_through(std::size_t t) const {
  std::set<std::string> out;
  for (std::size_t m = 1; m <= t; ++m) out.insert(types_at(m).begin(), types_at(m).end());
  return out;
}

std::set<std::string> EntityTypeSchedule::types_before(std::size_t t) const {
  return t <= 1 ? std::set<std::string>{} : types_through(t - 1);
}

std::vector<std::string> EntityTypeSchedule::tags_at(std::size_t t) const {
  std::vector<std::string> tags;
  for (const auto& type : types_at(t)) {
    tags.push_back(begin_tag(type));
    tags.push_back(inside_tag(type));
  }
  return tags;
}

std::size_t EntityTypeSchedule::step_of(const std::string& type) const {
  for (std::size_t m = 0; m < steps.size(); ++m)
    if (std::find(steps[m].begin(), steps[m].end(), type) != steps[m].end()) return m + 1;
  return 0;
}

std::string EntityTypeSchedule::setting_name() const {
  return "FG-" + std::to_string(fg) + "-PG-" + std::to_string(pg);
}

EntityTypeSchedule build_schedule(std::vector<std::string> types, std::size_t fg, std::size_t pg,
                                  std::optional<std::uint64_t> permutation_seed) {
  std::sort(types.begin(), types.end());
  types.erase(std::unique(types.begin(), types.end()), types.end());
  if (fg == 0 || pg == 0) throw ScheduleError("FG and PG must both be at least 1");
  if (fg > types.size()) {
    throw ScheduleError("FG=" + std::to_string(fg) + " exceeds the " + std::to_string(types.size()) +
                        " available entity types");
  }
  if (permutation_seed) {
    std::mt19937_64 rng(*permutation_seed);
    std::shuffle(types.begin(), types.end(), rng);
  }
  EntityTypeSchedule schedule;
  schedule.ordered_types = types;
  schedule.fg = fg;
  schedule.pg = pg;
  schedule.permutation_seed = permutation_seed;
  schedule.steps.emplace_back(types.begin(), types.begin() + static_cast<std::ptrdiff_t>(fg));
  for (std::size_t i = fg; i < types.size(); i += pg) {
    const std::size_t end = std::min(types.size(), i + pg);
    schedule.steps.emplace_back(types.begin() + static_cast<std::ptrdiff_t>(i),
                                types.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return schedule;
}

}  // namespace spt
