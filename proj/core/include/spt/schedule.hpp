#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace spt {

/// Ordered partition of entity types into continual steps (FG-a-PG-b): the
/// first step introduces `fg` types and every later step `pg` more; the final
/// step may be smaller when types run out. Steps are 1-based throughout.
struct EntityTypeSchedule {
  std::vector<std::string> ordered_types;
  std::size_t fg = 1;
  std::size_t pg = 1;
  std::vector<std::vector<std::string>> steps;
  std::optional<std::uint64_t> permutation_seed;

  std::size_t num_steps() const { return steps.size(); }
  // E^t
  std::size_t step_size(std::size_t t) const;
  // sum_{m=1..t} E^m
  std::size_t cumulative_size(std::size_t t) const;
  const std::vector<std::string>& types_at(std::size_t t) const;
  std::set<std::string> types_through(std::size_t t) const;
  std::set<std::string> types_before(std::size_t t) const;
  // B-/I- tags introduced at step t, in type order.
  std::vector<std::string> tags_at(std::size_t t) const;
  // Step that introduces `type`, or 0 when unscheduled.
  std::size_t step_of(const std::string& type) const;
  std::string setting_name() const;
};

/// Alphabetical order by default; a permutation seed shuffles the order
/// deterministically. Throws ScheduleError when fg or pg is zero or fg exceeds
/// the number of distinct types.
EntityTypeSchedule build_schedule(std::vector<std::string> types, std::size_t fg, std::size_t pg,
                                  std::optional<std::uint64_t> permutation_seed = std::nullopt);

}  // namespace spt
