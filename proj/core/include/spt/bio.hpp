#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace spt {

inline constexpr const char* kOutsideTag = "O";

struct TaggedSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const TaggedSentence&) const = default;
};

enum class BioPrefix { kOutside, kBegin, kInside };

struct ParsedTag {
  BioPrefix prefix = BioPrefix::kOutside;
  std::string type;  // empty for O
};

// Splits "B-PER" into (kBegin, "PER"). Throws InputError on anything that is
// not O, B-<type> or I-<type>.
ParsedTag parse_tag(std::string_view tag);
std::string begin_tag(std::string_view type);
std::string inside_tag(std::string_view type);
// Entity type of a tag, empty for O.
std::string tag_type(std::string_view tag);

/// Tags whose type is not visible become O; everything else is unchanged.
TaggedSentence mask_labels(const TaggedSentence& sentence, const std::set<std::string>& visible_types);

/// Rewrites I- tags that do not continue an entity of the same type to B-.
/// Returns the number of repaired tags.
std::size_t repair_bio(std::vector<std::string>& tags);

// Every entity type mentioned in the corpus, sorted.
std::set<std::string> entity_types(const std::vector<TaggedSentence>& corpus);

}  // namespace spt
