#include "spt/bio.hpp"

#include "spt/error.hpp"

namespace spt {

ParsedTag parse_tag(std::string_view tag) {
  if (tag == kOutsideTag) return {};
  if (tag.size() > 2 && tag[1] == '-' && (tag[0] == 'B' || tag[0] == 'I')) {
    return {tag[0] == 'B' ? BioPrefix::kBegin : BioPrefix::kInside, std::string(tag.substr(2))};
  }
  throw InputError("malformed BIO tag '" + std::string(tag) + "'");
}

std::string begin_tag(std::string_view type) { return "B-" + std::string(type); }
std::string inside_tag(std::string_view type) { return "I-" + std::string(type); }

std::string tag_type(std::string_view tag) { return parse_tag(tag).type; }

TaggedSentence mask_labels(const TaggedSentence& sentence, const std::set<std::string>& visible_types) {
  TaggedSentence out = sentence;
  for (auto& tag : out.tags) {
    const auto parsed = parse_tag(tag);
    if (parsed.prefix != BioPrefix::kOutside && !visible_types.contains(parsed.type)) tag = kOutsideTag;
  }
  return out;
}

std::size_t repair_bio(std::vector<std::string>& tags) {
  std::size_t repaired = 0;
  std::string open_type;
  for (auto& tag : tags) {
    auto parsed = parse_tag(tag);
    if (parsed.prefix == BioPrefix::kInside && parsed.type != open_type) {
      tag = begin_tag(parsed.type);
      ++repaired;
    }
    open_type = parsed.type;
  }
  return repaired;
}

std::set<std::string> entity_types(const std::vector<TaggedSentence>& corpus) {
  std::set<std::string> types;
  for (const auto& s : corpus)
    for (const auto& tag : s.tags) {
      auto t = tag_type(tag);
      if (!t.empty()) types.insert(std::move(t));
    }
  return types;
}

}  // namespace spt
