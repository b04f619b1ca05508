#pragma once

#include <string>
#include <vector>

#include "spt/bio.hpp"
#include "spt/vocabulary.hpp"

namespace spt {

// A sentence as model inputs: token ids plus tag indices into a tag space.
struct EncodedSentence {
  std::vector<std::size_t> token_ids;
  std::vector<std::size_t> tag_ids;

  std::size_t size() const { return token_ids.size(); }
};

// Throws ScheduleError when a tag is missing from tag_space.
EncodedSentence encode_sentence(const TaggedSentence& sentence, const Vocabulary& vocab,
                                const std::vector<std::string>& tag_space);
std::vector<EncodedSentence> encode_all(const std::vector<TaggedSentence>& sentences, const Vocabulary& vocab,
                                        const std::vector<std::string>& tag_space);

}  // namespace spt
