#include "spt/vocabulary.hpp"

#include "spt/error.hpp"

namespace spt {

Vocabulary::Vocabulary() { add(kUnknownToken); }

Vocabulary Vocabulary::build(const std::vector<TaggedSentence>& corpus) {
  Vocabulary v;
  for (const auto& s : corpus)
    for (const auto& tok : s.tokens) v.add(tok);
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.empty() || tokens.front() != kUnknownToken) {
    throw InputError("vocabulary must start with the unknown token");
  }
  Vocabulary v;
  for (std::size_t i = 1; i < tokens.size(); ++i) v.add(tokens[i]);
  if (v.size() != tokens.size()) throw InputError("vocabulary contains duplicate tokens");
  return v;
}

void Vocabulary::add(const std::string& token) {
  if (index_.emplace(token, tokens_.size()).second) tokens_.push_back(token);
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnknownId : it->second;
}

std::vector<std::size_t> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

}  // namespace spt

#include <algorithm>

#include "spt/encoded.hpp"

namespace spt {

EncodedSentence encode_sentence(const TaggedSentence& sentence, const Vocabulary& vocab,
                                const std::vector<std::string>& tag_space) {
  EncodedSentence out;
  out.token_ids = vocab.encode(sentence.tokens);
  out.tag_ids.reserve(sentence.tags.size());
  for (const auto& tag : sentence.tags) {
    auto it = std::find(tag_space.begin(), tag_space.end(), tag);
    if (it == tag_space.end()) throw ScheduleError("tag '" + tag + "' is not in the model's tag space");
    out.tag_ids.push_back(static_cast<std::size_t>(it - tag_space.begin()));
  }
  return out;
}

std::vector<EncodedSentence> encode_all(const std::vector<TaggedSentence>& sentences, const Vocabulary& vocab,
                                        const std::vector<std::string>& tag_space) {
  std::vector<EncodedSentence> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(encode_sentence(s, vocab, tag_space));
  return out;
}

}  // namespace spt
