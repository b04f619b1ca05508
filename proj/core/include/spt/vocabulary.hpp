#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "spt/bio.hpp"

namespace spt {

// Whitespace-token vocabulary; id 0 is the unknown token.
class Vocabulary {
 public:
  static constexpr std::size_t kUnknownId = 0;
  static constexpr const char* kUnknownToken = "<unk>";

  Vocabulary();
  // Tokens in first-seen order over the corpus.
  static Vocabulary build(const std::vector<TaggedSentence>& corpus);
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  std::size_t size() const { return tokens_.size(); }
  std::size_t id(const std::string& token) const;
  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace spt
