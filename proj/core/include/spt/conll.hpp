#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "spt/bio.hpp"

namespace spt {

struct ConllParseResult {
  std::vector<TaggedSentence> sentences;
  // Dangling I- tags rewritten to B-.
  std::size_t repaired_tags = 0;
};

/// Parses whitespace-separated columns, one token per line, blank lines
/// between sentences. The first column is the token and the last is the BIO
/// tag; every data line must have the same column count as the first one.
/// "-DOCSTART-" lines are skipped. Throws InputError on an empty corpus and
/// ParseError (with line number) on ragged lines or bad tags.
ConllParseResult parse_conll(std::string_view text);
ConllParseResult read_conll(const std::filesystem::path& path);

/// Canonical form: "token\ttag\n" per token, each sentence followed by "\n".
std::string serialize_conll(const std::vector<TaggedSentence>& sentences);
void write_conll(const std::vector<TaggedSentence>& sentences, const std::filesystem::path& path);

}  // namespace spt
