#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "spt/bio.hpp"

namespace spt {

/// Recipe for a synthetic tagged corpus. Template tokens of the form <TYPE>
/// are entity slots filled from the gazetteer; multi-token gazetteer entries
/// expand to B-/I- runs.
struct SynthSpec {
  std::map<std::string, std::vector<std::string>> gazetteer;
  std::vector<std::string> templates;
  // Minimum number of mentions to generate per type.
  std::map<std::string, std::size_t> counts;
  // Extra sentences drawn from slot-free templates.
  std::size_t filler_sentences = 0;
  std::uint64_t seed = 1;
};

struct SynthCorpus {
  std::vector<TaggedSentence> sentences;
  std::map<std::string, std::size_t> mention_counts;
};

// Structured-text (JSON) form: {"gazetteer": {...}, "templates": [...],
// "counts": {...}, "filler_sentences": n, "seed": n}. Throws SpecError.
SynthSpec parse_synth_spec(std::string_view text);
SynthSpec read_synth_spec(const std::filesystem::path& path);

/// Draws templates until every type reaches its requested mention count.
/// Throws SpecError on an empty gazetteer, a type without entries, or a
/// requested type that no template mentions.
SynthCorpus synth_corpus(const SynthSpec& spec);
SynthCorpus synth_corpus(const SynthSpec& spec, std::uint64_t seed);

}  // namespace spt
