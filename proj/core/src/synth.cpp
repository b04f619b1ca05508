#include "spt/synth.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "spt/error.hpp"

namespace spt {
namespace {

std::vector<std::string> split_tokens(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

// "<PER>" -> "PER"; anything else -> "".
std::string slot_type(const std::string& token) {
  if (token.size() > 2 && token.front() == '<' && token.back() == '>') return token.substr(1, token.size() - 2);
  return {};
}

std::size_t pick(std::size_t n, std::mt19937_64& rng) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace

SynthSpec parse_synth_spec(std::string_view text) {
  using nlohmann::json;
  SynthSpec spec;
  try {
    const json j = json::parse(text);
    spec.gazetteer = j.at("gazetteer").get<std::map<std::string, std::vector<std::string>>>();
    spec.templates = j.at("templates").get<std::vector<std::string>>();
    spec.counts = j.value("counts", std::map<std::string, std::size_t>{});
    spec.filler_sentences = j.value("filler_sentences", std::size_t{0});
    spec.seed = j.value("seed", std::uint64_t{1});
  } catch (const json::exception& e) {
    throw SpecError(std::string("malformed synthetic corpus spec: ") + e.what());
  }
  return spec;
}

SynthSpec read_synth_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open synthetic corpus spec: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_synth_spec(buf.str());
}

SynthCorpus synth_corpus(const SynthSpec& spec) { return synth_corpus(spec, spec.seed); }

SynthCorpus synth_corpus(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.gazetteer.empty()) throw SpecError("synthetic spec has an empty gazetteer");
  for (const auto& [type, entries] : spec.gazetteer) {
    if (entries.empty()) throw SpecError("gazetteer type " + type + " has no entries");
  }

  struct Template {
    std::vector<std::string> tokens;
    std::vector<std::string> slots;
  };
  std::vector<Template> templates;
  std::vector<std::size_t> slot_free;
  for (const auto& text : spec.templates) {
    Template t{split_tokens(text), {}};
    if (t.tokens.empty()) throw SpecError("empty template");
    for (const auto& tok : t.tokens) {
      if (auto type = slot_type(tok); !type.empty()) {
        if (!spec.gazetteer.contains(type)) throw SpecError("template slot <" + type + "> has no gazetteer entry");
        t.slots.push_back(type);
      }
    }
    if (t.slots.empty()) slot_free.push_back(templates.size());
    templates.push_back(std::move(t));
  }

  std::map<std::string, std::vector<std::size_t>> by_type;
  for (std::size_t i = 0; i < templates.size(); ++i)
    for (const auto& type : templates[i].slots) {
      auto& list = by_type[type];
      if (list.empty() || list.back() != i) list.push_back(i);
    }
  for (const auto& [type, count] : spec.counts) {
    if (count > 0 && !by_type.contains(type)) throw SpecError("no template mentions requested type " + type);
  }
  if (spec.filler_sentences > 0 && slot_free.empty()) {
    throw SpecError("filler sentences requested but every template has entity slots");
  }

  std::mt19937_64 rng(seed);
  SynthCorpus out;
  for (const auto& [type, entries] : spec.gazetteer) out.mention_counts[type] = 0;

  auto emit = [&](const Template& t) {
    TaggedSentence s;
    for (const auto& tok : t.tokens) {
      const auto type = slot_type(tok);
      if (type.empty()) {
        s.tokens.push_back(tok);
        s.tags.emplace_back(kOutsideTag);
        continue;
      }
      const auto& entries = spec.gazetteer.at(type);
      const auto words = split_tokens(entries[pick(entries.size(), rng)]);
      for (std::size_t w = 0; w < words.size(); ++w) {
        s.tokens.push_back(words[w]);
        s.tags.push_back(w == 0 ? begin_tag(type) : inside_tag(type));
      }
      ++out.mention_counts[type];
    }
    out.sentences.push_back(std::move(s));
  };

  for (;;) {
    std::vector<std::string> deficient;
    for (const auto& [type, count] : spec.counts)
      if (out.mention_counts[type] < count) deficient.push_back(type);
    if (deficient.empty()) break;
    const auto& type = deficient[pick(deficient.size(), rng)];
    const auto& options = by_type.at(type);
    emit(templates[options[pick(options.size(), rng)]]);
  }
  for (std::size_t i = 0; i < spec.filler_sentences; ++i) emit(templates[slot_free[pick(slot_free.size(), rng)]]);

  // Interleave filler with entity sentences deterministically.
  std::shuffle(out.sentences.begin(), out.sentences.end(), rng);
  return out;
}

}  // namespace spt
