#include "spt/conll.hpp"

#include <fstream>
#include <sstream>

#include "spt/error.hpp"
#include "spt/log.hpp"

namespace spt {
namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

ConllParseResult parse_conll(std::string_view text) {
  ConllParseResult result;
  TaggedSentence current;
  std::size_t columns = 0;
  std::size_t line_no = 0;

  auto flush = [&] {
    if (current.tokens.empty()) return;
    result.repaired_tags += repair_bio(current.tags);
    result.sentences.push_back(std::move(current));
    current = {};
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    auto fields = split_ws(line);
    if (fields.empty()) {
      flush();
      if (end == text.size()) break;
      continue;
    }
    if (fields.front() == "-DOCSTART-") {
      flush();
      continue;
    }
    if (columns == 0) columns = fields.size();
    if (fields.size() < 2 || fields.size() != columns) {
      throw ParseError("ragged CoNLL line: expected " + std::to_string(std::max<std::size_t>(columns, 2)) +
                           " columns, found " + std::to_string(fields.size()),
                       line_no);
    }
    try {
      parse_tag(fields.back());
    } catch (const InputError& e) {
      throw ParseError(e.what(), line_no);
    }
    current.tokens.emplace_back(fields.front());
    current.tags.emplace_back(fields.back());
    if (end == text.size()) break;
  }
  flush();

  if (result.sentences.empty()) throw InputError("CoNLL input contains no sentences");
  if (result.repaired_tags > 0) {
    log::warning("repaired " + std::to_string(result.repaired_tags) + " dangling I- tag(s) to B-");
  }
  return result;
}

ConllParseResult read_conll(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open corpus file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_conll(buf.str());
}

std::string serialize_conll(const std::vector<TaggedSentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      out += s.tokens[i];
      out += '\t';
      out += s.tags[i];
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

void write_conll(const std::vector<TaggedSentence>& sentences, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open for writing: " + path.string());
  out << serialize_conll(sentences);
}

}  // namespace spt
