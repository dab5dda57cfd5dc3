#include "ckgen/linearize.hpp"

#include <cctype>

namespace ckgen {

namespace {

void append_word(std::string& out, const std::string& word) {
  if (!out.empty()) out += ' ';
  out += word;
}

std::string concept_words(const Concept& c) {
  std::string s = c.label;
  for (char& ch : s)
    if (ch == '_') ch = ' ';
  return s;
}

}  // namespace

std::string humanize_relation(const std::string& relation) {
  std::string out;
  for (char ch : relation) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::isupper(uc) && !out.empty() && out.back() != ' ') out += ' ';
    if (ch == '_' || ch == '/') {
      if (!out.empty() && out.back() != ' ') out += ' ';
      continue;
    }
    out += static_cast<char>(std::tolower(uc));
  }
  return out;
}

EvidenceSentence linearize_path(const KnowledgePath& path) {
  EvidenceSentence ev;
  ev.source_path = path;
  for (std::size_t i = 0; i < path.concepts.size(); ++i) {
    append_word(ev.text, concept_words(path.concepts[i]));
    if (i < path.relations.size()) append_word(ev.text, humanize_relation(path.relations[i]));
  }
  return ev;
}

std::vector<EvidenceSentence> linearize_paths(const std::vector<KnowledgePath>& paths) {
  std::vector<EvidenceSentence> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(linearize_path(p));
  return out;
}

}  // namespace ckgen
