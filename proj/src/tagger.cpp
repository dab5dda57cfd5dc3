#include "ckgen/tagger.hpp"

#include <fstream>
#include <stdexcept>

#include "ckgen/lemma.hpp"

namespace ckgen {

namespace {

bool ends_with(const std::string& s, const char* suffix) {
  const std::size_t n = std::char_traits<char>::length(suffix);
  return s.size() >= n && s.compare(s.size() - n, n, suffix) == 0;
}

Pos suffix_guess(const std::string& w) {
  if (ends_with(w, "ly") && w.size() > 3) return Pos::R;
  if ((ends_with(w, "ing") || ends_with(w, "ed")) && w.size() > 4) return Pos::V;
  if ((ends_with(w, "ous") || ends_with(w, "ful") || ends_with(w, "ive") ||
       ends_with(w, "able") || ends_with(w, "ish")) &&
      w.size() > 4)
    return Pos::A;
  return Pos::N;
}

}  // namespace

LexiconTagger LexiconTagger::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open POS lexicon: " + path);
  LexiconTagger tagger;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab + 2 != line.size())
      throw std::runtime_error("bad lexicon line " + std::to_string(lineno) + " in " + path);
    const Pos pos = pos_from_letter(line[tab + 1]);
    if (pos == Pos::None)
      throw std::runtime_error("bad lexicon tag at line " + std::to_string(lineno));
    tagger.add(line.substr(0, tab), pos);
  }
  return tagger;
}

void LexiconTagger::add(const std::string& word, Pos pos) { lexicon_[word] = pos; }

Pos LexiconTagger::tag_word(const std::string& word) const {
  auto it = lexicon_.find(word);
  if (it != lexicon_.end()) return it->second;
  it = lexicon_.find(lemma(word));
  if (it != lexicon_.end()) return it->second;
  return suffix_guess(word);
}

std::vector<Pos> LexiconTagger::tag(const std::vector<std::string>& tokens) const {
  std::vector<Pos> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(tag_word(t));
  return out;
}

}  // namespace ckgen
