#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "ckgen/concept.hpp"

namespace ckgen {

// Assigns one POS tag per sentence token. Implementations must be
// deterministic; coverage scoring and the constraint report depend on it.
class PosTagger {
 public:
  virtual ~PosTagger() = default;
  virtual std::vector<Pos> tag(const std::vector<std::string>& tokens) const = 0;
};

// Lexicon lookup (surface form, then lemma), falling back to suffix rules,
// then N. The shipped lexicon lives at data/pos_lexicon.tsv.
class LexiconTagger : public PosTagger {
 public:
  LexiconTagger() = default;

  // word<TAB>tag-letter per line; '#' comments allowed.
  static LexiconTagger from_file(const std::string& path);

  void add(const std::string& word, Pos pos);
  Pos tag_word(const std::string& word) const;
  std::vector<Pos> tag(const std::vector<std::string>& tokens) const override;
  std::size_t size() const { return lexicon_.size(); }

 private:
  std::unordered_map<std::string, Pos> lexicon_;
};

}  // namespace ckgen
