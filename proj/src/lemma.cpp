#include "ckgen/lemma.hpp"

namespace ckgen {

namespace {

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

bool has_vowel(const std::string& s) {
  for (char c : s)
    if (is_vowel(c) || c == 'y') return true;
  return false;
}

bool ends_with(const std::string& s, const char* suffix) {
  const std::size_t n = std::char_traits<char>::length(suffix);
  return s.size() >= n && s.compare(s.size() - n, n, suffix) == 0;
}

// Doubled final consonant from CVC doubling (run -> running); ll/ss/zz are
// legitimate stem endings and stay.
bool undoubles(const std::string& stem) {
  if (stem.size() < 3) return false;
  const char a = stem[stem.size() - 1];
  const char b = stem[stem.size() - 2];
  if (a != b || is_vowel(a)) return false;
  return a != 'l' && a != 's' && a != 'z';
}

// consonant-vowel-consonant ending (final consonant not w/x/y) marks stems
// that lost a silent e: tak(ing) -> take.
bool cvc_end(const std::string& stem) {
  if (stem.size() < 3) return false;
  const char c2 = stem[stem.size() - 1];
  const char c1 = stem[stem.size() - 2];
  const char c0 = stem[stem.size() - 3];
  if (is_vowel(c2) || c2 == 'w' || c2 == 'x' || c2 == 'y') return false;
  if (!is_vowel(c1)) return false;
  return !is_vowel(c0) && c0 != 'y';
}

std::string strip_participle(const std::string& word, std::size_t suffix_len) {
  std::string stem = word.substr(0, word.size() - suffix_len);
  if (!has_vowel(stem)) return word;
  if (ends_with(stem, "i")) {
    stem.back() = 'y';  // carried -> carry
    return stem;
  }
  if (undoubles(stem)) {
    stem.pop_back();  // running -> run
    return stem;
  }
  if (cvc_end(stem)) return stem + 'e';  // baked -> bake
  return stem;
}

}  // namespace

std::string lemma(const std::string& word) {
  if (ends_with(word, "sses")) return word.substr(0, word.size() - 2);
  if (ends_with(word, "ies") && word.size() >= 5)
    return word.substr(0, word.size() - 3) + 'y';
  if (ends_with(word, "es") && word.size() >= 4) {
    const char before = word[word.size() - 3];
    if (before == 'x' || before == 'z' || before == 's' || before == 'h')
      return word.substr(0, word.size() - 2);
  }
  if (ends_with(word, "ing") && word.size() >= 5) return strip_participle(word, 3);
  if (ends_with(word, "ed") && word.size() >= 4) return strip_participle(word, 2);
  if (ends_with(word, "s") && !ends_with(word, "ss") && word.size() >= 4)
    return word.substr(0, word.size() - 1);
  return word;
}

}  // namespace ckgen
