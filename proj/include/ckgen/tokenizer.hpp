#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace ckgen {

// Whitespace + lowercase tokenization over a closed vocabulary learned from
// the corpus. Ids 0..4 are reserved for the special tokens.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;

  Vocab();

  // Adds corpus words by descending frequency (ties: lexicographic).
  static Vocab build(const std::vector<std::string>& texts);

  int id(const std::string& token) const;    // kUnk when absent
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  bool contains(const std::string& token) const;

  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;  // skips special tokens

  const std::vector<std::string>& tokens() const { return tokens_; }
  static Vocab from_tokens(const std::vector<std::string>& tokens);

 private:
  void add(const std::string& token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Lowercases and splits on any whitespace run.
std::vector<std::string> tokenize(const std::string& text);

}  // namespace ckgen
