#include "ckgen/decode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ckgen {

void DecodeConfig::validate() const {
  if (beam_width < 1) throw std::invalid_argument("decode: beam_width must be >= 1");
  if (best_n < 1 || best_n > beam_width)
    throw std::invalid_argument("decode: best_n must be in [1, beam_width]");
  if (max_len < 1) throw std::invalid_argument("decode: max_len must be >= 1");
}

namespace {

struct Beam {
  std::vector<int> tokens;
  double score = 0.0;
};

bool beam_less(const Beam& a, const Beam& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

}  // namespace

std::vector<GenerationCandidate> beam_search(const StepScorer& scorer,
                                             const DecodeConfig& config) {
  config.validate();
  const int end = scorer.end_token();

  std::vector<Beam> active{Beam{}};
  std::vector<Beam> finished;

  for (std::size_t step = 0; step < config.max_len && !active.empty(); ++step) {
    std::vector<Beam> pool;
    for (const Beam& beam : active) {
      const std::vector<double> lp = scorer.next_log_probs(beam.tokens);
      for (std::size_t tok = 0; tok < lp.size(); ++tok) {
        if (std::isinf(lp[tok]) && lp[tok] < 0) continue;
        Beam next = beam;
        next.tokens.push_back(static_cast<int>(tok));
        next.score += lp[tok];
        pool.push_back(std::move(next));
      }
    }
    std::sort(pool.begin(), pool.end(), beam_less);
    if (pool.size() > config.beam_width) pool.resize(config.beam_width);
    active.clear();
    for (Beam& beam : pool) {
      if (beam.tokens.back() == end) {
        beam.tokens.pop_back();  // score keeps the end-token probability
        finished.push_back(std::move(beam));
      } else {
        active.push_back(std::move(beam));
      }
    }
  }
  for (Beam& beam : active) finished.push_back(std::move(beam));

  auto final_key = [&](const Beam& b) {
    if (!config.length_normalize) return b.score;
    return b.score / static_cast<double>(std::max<std::size_t>(1, b.tokens.size()));
  };
  std::sort(finished.begin(), finished.end(), [&](const Beam& a, const Beam& b) {
    const double ka = final_key(a), kb = final_key(b);
    if (ka != kb) return ka > kb;
    return a.tokens < b.tokens;
  });
  if (finished.size() > config.best_n) finished.resize(config.best_n);

  std::vector<GenerationCandidate> out;
  out.reserve(finished.size());
  for (Beam& beam : finished) {
    GenerationCandidate c;
    c.tokens = std::move(beam.tokens);
    c.beam_score = beam.score;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::size_t> concept_matches(const std::vector<std::string>& tokens,
                                         const Concept& item, const LemmaFn& matcher) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : item.label) {
    if (ch == '_') {
      if (!cur.empty()) parts.push_back(matcher(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) parts.push_back(matcher(cur));

  std::vector<std::size_t> starts;
  if (parts.empty() || tokens.size() < parts.size()) return starts;
  std::vector<std::string> token_lemmas;
  token_lemmas.reserve(tokens.size());
  for (const auto& t : tokens) token_lemmas.push_back(matcher(t));
  for (std::size_t i = 0; i + parts.size() <= tokens.size(); ++i) {
    bool all = true;
    for (std::size_t j = 0; j < parts.size(); ++j)
      if (token_lemmas[i + j] != parts[j]) {
        all = false;
        break;
      }
    if (all) starts.push_back(i);
  }
  return starts;
}

bool concept_presence(const std::vector<std::string>& tokens, const Concept& item,
                      const LemmaFn& matcher) {
  return !concept_matches(tokens, item, matcher).empty();
}

double coverage_score(const std::vector<std::string>& tokens, const ConceptSet& cs,
                      const PosTagger& tagger, const LemmaFn& matcher) {
  if (cs.items.empty()) return 0.0;
  const std::vector<Pos> tags = tagger.tag(tokens);
  std::size_t present = 0;
  std::size_t pos_correct = 0;
  for (const auto& item : cs.items) {
    const auto matches = concept_matches(tokens, item, matcher);
    if (matches.empty()) continue;
    ++present;
    if (item.pos == Pos::None) {
      ++pos_correct;
      continue;
    }
    for (std::size_t start : matches)
      if (tags[start] == item.pos) {
        ++pos_correct;
        break;
      }
  }
  const double n = static_cast<double>(cs.items.size());
  return (static_cast<double>(present) / n) * (static_cast<double>(pos_correct) / n);
}

void score_coverage(std::vector<GenerationCandidate>& candidates, const ConceptSet& cs,
                    const PosTagger& tagger, const LemmaFn& matcher) {
  for (auto& c : candidates) c.coverage = coverage_score(c.words, cs, tagger, matcher);
}

GenerationCandidate best_n_select(std::vector<GenerationCandidate> candidates,
                                  const ConceptSet& cs, const PosTagger& tagger,
                                  const LemmaFn& matcher) {
  if (candidates.empty()) throw std::invalid_argument("best_n_select: no candidates");
  score_coverage(candidates, cs, tagger, matcher);
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i)
    if (candidates[i].coverage > candidates[best].coverage) best = i;
  return candidates[best];
}

}  // namespace ckgen
