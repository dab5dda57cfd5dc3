#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ckgen/concept.hpp"
#include "ckgen/model.hpp"
#include "ckgen/tagger.hpp"

namespace ckgen {

struct GenerationCandidate {
  std::vector<int> tokens;          // generated ids, end marker excluded
  std::vector<std::string> words;   // decoded tokens (filled by the pipeline)
  double beam_score = 0.0;          // cumulative log-probability
  double coverage = 0.0;
};

struct DecodeConfig {
  std::size_t beam_width = 4;
  std::size_t best_n = 4;
  std::size_t max_len = 20;
  // Beam search favouring shorter sentences is load-bearing for Best-N
  // scoring, so normalization stays off unless asked for.
  bool length_normalize = false;

  void validate() const;
};

// Next-token interface beam search runs against; the mock table models in
// the tests and the transformer adapter both implement it.
class StepScorer {
 public:
  virtual ~StepScorer() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual int end_token() const = 0;
  // log P(token | prefix); -inf entries are unreachable.
  virtual std::vector<double> next_log_probs(const std::vector<int>& prefix) const = 0;
};

// Standard beam search; candidates end at the end token or max_len. Returns
// the top config.best_n candidates by beam score (deterministic tie-break on
// token sequence).
std::vector<GenerationCandidate> beam_search(const StepScorer& scorer,
                                             const DecodeConfig& config);

using LemmaFn = std::function<std::string(const std::string&)>;

// Start indices of sentence windows whose lemmas match the (possibly
// multi-word) concept label.
std::vector<std::size_t> concept_matches(const std::vector<std::string>& tokens,
                                         const Concept& item, const LemmaFn& matcher);

bool concept_presence(const std::vector<std::string>& tokens, const Concept& item,
                      const LemmaFn& matcher);

// (present / |cs|) * (correct POS / |cs|); absent concepts count as wrong
// POS, present ones are POS-correct when any matching window starts with the
// required tag.
double coverage_score(const std::vector<std::string>& tokens, const ConceptSet& cs,
                      const PosTagger& tagger, const LemmaFn& matcher);

void score_coverage(std::vector<GenerationCandidate>& candidates, const ConceptSet& cs,
                    const PosTagger& tagger, const LemmaFn& matcher);

// Highest coverage wins; ties go to the higher beam score. Candidates must
// already be sorted by descending beam score. Throws on an empty list.
GenerationCandidate best_n_select(std::vector<GenerationCandidate> candidates,
                                  const ConceptSet& cs, const PosTagger& tagger,
                                  const LemmaFn& matcher);

// Beam-search adapter over the trained model: one scorer per source sample.
class ModelStepScorer : public StepScorer {
 public:
  ModelStepScorer(const InjectionModel& model, const EncodedSample& sample, InjectionMode mode)
      : model_(model), sample_(sample), mode_(mode) {}

  std::size_t vocab_size() const override { return model_.config().vocab_size; }
  int end_token() const override { return Vocab::kSep; }
  std::vector<double> next_log_probs(const std::vector<int>& prefix) const override {
    return model_.next_token_log_probs(sample_, mode_, prefix);
  }

 private:
  const InjectionModel& model_;
  const EncodedSample& sample_;
  InjectionMode mode_;
};

}  // namespace ckgen
