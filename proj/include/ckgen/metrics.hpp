#pragma once

#include <string>
#include <vector>

#include "ckgen/concept.hpp"
#include "ckgen/decode.hpp"
#include "ckgen/tagger.hpp"

namespace ckgen {

using TokenSeq = std::vector<std::string>;

struct BleuResult {
  double score = 0.0;                 // [0,1]
  std::vector<double> precisions;     // clipped n-gram precision per order
  double brevity_penalty = 1.0;
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;
};

// Corpus BLEU-n: geometric mean of clipped modified precisions with brevity
// penalty, multi-reference clipping, no smoothing. Effective reference length
// is the closest to the hypothesis (ties to the shorter). Throws on an empty
// corpus.
BleuResult corpus_bleu(const std::vector<TokenSeq>& hypotheses,
                       const std::vector<std::vector<TokenSeq>>& references, int max_n);

// LCS F1 and bigram-overlap F1, max over references.
double rouge_l(const TokenSeq& hypothesis, const std::vector<TokenSeq>& references);
double rouge_2(const TokenSeq& hypothesis, const std::vector<TokenSeq>& references);

struct ConstraintReport {
  double missing_concept_pct = 0.0;  // 100 * missing occurrences / occurrences
  double pos_mismatch_pct = 0.0;     // 100 * samples with a mismatch / samples
  std::vector<std::size_t> missing_per_sample;
  std::vector<bool> mismatch_per_sample;
};

// A present concept mismatches when no matching window carries the required
// tag; absent concepts count toward missing only.
ConstraintReport constraint_report(const std::vector<TokenSeq>& outputs,
                                   const std::vector<ConceptSet>& concept_sets,
                                   const PosTagger& tagger, const LemmaFn& matcher);

struct SampleEvalRow {
  std::string id;
  double rouge_l = 0.0;
  double rouge_2 = 0.0;
  double coverage = 0.0;
  std::size_t missing_concepts = 0;
  bool pos_mismatch = false;
};

struct EvalReport {
  double bleu[4] = {0.0, 0.0, 0.0, 0.0};  // BLEU-1..4, stored in [0,1]
  double rouge_l = 0.0;
  double rouge_2 = 0.0;
  double missing_concept_pct = 0.0;
  double pos_mismatch_pct = 0.0;
  std::vector<SampleEvalRow> rows;

  std::string to_json(const std::string& run_label, const std::string& config_hash) const;
  // Aligned-column table in the layout of the paper's result tables.
  std::string to_table(const std::string& run_label) const;
};

EvalReport evaluate_outputs(const std::vector<std::string>& ids,
                            const std::vector<TokenSeq>& hypotheses,
                            const std::vector<std::vector<TokenSeq>>& references,
                            const std::vector<ConceptSet>& concept_sets,
                            const PosTagger& tagger, const LemmaFn& matcher);

}  // namespace ckgen
