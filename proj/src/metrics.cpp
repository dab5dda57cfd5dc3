#include "ckgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ckgen {

namespace {

std::map<std::string, std::size_t> ngram_counts(const TokenSeq& tokens, std::size_t n) {
  std::map<std::string, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t j = 1; j < n; ++j) {
      key += '\x1f';
      key += tokens[i + j];
    }
    counts[key] += 1;
  }
  return counts;
}

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double f1(double matches, double hyp_total, double ref_total) {
  if (matches == 0.0 || hyp_total == 0.0 || ref_total == 0.0) return 0.0;
  const double p = matches / hyp_total;
  const double r = matches / ref_total;
  return 2.0 * p * r / (p + r);
}

}  // namespace

BleuResult corpus_bleu(const std::vector<TokenSeq>& hypotheses,
                       const std::vector<std::vector<TokenSeq>>& references, int max_n) {
  if (hypotheses.empty()) throw std::invalid_argument("corpus_bleu: empty corpus");
  if (hypotheses.size() != references.size())
    throw std::invalid_argument("corpus_bleu: hypothesis/reference count mismatch");
  if (max_n < 1 || max_n > 4) throw std::invalid_argument("corpus_bleu: n must be in 1..4");

  BleuResult result;
  std::vector<std::size_t> matched(max_n, 0), total(max_n, 0);
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const TokenSeq& hyp = hypotheses[i];
    const auto& refs = references[i];
    if (refs.empty()) throw std::invalid_argument("corpus_bleu: sample without references");

    result.hypothesis_length += hyp.size();
    std::size_t best_ref = refs[0].size();
    for (const auto& ref : refs) {
      const auto diff = [&](std::size_t len) {
        return len > hyp.size() ? len - hyp.size() : hyp.size() - len;
      };
      if (diff(ref.size()) < diff(best_ref) ||
          (diff(ref.size()) == diff(best_ref) && ref.size() < best_ref))
        best_ref = ref.size();
    }
    result.reference_length += best_ref;

    for (int n = 1; n <= max_n; ++n) {
      const auto hyp_counts = ngram_counts(hyp, static_cast<std::size_t>(n));
      std::map<std::string, std::size_t> max_ref_counts;
      for (const auto& ref : refs)
        for (const auto& [gram, count] : ngram_counts(ref, static_cast<std::size_t>(n)))
          max_ref_counts[gram] = std::max(max_ref_counts[gram], count);
      for (const auto& [gram, count] : hyp_counts) {
        total[n - 1] += count;
        auto it = max_ref_counts.find(gram);
        if (it != max_ref_counts.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }

  double log_sum = 0.0;
  bool zero = false;
  for (int n = 0; n < max_n; ++n) {
    const double p = total[n] == 0
                         ? 0.0
                         : static_cast<double>(matched[n]) / static_cast<double>(total[n]);
    result.precisions.push_back(p);
    if (p == 0.0)
      zero = true;
    else
      log_sum += std::log(p);
  }
  result.brevity_penalty =
      result.hypothesis_length >= result.reference_length || result.hypothesis_length == 0
          ? 1.0
          : std::exp(1.0 - static_cast<double>(result.reference_length) /
                               static_cast<double>(result.hypothesis_length));
  if (result.hypothesis_length == 0) result.brevity_penalty = 0.0;
  result.score = zero ? 0.0 : result.brevity_penalty * std::exp(log_sum / max_n);
  return result;
}

double rouge_l(const TokenSeq& hypothesis, const std::vector<TokenSeq>& references) {
  double best = 0.0;
  for (const auto& ref : references) {
    const double lcs = static_cast<double>(lcs_length(hypothesis, ref));
    best = std::max(best, f1(lcs, static_cast<double>(hypothesis.size()),
                             static_cast<double>(ref.size())));
  }
  return best;
}

double rouge_2(const TokenSeq& hypothesis, const std::vector<TokenSeq>& references) {
  const auto hyp_bigrams = ngram_counts(hypothesis, 2);
  double hyp_total = 0.0;
  for (const auto& [gram, count] : hyp_bigrams) hyp_total += static_cast<double>(count);
  double best = 0.0;
  for (const auto& ref : references) {
    const auto ref_bigrams = ngram_counts(ref, 2);
    double ref_total = 0.0;
    for (const auto& [gram, count] : ref_bigrams) ref_total += static_cast<double>(count);
    double matches = 0.0;
    for (const auto& [gram, count] : hyp_bigrams) {
      auto it = ref_bigrams.find(gram);
      if (it != ref_bigrams.end())
        matches += static_cast<double>(std::min(count, it->second));
    }
    best = std::max(best, f1(matches, hyp_total, ref_total));
  }
  return best;
}

ConstraintReport constraint_report(const std::vector<TokenSeq>& outputs,
                                   const std::vector<ConceptSet>& concept_sets,
                                   const PosTagger& tagger, const LemmaFn& matcher) {
  if (outputs.size() != concept_sets.size())
    throw std::invalid_argument("constraint_report: outputs/concept_sets mismatch");
  ConstraintReport report;
  std::size_t occurrences = 0;
  std::size_t missing = 0;
  std::size_t mismatched_samples = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const auto tags = tagger.tag(outputs[i]);
    std::size_t sample_missing = 0;
    bool sample_mismatch = false;
    for (const auto& item : concept_sets[i].items) {
      ++occurrences;
      const auto matches = concept_matches(outputs[i], item, matcher);
      if (matches.empty()) {
        ++sample_missing;
        continue;
      }
      if (item.pos == Pos::None) continue;
      bool correct = false;
      for (std::size_t start : matches)
        if (tags[start] == item.pos) {
          correct = true;
          break;
        }
      if (!correct) sample_mismatch = true;
    }
    missing += sample_missing;
    if (sample_mismatch) ++mismatched_samples;
    report.missing_per_sample.push_back(sample_missing);
    report.mismatch_per_sample.push_back(sample_mismatch);
  }
  report.missing_concept_pct =
      occurrences == 0 ? 0.0
                       : 100.0 * static_cast<double>(missing) / static_cast<double>(occurrences);
  report.pos_mismatch_pct = outputs.empty() ? 0.0
                                            : 100.0 * static_cast<double>(mismatched_samples) /
                                                  static_cast<double>(outputs.size());
  return report;
}

EvalReport evaluate_outputs(const std::vector<std::string>& ids,
                            const std::vector<TokenSeq>& hypotheses,
                            const std::vector<std::vector<TokenSeq>>& references,
                            const std::vector<ConceptSet>& concept_sets,
                            const PosTagger& tagger, const LemmaFn& matcher) {
  EvalReport report;
  for (int n = 1; n <= 4; ++n)
    report.bleu[n - 1] = corpus_bleu(hypotheses, references, n).score;
  const ConstraintReport cr = constraint_report(hypotheses, concept_sets, tagger, matcher);
  report.missing_concept_pct = cr.missing_concept_pct;
  report.pos_mismatch_pct = cr.pos_mismatch_pct;

  double rl = 0.0, r2 = 0.0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    SampleEvalRow row;
    row.id = i < ids.size() ? ids[i] : std::to_string(i);
    row.rouge_l = rouge_l(hypotheses[i], references[i]);
    row.rouge_2 = rouge_2(hypotheses[i], references[i]);
    row.coverage = coverage_score(hypotheses[i], concept_sets[i], tagger, matcher);
    row.missing_concepts = cr.missing_per_sample[i];
    row.pos_mismatch = cr.mismatch_per_sample[i];
    rl += row.rouge_l;
    r2 += row.rouge_2;
    report.rows.push_back(std::move(row));
  }
  if (!hypotheses.empty()) {
    report.rouge_l = rl / static_cast<double>(hypotheses.size());
    report.rouge_2 = r2 / static_cast<double>(hypotheses.size());
  }
  return report;
}

std::string EvalReport::to_json(const std::string& run_label,
                                const std::string& config_hash) const {
  nlohmann::json j;
  j["run"] = run_label;
  j["config_hash"] = config_hash;
  j["bleu_1"] = bleu[0];
  j["bleu_2"] = bleu[1];
  j["bleu_3"] = bleu[2];
  j["bleu_4"] = bleu[3];
  j["rouge_l"] = rouge_l;
  j["rouge_2"] = rouge_2;
  j["missing_concept_pct"] = missing_concept_pct;
  j["pos_mismatch_pct"] = pos_mismatch_pct;
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& row : rows)
    rows_json.push_back({{"id", row.id},
                         {"rouge_l", row.rouge_l},
                         {"rouge_2", row.rouge_2},
                         {"coverage", row.coverage},
                         {"missing_concepts", row.missing_concepts},
                         {"pos_mismatch", row.pos_mismatch}});
  j["samples"] = std::move(rows_json);
  return j.dump(2);
}

std::string EvalReport::to_table(const std::string& run_label) const {
  std::ostringstream out;
  auto pct = [](double v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << v;
    return s.str();
  };
  const std::size_t label_width = std::max<std::size_t>(run_label.size(), 10) + 2;
  out << std::left << std::setw(static_cast<int>(label_width)) << "Experiment";
  for (const char* col : {"BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-L", "ROUGE-2",
                          "Missing", "MismPOS"})
    out << std::right << std::setw(9) << col;
  out << "\n";
  out << std::left << std::setw(static_cast<int>(label_width)) << run_label;
  for (int n = 0; n < 4; ++n) out << std::right << std::setw(9) << pct(100.0 * bleu[n]);
  out << std::right << std::setw(9) << pct(100.0 * rouge_l) << std::setw(9)
      << pct(100.0 * rouge_2) << std::setw(9) << pct(missing_concept_pct) << std::setw(9)
      << pct(pos_mismatch_pct) << "\n";
  return out.str();
}

}  // namespace ckgen
