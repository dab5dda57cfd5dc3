#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ckgen/concept.hpp"
#include "ckgen/kg.hpp"

namespace ckgen {

// A 1-, 2- or 3-hop chain of edges in traversal order. Relations keep their
// stored head->tail name regardless of the direction they were walked.
struct KnowledgePath {
  std::vector<Concept> concepts;        // hop_count() + 1 entries
  std::vector<std::string> relations;   // one per hop
  std::vector<double> weights;          // one per hop

  std::size_t hop_count() const { return relations.size(); }
  const std::string& endpoint_a() const { return concepts.front().label; }
  const std::string& endpoint_b() const { return concepts.back().label; }
  bool touches(const std::string& label) const {
    return endpoint_a() == label || endpoint_b() == label;
  }

  // Path strength is its weakest hop; used to pick per-concept
  // representatives when a selection pass would drop a concept entirely.
  double strength() const;

  // Orientation-free dedup/sort key: (unordered endpoint pair, hop sequence).
  std::string dedup_key() const;
};

enum class SelectionStrategy { None, RandomSubset, PriorSubset };

struct SelectionConfig {
  std::set<std::string> excluded_relation_types = {"FormOf", "DerivedFrom", "Antonym",
                                                   "DistinctFrom"};
  bool pos_constrained = false;
  SelectionStrategy strategy = SelectionStrategy::None;
  double random_p = 0.5;
  double prior_threshold = 0.9;
  std::uint64_t seed = 0;
  bool at_least_one_per_concept = true;
};

// All 1-hop and 2-hop paths linking two distinct concept-set labels, plus
// 3-hop paths for labels that would otherwise stay disconnected. For the
// fallback, first-level roots are limited to the concept's k_fallback
// strongest neighbors. Output is deduplicated and sorted by dedup_key.
std::vector<KnowledgePath> extract_multihop(const KnowledgeGraph& graph, const ConceptSet& cs,
                                            std::size_t k_fallback = 5);

// Drops paths with excluded relation types and, when pos_constrained, paths
// whose endpoint occurrences carry a graph POS tag contradicting the
// concept-set tag. Untagged occurrences never contradict.
std::vector<KnowledgePath> filter_relations(const std::vector<KnowledgePath>& paths,
                                            const SelectionConfig& config, const ConceptSet& cs);

// Keeps each path independently with probability config.random_p; when
// at_least_one_per_concept is set, re-adds the strongest path for any
// endpoint label that lost all of its paths. Output preserves input order.
std::vector<KnowledgePath> random_subset(const std::vector<KnowledgePath>& paths,
                                         const SelectionConfig& config);

// Relation-type prior: occurrences of the type over total hop occurrences.
// Throws std::invalid_argument on an empty corpus.
std::map<std::string, double> compute_priors(const std::vector<KnowledgePath>& corpus_paths);

// Keeps a path iff max-prior-hop-type + uniform draw exceeds
// config.prior_threshold, then applies the same per-concept repair.
std::vector<KnowledgePath> prior_subset(const std::vector<KnowledgePath>& paths,
                                        const std::map<std::string, double>& priors,
                                        const SelectionConfig& config);

// Interpretation of length-and-frequency knowledge selection: shorter paths
// first, then higher hop-type prior, then dedup_key.
std::vector<KnowledgePath> length_frequency_rank(const std::vector<KnowledgePath>& paths,
                                                 const std::map<std::string, double>& priors);

// 1-hop neighbors adjacent to more than half of the concept-set labels,
// ordered by descending frequency then label, truncated to max_expansions.
std::vector<Concept> expand_query(const KnowledgeGraph& graph, const ConceptSet& cs,
                                  std::size_t max_expansions = SIZE_MAX);

struct ExtractionStats {
  double avg_relations = 0.0;
  double concept_coverage = 1.0;
};

ExtractionStats extraction_stats(const std::vector<std::vector<KnowledgePath>>& per_sample_paths,
                                 const std::vector<ConceptSet>& concept_sets);

}  // namespace ckgen
