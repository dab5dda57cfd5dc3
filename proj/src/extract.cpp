#include "ckgen/extract.hpp"

#include <algorithm>
#include <stdexcept>

#include "ckgen/rng.hpp"

namespace ckgen {

namespace {

void append_concept(std::string& out, const Concept& c) {
  out += c.label;
  if (c.pos != Pos::None) {
    out += '/';
    out += pos_letter(c.pos);
  }
}

std::string sequence_string(const std::vector<Concept>& concepts,
                            const std::vector<std::string>& relations, bool reversed) {
  std::string s;
  const std::size_t n = concepts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ci = reversed ? n - 1 - i : i;
    append_concept(s, concepts[ci]);
    if (i + 1 < n) {
      const std::size_t ri = reversed ? n - 2 - i : i;
      s += '\x1f';
      s += relations[ri];
      s += '\x1f';
    }
  }
  return s;
}

const Concept& other_endpoint(const Edge& e, bool matched_is_head) {
  return matched_is_head ? e.tail : e.head;
}

const Concept& matched_endpoint(const Edge& e, bool matched_is_head) {
  return matched_is_head ? e.head : e.tail;
}

// Subset selection shared tail: any endpoint label present in the input but
// absent from the kept set gets its strongest path back.
std::vector<KnowledgePath> apply_keep_flags_with_repair(const std::vector<KnowledgePath>& paths,
                                                        std::vector<char> kept,
                                                        bool at_least_one_per_concept) {
  if (at_least_one_per_concept) {
    std::set<std::string> labels;
    for (const auto& p : paths) {
      labels.insert(p.endpoint_a());
      labels.insert(p.endpoint_b());
    }
    for (const auto& label : labels) {
      bool covered = false;
      for (std::size_t i = 0; i < paths.size(); ++i)
        if (kept[i] && paths[i].touches(label)) {
          covered = true;
          break;
        }
      if (covered) continue;
      std::size_t best = SIZE_MAX;
      for (std::size_t i = 0; i < paths.size(); ++i) {
        if (!paths[i].touches(label)) continue;
        if (best == SIZE_MAX) {
          best = i;
          continue;
        }
        const KnowledgePath& a = paths[i];
        const KnowledgePath& b = paths[best];
        if (a.strength() != b.strength()) {
          if (a.strength() > b.strength()) best = i;
        } else if (a.hop_count() != b.hop_count()) {
          if (a.hop_count() < b.hop_count()) best = i;
        } else if (a.dedup_key() < b.dedup_key()) {
          best = i;
        }
      }
      if (best != SIZE_MAX) kept[best] = 1;
    }
  }
  std::vector<KnowledgePath> out;
  for (std::size_t i = 0; i < paths.size(); ++i)
    if (kept[i]) out.push_back(paths[i]);
  return out;
}

double max_hop_prior(const KnowledgePath& p, const std::map<std::string, double>& priors) {
  double best = 0.0;
  for (const auto& rel : p.relations) {
    auto it = priors.find(rel);
    if (it != priors.end()) best = std::max(best, it->second);
  }
  return best;
}

}  // namespace

double KnowledgePath::strength() const {
  double w = weights.empty() ? 0.0 : weights[0];
  for (double x : weights) w = std::min(w, x);
  return w;
}

std::string KnowledgePath::dedup_key() const {
  const std::string& a = endpoint_a();
  const std::string& b = endpoint_b();
  std::string key = std::min(a, b);
  key += '\x1e';
  key += std::max(a, b);
  key += '\x1e';
  key += static_cast<char>('0' + hop_count());
  key += '\x1e';
  std::string fwd = sequence_string(concepts, relations, false);
  std::string rev = sequence_string(concepts, relations, true);
  key += std::min(fwd, rev);
  return key;
}

std::vector<KnowledgePath> extract_multihop(const KnowledgeGraph& graph, const ConceptSet& cs,
                                            std::size_t k_fallback) {
  std::set<std::string> label_set;
  for (const auto& c : cs.items) label_set.insert(c.label);

  std::map<std::string, KnowledgePath> found;
  auto emit = [&](KnowledgePath p) { found.emplace(p.dedup_key(), std::move(p)); };

  // 1-hop and 2-hop, generated once per unordered pair from the
  // lexicographically smaller endpoint.
  for (const auto& item : cs.items) {
    const std::string& start = item.label;
    graph.for_each_incident(start, [&](const Edge& e1, bool head1) {
      const Concept& mid = other_endpoint(e1, head1);
      if (mid.label == start) return;  // self-loop
      if (label_set.count(mid.label) && start < mid.label) {
        emit(KnowledgePath{{matched_endpoint(e1, head1), mid}, {e1.relation}, {e1.weight}});
      }
      graph.for_each_incident(mid.label, [&](const Edge& e2, bool head2) {
        const Concept& end = other_endpoint(e2, head2);
        if (end.label == mid.label || end.label == start) return;
        if (!label_set.count(end.label) || start >= end.label) return;
        emit(KnowledgePath{{matched_endpoint(e1, head1), mid, end},
                           {e1.relation, e2.relation},
                           {e1.weight, e2.weight}});
      });
    });
  }

  // 3-hop fallback for labels with no 1/2-hop connection, walking out of the
  // concept's strongest neighbors only.
  std::set<std::string> connected;
  for (const auto& [key, p] : found) {
    connected.insert(p.endpoint_a());
    connected.insert(p.endpoint_b());
  }
  for (const auto& item : cs.items) {
    const std::string& start = item.label;
    if (connected.count(start)) continue;
    for (const Concept& root : graph.top_k_neighbors(start, k_fallback)) {
      graph.for_each_incident(start, [&](const Edge& e1, bool head1) {
        const Concept& n1 = other_endpoint(e1, head1);
        if (n1.label != root.label) return;
        graph.for_each_incident(n1.label, [&](const Edge& e2, bool head2) {
          const Concept& n2 = other_endpoint(e2, head2);
          if (n2.label == n1.label || n2.label == start) return;
          graph.for_each_incident(n2.label, [&](const Edge& e3, bool head3) {
            const Concept& end = other_endpoint(e3, head3);
            if (!label_set.count(end.label)) return;
            if (end.label == start || end.label == n1.label || end.label == n2.label) return;
            emit(KnowledgePath{{matched_endpoint(e1, head1), n1, n2, end},
                               {e1.relation, e2.relation, e3.relation},
                               {e1.weight, e2.weight, e3.weight}});
          });
        });
      });
    }
  }

  std::vector<KnowledgePath> out;
  out.reserve(found.size());
  for (auto& [key, p] : found) out.push_back(std::move(p));
  return out;
}

std::vector<KnowledgePath> filter_relations(const std::vector<KnowledgePath>& paths,
                                            const SelectionConfig& config, const ConceptSet& cs) {
  std::map<std::string, Pos> wanted;
  for (const auto& c : cs.items) wanted[c.label] = c.pos;

  auto endpoint_contradicts = [&](const Concept& occ) {
    if (occ.pos == Pos::None) return false;
    auto it = wanted.find(occ.label);
    if (it == wanted.end() || it->second == Pos::None) return false;
    return occ.pos != it->second;
  };

  std::vector<KnowledgePath> out;
  for (const auto& p : paths) {
    bool excluded = std::any_of(p.relations.begin(), p.relations.end(), [&](const auto& r) {
      return config.excluded_relation_types.count(r) > 0;
    });
    if (excluded) continue;
    if (config.pos_constrained &&
        (endpoint_contradicts(p.concepts.front()) || endpoint_contradicts(p.concepts.back())))
      continue;
    out.push_back(p);
  }
  return out;
}

std::vector<KnowledgePath> random_subset(const std::vector<KnowledgePath>& paths,
                                         const SelectionConfig& config) {
  if (config.random_p < 0.0 || config.random_p > 1.0)
    throw std::invalid_argument("random_subset: random_p must lie in [0,1]");
  Rng rng(config.seed);
  std::vector<char> kept(paths.size(), 0);
  for (std::size_t i = 0; i < paths.size(); ++i)
    kept[i] = rng.next_uniform() < config.random_p ? 1 : 0;
  return apply_keep_flags_with_repair(paths, std::move(kept), config.at_least_one_per_concept);
}

std::map<std::string, double> compute_priors(const std::vector<KnowledgePath>& corpus_paths) {
  std::map<std::string, double> counts;
  std::size_t total = 0;
  for (const auto& p : corpus_paths)
    for (const auto& rel : p.relations) {
      counts[rel] += 1.0;
      ++total;
    }
  if (total == 0) throw std::invalid_argument("compute_priors: empty corpus");
  for (auto& [rel, c] : counts) c /= static_cast<double>(total);
  return counts;
}

std::vector<KnowledgePath> prior_subset(const std::vector<KnowledgePath>& paths,
                                        const std::map<std::string, double>& priors,
                                        const SelectionConfig& config) {
  Rng rng(config.seed);
  std::vector<char> kept(paths.size(), 0);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const double score = max_hop_prior(paths[i], priors) + rng.next_uniform();
    kept[i] = score > config.prior_threshold ? 1 : 0;
  }
  return apply_keep_flags_with_repair(paths, std::move(kept), config.at_least_one_per_concept);
}

std::vector<KnowledgePath> length_frequency_rank(const std::vector<KnowledgePath>& paths,
                                                 const std::map<std::string, double>& priors) {
  std::vector<KnowledgePath> out = paths;
  std::stable_sort(out.begin(), out.end(), [&](const KnowledgePath& a, const KnowledgePath& b) {
    if (a.hop_count() != b.hop_count()) return a.hop_count() < b.hop_count();
    const double pa = max_hop_prior(a, priors);
    const double pb = max_hop_prior(b, priors);
    if (pa != pb) return pa > pb;
    return a.dedup_key() < b.dedup_key();
  });
  return out;
}

std::vector<Concept> expand_query(const KnowledgeGraph& graph, const ConceptSet& cs,
                                  std::size_t max_expansions) {
  std::set<std::string> label_set;
  for (const auto& c : cs.items) label_set.insert(c.label);

  // neighbor label -> set of concept-set labels it touches
  std::map<std::string, std::set<std::string>> touched;
  for (const auto& item : cs.items) {
    graph.for_each_incident(item.label, [&](const Edge& e, bool head) {
      const Concept& other = other_endpoint(e, head);
      if (other.label == item.label || label_set.count(other.label)) return;
      touched[other.label].insert(item.label);
    });
  }

  const double half = static_cast<double>(cs.items.size()) / 2.0;
  std::vector<std::pair<std::size_t, std::string>> ranked;
  for (const auto& [label, owners] : touched)
    if (static_cast<double>(owners.size()) > half) ranked.emplace_back(owners.size(), label);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  if (ranked.size() > max_expansions) ranked.resize(max_expansions);

  std::vector<Concept> out;
  out.reserve(ranked.size());
  for (auto& [count, label] : ranked) out.push_back(Concept{label, Pos::None});
  return out;
}

ExtractionStats extraction_stats(const std::vector<std::vector<KnowledgePath>>& per_sample_paths,
                                 const std::vector<ConceptSet>& concept_sets) {
  ExtractionStats stats;
  if (per_sample_paths.empty()) return stats;
  std::size_t total_paths = 0;
  std::size_t occurrences = 0;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < per_sample_paths.size(); ++i) {
    total_paths += per_sample_paths[i].size();
    if (i >= concept_sets.size()) continue;
    for (const auto& c : concept_sets[i].items) {
      ++occurrences;
      for (const auto& p : per_sample_paths[i])
        if (p.touches(c.label)) {
          ++covered;
          break;
        }
    }
  }
  stats.avg_relations =
      static_cast<double>(total_paths) / static_cast<double>(per_sample_paths.size());
  stats.concept_coverage =
      occurrences == 0 ? 1.0 : static_cast<double>(covered) / static_cast<double>(occurrences);
  return stats;
}

}  // namespace ckgen
