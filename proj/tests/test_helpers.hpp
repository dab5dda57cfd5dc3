#pragma once

// Shared fixtures and independent oracles for the test binaries. Everything
// here works from first principles (linear scans, exhaustive enumeration) so
// it stays independent of the library's indexed/search implementations.

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "ckgen/concept.hpp"
#include "ckgen/extract.hpp"
#include "ckgen/kg.hpp"
#include "ckgen/rng.hpp"

namespace ckgen::test {

inline ConceptSet make_cs_tagged(const std::vector<std::pair<std::string, Pos>>& items) {
  ConceptSet cs;
  for (const auto& [label, pos] : items) cs.items.push_back(Concept{label, pos});
  return cs;
}

inline ConceptSet make_cs(const std::vector<std::string>& labels) {
  ConceptSet cs;
  for (const auto& label : labels) cs.items.push_back(Concept{label, Pos::None});
  return cs;
}

inline std::string concept_str(const Concept& c) {
  std::string s = c.label;
  if (c.pos != Pos::None) {
    s += '/';
    s += pos_letter(c.pos);
  }
  return s;
}

inline std::string path_str(const std::vector<Concept>& concepts,
                            const std::vector<std::string>& relations) {
  std::string s;
  for (std::size_t i = 0; i < concepts.size(); ++i) {
    if (i > 0) s += ' ';
    s += concept_str(concepts[i]);
    if (i < relations.size()) {
      s += ' ';
      s += relations[i];
    }
  }
  return s;
}

inline std::string path_str(const KnowledgePath& p) { return path_str(p.concepts, p.relations); }

// Exhaustive enumeration of 1- and 2-hop paths between distinct concept-set
// labels over the raw edge list, oriented from the lexicographically smaller
// endpoint, deduplicated on the concept/relation sequence.
inline std::vector<std::string> brute_force_paths_1_2(const KnowledgeGraph& g,
                                                      const ConceptSet& cs) {
  std::set<std::string> label_set;
  for (const auto& c : cs.items) label_set.insert(c.label);
  std::set<std::string> found;
  const auto& edges = g.edges();

  auto linking = [&](const Edge& e, const std::string& x) -> const Concept* {
    if (e.head.label == x) return &e.head;
    if (e.tail.label == x) return &e.tail;
    return nullptr;
  };
  auto other_of = [&](const Edge& e, const std::string& x) -> const Concept& {
    return e.head.label == x ? e.tail : e.head;
  };

  for (const auto& x : label_set)
    for (const auto& y : label_set) {
      if (x >= y) continue;
      for (const auto& e1 : edges) {
        const Concept* xo = linking(e1, x);
        if (xo == nullptr) continue;
        const Concept& mid = other_of(e1, x);
        if (mid.label == x) continue;  // self-loop
        if (mid.label == y)
          found.insert(path_str({*xo, mid}, {e1.relation}));
        for (const auto& e2 : edges) {
          if (mid.label == x || mid.label == y) continue;
          const Concept* mo = linking(e2, mid.label);
          if (mo == nullptr) continue;
          const Concept& end = other_of(e2, mid.label);
          if (end.label != y) continue;
          found.insert(path_str({*xo, mid, end}, {e1.relation, e2.relation}));
        }
      }
    }
  return {found.begin(), found.end()};
}

inline std::vector<std::string> extracted_paths_1_2(const std::vector<KnowledgePath>& paths) {
  std::set<std::string> out;
  for (const auto& p : paths)
    if (p.hop_count() <= 2) out.insert(path_str(p));
  return {out.begin(), out.end()};
}

// Random graph over n0..n{nodes-1} with occasional POS tags and parallel
// relations; used by the index-soundness and extraction-oracle properties.
inline KnowledgeGraph random_graph(Rng& rng, std::size_t max_nodes, std::size_t max_edges) {
  static const char* kRels[] = {"RelatedTo", "AtLocation", "UsedFor", "IsA", "PartOf"};
  const std::size_t nodes = 2 + rng.next_below(max_nodes - 1);
  const std::size_t edges = 1 + rng.next_below(max_edges);
  std::vector<Edge> list;
  for (std::size_t i = 0; i < edges; ++i) {
    Edge e;
    e.head.label = "n" + std::to_string(rng.next_below(nodes));
    e.tail.label = "n" + std::to_string(rng.next_below(nodes));
    if (rng.next_below(4) == 0) e.head.pos = static_cast<Pos>(1 + rng.next_below(4));
    if (rng.next_below(4) == 0) e.tail.pos = static_cast<Pos>(1 + rng.next_below(4));
    e.relation = kRels[rng.next_below(5)];
    e.weight = 0.25 * static_cast<double>(1 + rng.next_below(16));
    list.push_back(std::move(e));
  }
  return KnowledgeGraph::from_edges(std::move(list));
}

inline std::vector<std::string> random_label_subset(Rng& rng, const KnowledgeGraph& g,
                                                    std::size_t count) {
  std::set<std::string> labels;
  for (const auto& e : g.edges()) {
    labels.insert(e.head.label);
    labels.insert(e.tail.label);
  }
  std::vector<std::string> all(labels.begin(), labels.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count && !all.empty(); ++i) {
    const std::size_t k = rng.next_below(all.size());
    out.push_back(all[k]);
    all.erase(all.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

}  // namespace ckgen::test
