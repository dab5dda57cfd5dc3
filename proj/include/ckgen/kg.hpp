#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ckgen/concept.hpp"

namespace ckgen {

struct Edge {
  Concept head;
  std::string relation;   // stored orientation: head -> tail
  Concept tail;
  double weight = 1.0;

  bool operator==(const Edge& o) const {
    return head == o.head && tail == o.tail && relation == o.relation && weight == o.weight;
  }
};

enum class Direction { Out, In, Both };

enum class DumpFormat { Auto, ConceptNet, FixtureTsv };

// Parses "/c/en/ice_cream/n" into (language, Concept). Extra URI components
// after the POS (word senses) are ignored.
std::optional<std::pair<std::string, Concept>> parse_concept_uri(const std::string& uri);

// Inverse of parse_concept_uri for well-formed inputs.
std::string format_concept_uri(const std::string& language, const Concept& c);

// Indexed, immutable store of directed weighted edges. Queries are const and
// safe to call concurrently once construction is done.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  // Deduplicates on (head, relation, tail) keeping the maximum weight; the
  // surviving edge order follows first occurrence.
  static KnowledgeGraph from_edges(std::vector<Edge> edges);

  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }
  std::size_t node_count() const;

  // Every edge incident to `label` in the requested direction. When
  // pos_filter is set, the endpoint that matched `label` must carry exactly
  // that tag. Ordered by descending weight, then relation, then neighbor
  // label (further fields break residual ties deterministically).
  std::vector<Edge> neighbors(const std::string& label,
                              std::optional<Pos> pos_filter = std::nullopt,
                              Direction direction = Direction::Both) const;

  // The k distinct neighbor labels with the highest maximum incident-edge
  // weight; ties broken by label order. Self-loops do not make a node its
  // own neighbor.
  std::vector<Concept> top_k_neighbors(const std::string& label, std::size_t k) const;

  bool has_node(const std::string& label) const;

  // Allocation-free incident-edge iteration for traversal loops; fn is
  // invoked as fn(const Edge&, bool matched_is_head). A self-loop is visited
  // from both indices.
  template <typename Fn>
  void for_each_incident(const std::string& label, Fn&& fn) const {
    if (auto it = out_index_.find(label); it != out_index_.end())
      for (std::uint32_t i : it->second) fn(edges_[i], true);
    if (auto it = in_index_.find(label); it != in_index_.end())
      for (std::uint32_t i : it->second) fn(edges_[i], false);
  }

  // Canonical fixture-format serialization (sorted), preceded by the given
  // '#' comment lines.
  void write_fixture_tsv(std::ostream& out,
                         const std::vector<std::string>& header_comments = {}) const;

 private:
  std::vector<Edge> edges_;
  std::unordered_map<std::string, std::vector<std::uint32_t>> out_index_;
  std::unordered_map<std::string, std::vector<std::uint32_t>> in_index_;
};

struct LoadResult {
  KnowledgeGraph graph;
  std::size_t skipped_rows = 0;    // malformed rows
  std::size_t filtered_rows = 0;   // well-formed rows dropped by the language filter
};

// Reads a ConceptNet assertions dump (tab-separated, plain or gzip) or the
// six-column fixture format `head<TAB>pos<TAB>relation<TAB>tail<TAB>pos<TAB>weight`.
// Lines starting with '#' and blank lines are ignored. Malformed rows are
// skipped and counted. Throws std::runtime_error if the file cannot be read.
LoadResult load_dump(const std::string& path, const std::string& language = "en",
                     DumpFormat format = DumpFormat::Auto);

// Same parser over in-memory text; used by loaders and tests.
LoadResult load_dump_text(const std::string& text, const std::string& language = "en",
                          DumpFormat format = DumpFormat::Auto);

}  // namespace ckgen
