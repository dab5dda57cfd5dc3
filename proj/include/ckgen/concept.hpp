#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ckgen {

// Part-of-speech tags carried by ConceptNet term URIs and CommonGen inputs.
enum class Pos : std::uint8_t { None, N, V, A, R };

inline char pos_letter(Pos p) {
  switch (p) {
    case Pos::N: return 'N';
    case Pos::V: return 'V';
    case Pos::A: return 'A';
    case Pos::R: return 'R';
    default: return '-';
  }
}

// Accepts both the dataset convention (N/V/A/R) and the ConceptNet URI
// convention (n/v/a/r); anything else maps to None.
inline Pos pos_from_letter(char c) {
  switch (c) {
    case 'N': case 'n': return Pos::N;
    case 'V': case 'v': return Pos::V;
    case 'A': case 'a': return Pos::A;
    case 'R': case 'r': return Pos::R;
    default: return Pos::None;
  }
}

struct Concept {
  std::string label;       // lowercase, multi-word joined by '_'
  Pos pos = Pos::None;

  bool operator==(const Concept& o) const { return label == o.label && pos == o.pos; }
  bool operator<(const Concept& o) const {
    if (label != o.label) return label < o.label;
    return static_cast<int>(pos) < static_cast<int>(o.pos);
  }
};

// One generation constraint: an ordered list of POS-tagged concepts.
struct ConceptSet {
  std::vector<Concept> items;
  std::string source_id;

  bool contains_label(const std::string& label) const {
    for (const auto& c : items)
      if (c.label == label) return true;
    return false;
  }
};

}  // namespace ckgen
