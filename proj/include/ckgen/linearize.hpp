#pragma once

#include <string>
#include <vector>

#include "ckgen/extract.hpp"

namespace ckgen {

enum class MaskRole { GivenConceptEvidence, ExpansionConcept };

struct EvidenceSentence {
  std::string text;           // lowercase, single-space separated
  KnowledgePath source_path;
  MaskRole mask_role = MaskRole::GivenConceptEvidence;
};

// "RelatedTo" -> "related to", "IsA" -> "is a".
std::string humanize_relation(const std::string& relation);

// [ice_cream, IsA, dessert] -> "ice cream is a dessert".
EvidenceSentence linearize_path(const KnowledgePath& path);

std::vector<EvidenceSentence> linearize_paths(const std::vector<KnowledgePath>& paths);

}  // namespace ckgen
