#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ckgen/concept.hpp"
#include "ckgen/kg.hpp"

namespace ckgen {

struct DatasetSample {
  std::string id;
  ConceptSet concepts;
  std::vector<std::string> references;
};

// "drill_N#field_N#run_V#team_N" -> ConceptSet. Throws on malformed fields;
// datasets are curated inputs, unlike assertion dumps.
ConceptSet parse_concept_line(const std::string& field);
std::string format_concept_line(const ConceptSet& cs);

// Two formats, sniffed per file: JSON-lines
//   {"id": ..., "concepts": [{"label":..., "pos":...}], "references": [...]}
// or the line format `concept_POS#...<TAB>reference<TAB>reference...`.
// Lines starting with '#' and ckgen_header objects are skipped.
std::vector<DatasetSample> parse_dataset_text(const std::string& text);
std::vector<DatasetSample> load_dataset(const std::string& path);

void write_dataset_jsonl(std::ostream& out, const std::vector<DatasetSample>& samples);

// ------------------------------------------------------------------
// Deterministic synthetic corpus: templated scenes over a closed
// vocabulary, used for end-to-end training and decoding tests.

struct Scene {
  ConceptSet concepts;
  std::vector<std::string> templates;
};

const std::vector<Scene>& synthetic_scenes();

// Scene-pair edges plus the worked examples (the broccoli/cheese pizza
// paths and the drill/field/run/team expansion neighborhood).
std::vector<Edge> synthetic_graph_edges();
KnowledgeGraph synthetic_graph();

struct SyntheticCorpus {
  std::vector<DatasetSample> train;
  std::vector<DatasetSample> dev;  // concept order permuted per sample
};

SyntheticCorpus make_synthetic_corpus(std::uint64_t seed, std::size_t train_per_scene = 8,
                                      std::size_t dev_per_scene = 2);

}  // namespace ckgen
