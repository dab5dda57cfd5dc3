#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ckgen/decode.hpp"
#include "ckgen/extract.hpp"
#include "ckgen/model.hpp"

namespace ckgen {

// Thin deterministic wrappers behind the CLI subcommands. Each writes its
// fully-resolved configuration next to its outputs and stamps every output
// file with the config hash; a rerun against existing outputs with a
// different hash fails unless forced.

struct IngestArgs {
  std::string dump;
  std::string out_dir = "out";
  std::string language = "en";
  bool force = false;
};

struct ExtractArgs {
  std::string graph;
  std::string dataset;
  std::string out_dir = "out";
  std::string selection = "none";  // none | random | prior
  double random_p = 0.5;
  double prior_threshold = 0.9;
  bool pos_constrained = false;
  bool keep_excluded_relations = false;  // disables the default exclusion list
  std::size_t k_fallback = 5;
  std::uint64_t seed = 42;
  std::size_t jobs = 1;
  bool force = false;
};

struct ExpandArgs {
  std::string graph;
  std::string dataset;
  std::string out_dir = "out";
  std::int64_t expansion_max = -1;  // negative = unlimited
  std::size_t jobs = 1;
  bool force = false;
};

struct TrainArgs {
  std::string dataset;
  std::string paths;       // optional extraction output
  std::string expansions;  // optional expansion output
  std::string out_dir = "out";
  std::string mode = "inject";
  std::size_t d_model = 32;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t cs_hidden = 16;
  std::size_t epochs = 30;
  double learning_rate = 2e-3;
  double mask_lm_prob = 0.3;
  std::uint64_t seed = 42;
  bool force = false;
};

struct GenerateArgs {
  std::string checkpoint;
  std::string dataset;
  std::string paths;
  std::string expansions;
  std::string lexicon = "data/pos_lexicon.tsv";
  std::string out_dir = "out";
  std::string mode = "inject";
  std::size_t beam_width = 4;
  std::size_t best_n = 4;
  std::size_t max_len = 16;
  std::size_t jobs = 1;
  bool force = false;
};

struct EvalArgs {
  std::string generations;
  std::string dataset;
  std::string lexicon = "data/pos_lexicon.tsv";
  std::string out_dir = "out";
  std::string run_label = "run";
  bool force = false;
};

struct SynthArgs {
  std::string out_dir = "out";
  std::uint64_t seed = 42;
  std::size_t train_per_scene = 8;
  std::size_t dev_per_scene = 2;
  bool force = false;
};

int cmd_ingest(const IngestArgs& args);
int cmd_extract(const ExtractArgs& args);
int cmd_expand(const ExpandArgs& args);
int cmd_train(const TrainArgs& args);
int cmd_generate(const GenerateArgs& args);
int cmd_eval(const EvalArgs& args);
int cmd_synth(const SynthArgs& args);

// FNV-1a over the canonical config serialization.
std::string config_hash(const std::string& canonical_json);

// "ice_cream" -> {"ice", "cream"}.
std::vector<std::string> tokenize_label(const std::string& label);

// Dataset sample -> model input. Multi-word labels split into word tokens.
EncodedSample encode_sample(const std::string& id, const ConceptSet& concepts,
                            const std::vector<std::string>& references,
                            const std::vector<KnowledgePath>& paths,
                            const std::vector<Concept>& expansions, const Vocab& vocab);

// Extraction/expansion output files, keyed by sample id.
std::unordered_map<std::string, std::vector<KnowledgePath>> load_paths_jsonl(
    const std::string& path);
std::unordered_map<std::string, std::vector<Concept>> load_expansions_jsonl(
    const std::string& path);

}  // namespace ckgen
