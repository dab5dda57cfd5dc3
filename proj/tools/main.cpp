#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ckgen/commands.hpp"

namespace {

using nlohmann::json;

// --config <file> provides defaults; explicit flags win. The file is a flat
// JSON object keyed by long flag names without the leading dashes.
json load_config_defaults(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      std::ifstream in(argv[i + 1]);
      if (!in) throw std::runtime_error(std::string("cannot open config file: ") + argv[i + 1]);
      return json::parse(in);
    }
  }
  return json::object();
}

template <typename T>
void preset(const json& cfg, const char* key, T& target) {
  if (cfg.contains(key)) target = cfg.at(key).get<T>();
}

}  // namespace

int main(int argc, char** argv) {
  try {
    const json cfg = load_config_defaults(argc, argv);
    CLI::App app{"knowledge-grounded constrained text generation pipeline"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file with flag defaults");

    ckgen::IngestArgs ingest;
    preset(cfg, "dump", ingest.dump);
    preset(cfg, "language", ingest.language);
    preset(cfg, "out", ingest.out_dir);
    auto* c_ingest = app.add_subcommand("ingest", "parse an assertions dump into a graph index");
    c_ingest->add_option("--dump", ingest.dump, "assertions dump (tsv, optionally .gz)")
        ->required(!cfg.contains("dump"));
    c_ingest->add_option("--language", ingest.language, "language filter");
    c_ingest->add_option("--out", ingest.out_dir, "output directory");
    c_ingest->add_flag("--force", ingest.force, "overwrite mismatching outputs");

    ckgen::ExtractArgs extract;
    preset(cfg, "graph", extract.graph);
    preset(cfg, "dataset", extract.dataset);
    preset(cfg, "out", extract.out_dir);
    preset(cfg, "selection", extract.selection);
    preset(cfg, "random-p", extract.random_p);
    preset(cfg, "prior-threshold", extract.prior_threshold);
    preset(cfg, "seed", extract.seed);
    preset(cfg, "jobs", extract.jobs);
    auto* c_extract = app.add_subcommand("extract", "extract multi-hop knowledge paths");
    c_extract->add_option("--graph", extract.graph, "graph file (ingest output or fixture tsv)")
        ->required(!cfg.contains("graph"));
    c_extract->add_option("--dataset", extract.dataset, "concept-set dataset")
        ->required(!cfg.contains("dataset"));
    c_extract->add_option("--selection", extract.selection, "none|random|prior");
    c_extract->add_option("--random-p", extract.random_p, "keep probability for random subset");
    c_extract->add_option("--prior-threshold", extract.prior_threshold,
                          "threshold for prior subset selection");
    c_extract->add_flag("--pos-constrained", extract.pos_constrained,
                        "drop paths contradicting concept POS tags");
    c_extract->add_flag("--keep-excluded-relations", extract.keep_excluded_relations,
                        "keep FormOf/DerivedFrom/Antonym/DistinctFrom paths");
    c_extract->add_option("--k-fallback", extract.k_fallback, "3-hop root fan-out");
    c_extract->add_option("--seed", extract.seed, "selection seed");
    c_extract->add_option("--jobs", extract.jobs, "parallel workers");
    c_extract->add_option("--out", extract.out_dir, "output directory");
    c_extract->add_flag("--force", extract.force, "overwrite mismatching outputs");

    ckgen::ExpandArgs expand;
    preset(cfg, "graph", expand.graph);
    preset(cfg, "dataset", expand.dataset);
    preset(cfg, "out", expand.out_dir);
    preset(cfg, "expansion-max", expand.expansion_max);
    preset(cfg, "jobs", expand.jobs);
    auto* c_expand = app.add_subcommand("expand", "query expansion over shared neighbors");
    c_expand->add_option("--graph", expand.graph, "graph file")->required(!cfg.contains("graph"));
    c_expand->add_option("--dataset", expand.dataset, "concept-set dataset")
        ->required(!cfg.contains("dataset"));
    c_expand->add_option("--expansion-max", expand.expansion_max,
                         "max expansion concepts (negative = unlimited)");
    c_expand->add_option("--jobs", expand.jobs, "parallel workers");
    c_expand->add_option("--out", expand.out_dir, "output directory");
    c_expand->add_flag("--force", expand.force, "overwrite mismatching outputs");

    ckgen::TrainArgs train;
    preset(cfg, "dataset", train.dataset);
    preset(cfg, "paths", train.paths);
    preset(cfg, "expansions", train.expansions);
    preset(cfg, "out", train.out_dir);
    preset(cfg, "mode", train.mode);
    preset(cfg, "seed", train.seed);
    preset(cfg, "epochs", train.epochs);
    auto* c_train = app.add_subcommand("train", "train the toy seq2seq model");
    c_train->add_option("--dataset", train.dataset, "training dataset")
        ->required(!cfg.contains("dataset"));
    c_train->add_option("--paths", train.paths, "extraction output for evidence");
    c_train->add_option("--expansions", train.expansions, "expansion output");
    c_train->add_option("--mode", train.mode, "baseline|concat|inject");
    c_train->add_option("--d-model", train.d_model, "model width");
    c_train->add_option("--n-layers", train.n_layers, "encoder layers");
    c_train->add_option("--n-heads", train.n_heads, "attention heads");
    c_train->add_option("--cs-hidden", train.cs_hidden, "bi-LSTM hidden size");
    c_train->add_option("--epochs", train.epochs, "training epochs");
    c_train->add_option("--learning-rate", train.learning_rate, "Adam learning rate");
    c_train->add_option("--mask-lm-prob", train.mask_lm_prob, "target masking probability");
    c_train->add_option("--seed", train.seed, "global seed");
    c_train->add_option("--out", train.out_dir, "output directory");
    c_train->add_flag("--force", train.force, "overwrite mismatching outputs");

    ckgen::GenerateArgs gen;
    preset(cfg, "checkpoint", gen.checkpoint);
    preset(cfg, "dataset", gen.dataset);
    preset(cfg, "paths", gen.paths);
    preset(cfg, "expansions", gen.expansions);
    preset(cfg, "lexicon", gen.lexicon);
    preset(cfg, "out", gen.out_dir);
    preset(cfg, "mode", gen.mode);
    preset(cfg, "beam-width", gen.beam_width);
    preset(cfg, "best-n", gen.best_n);
    preset(cfg, "jobs", gen.jobs);
    auto* c_gen = app.add_subcommand("generate", "beam-search generation with Best-N scoring");
    c_gen->add_option("--checkpoint", gen.checkpoint, "trained checkpoint")
        ->required(!cfg.contains("checkpoint"));
    c_gen->add_option("--dataset", gen.dataset, "dataset to decode")
        ->required(!cfg.contains("dataset"));
    c_gen->add_option("--paths", gen.paths, "extraction output for evidence");
    c_gen->add_option("--expansions", gen.expansions, "expansion output");
    c_gen->add_option("--lexicon", gen.lexicon, "POS lexicon file");
    c_gen->add_option("--mode", gen.mode, "baseline|concat|inject");
    c_gen->add_option("--beam-width", gen.beam_width, "beam width");
    c_gen->add_option("--best-n", gen.best_n, "beams rescored by coverage");
    c_gen->add_option("--max-len", gen.max_len, "max generated tokens");
    c_gen->add_option("--jobs", gen.jobs, "parallel workers");
    c_gen->add_option("--out", gen.out_dir, "output directory");
    c_gen->add_flag("--force", gen.force, "overwrite mismatching outputs");

    ckgen::EvalArgs eval;
    preset(cfg, "generations", eval.generations);
    preset(cfg, "dataset", eval.dataset);
    preset(cfg, "lexicon", eval.lexicon);
    preset(cfg, "out", eval.out_dir);
    preset(cfg, "run-label", eval.run_label);
    auto* c_eval = app.add_subcommand("eval", "score generations against references");
    c_eval->add_option("--generations", eval.generations, "generation output file")
        ->required(!cfg.contains("generations"));
    c_eval->add_option("--dataset", eval.dataset, "dataset with references")
        ->required(!cfg.contains("dataset"));
    c_eval->add_option("--lexicon", eval.lexicon, "POS lexicon file");
    c_eval->add_option("--run-label", eval.run_label, "label for the report table");
    c_eval->add_option("--out", eval.out_dir, "output directory");
    c_eval->add_flag("--force", eval.force, "overwrite mismatching outputs");

    ckgen::SynthArgs synth;
    preset(cfg, "out", synth.out_dir);
    preset(cfg, "seed", synth.seed);
    auto* c_synth = app.add_subcommand("synth", "emit the synthetic corpus and fixture graph");
    c_synth->add_option("--seed", synth.seed, "corpus seed");
    c_synth->add_option("--train-per-scene", synth.train_per_scene, "train samples per scene");
    c_synth->add_option("--dev-per-scene", synth.dev_per_scene, "dev samples per scene");
    c_synth->add_option("--out", synth.out_dir, "output directory");
    c_synth->add_flag("--force", synth.force, "overwrite mismatching outputs");

    // --config is also accepted in subcommand position; the value was already
    // consumed by the argv scan above
    for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
      sub->add_option("--config", config_path, "JSON config file with flag defaults");

    CLI11_PARSE(app, argc, argv);

    if (c_ingest->parsed()) return ckgen::cmd_ingest(ingest);
    if (c_extract->parsed()) return ckgen::cmd_extract(extract);
    if (c_expand->parsed()) return ckgen::cmd_expand(expand);
    if (c_train->parsed()) return ckgen::cmd_train(train);
    if (c_gen->parsed()) return ckgen::cmd_generate(gen);
    if (c_eval->parsed()) return ckgen::cmd_eval(eval);
    if (c_synth->parsed()) return ckgen::cmd_synth(synth);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << std::endl;
    return 1;
  }
}
