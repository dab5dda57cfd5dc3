#include "ckgen/commands.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "ckgen/dataset.hpp"
#include "ckgen/kg.hpp"
#include "ckgen/linearize.hpp"
#include "ckgen/lemma.hpp"
#include "ckgen/metrics.hpp"
#include "ckgen/tagger.hpp"

namespace ckgen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string read_first_line(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line;
}

// Refuses to clobber an output produced under a different configuration.
void check_existing_output(const std::string& path, const std::string& hash, bool force) {
  if (force || !fs::exists(path)) return;
  const std::string line = read_first_line(path);
  std::string existing;
  if (!line.empty() && line[0] == '{') {
    try {
      json j = json::parse(line);
      if (j.contains("ckgen_header"))
        existing = j["ckgen_header"].value("config_hash", "");
      else
        existing = j.value("config_hash", "");
    } catch (const json::parse_error&) {
    }
  } else if (const auto pos = line.find("config_hash="); pos != std::string::npos) {
    existing = line.substr(pos + 12);
  }
  if (existing == hash) return;
  throw std::runtime_error(path + " exists with a different config hash (" +
                           (existing.empty() ? "none" : existing) +
                           "); rerun with --force or a fresh --out directory");
}

std::string write_resolved_config(const std::string& out_dir, const std::string& command,
                                  json config) {
  fs::create_directories(out_dir);
  config["command"] = command;
  config["ckgen_version"] = 1;
  const std::string canonical = config.dump();
  const std::string hash = config_hash(canonical);
  config["config_hash"] = hash;
  std::ofstream out(fs::path(out_dir) / ("config." + command + ".json"));
  out << config.dump(2) << "\n";
  return hash;
}

std::string header_line(const std::string& kind, const std::string& hash,
                        json extra = json::object()) {
  extra["kind"] = kind;
  extra["config_hash"] = hash;
  return json{{"ckgen_header", std::move(extra)}}.dump();
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, jobs);
  if (jobs == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(jobs, n); ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

json path_to_json_obj(const KnowledgePath& p) {
  json concepts = json::array();
  for (const auto& c : p.concepts) {
    json cj = {{"label", c.label}};
    cj["pos"] = c.pos == Pos::None ? json() : json(std::string(1, pos_letter(c.pos)));
    concepts.push_back(std::move(cj));
  }
  return json{{"concepts", std::move(concepts)},
              {"relations", p.relations},
              {"weights", p.weights}};
}

KnowledgePath path_from_json_obj(const json& j) {
  KnowledgePath p;
  for (const auto& cj : j.at("concepts")) {
    Concept c;
    c.label = cj.at("label").get<std::string>();
    if (cj.contains("pos") && !cj.at("pos").is_null()) {
      const std::string s = cj.at("pos").get<std::string>();
      if (!s.empty()) c.pos = pos_from_letter(s[0]);
    }
    p.concepts.push_back(std::move(c));
  }
  p.relations = j.at("relations").get<std::vector<std::string>>();
  p.weights = j.at("weights").get<std::vector<double>>();
  if (p.concepts.size() != p.relations.size() + 1 || p.weights.size() != p.relations.size())
    throw std::runtime_error("malformed path row");
  return p;
}

SelectionConfig selection_from(const ExtractArgs& args, std::uint64_t sample_seed) {
  SelectionConfig config;
  if (args.keep_excluded_relations) config.excluded_relation_types.clear();
  config.pos_constrained = args.pos_constrained;
  config.random_p = args.random_p;
  config.prior_threshold = args.prior_threshold;
  config.seed = sample_seed;
  if (args.selection == "none")
    config.strategy = SelectionStrategy::None;
  else if (args.selection == "random")
    config.strategy = SelectionStrategy::RandomSubset;
  else if (args.selection == "prior")
    config.strategy = SelectionStrategy::PriorSubset;
  else
    throw std::invalid_argument("unknown selection strategy: " + args.selection);
  return config;
}

std::vector<std::string> concept_words(const ConceptSet& cs) {
  std::vector<std::string> words;
  for (const auto& c : cs.items)
    for (const auto& w : tokenize_label(c.label)) words.push_back(w);
  return words;
}

}  // namespace

std::string config_hash(const std::string& canonical_json) {
  std::ostringstream out;
  out << std::hex << fnv1a(canonical_json);
  return out.str();
}

std::vector<std::string> tokenize_label(const std::string& label) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : label) {
    if (ch == '_') {
      if (!cur.empty()) words.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

EncodedSample encode_sample(const std::string& id, const ConceptSet& concepts,
                            const std::vector<std::string>& references,
                            const std::vector<KnowledgePath>& paths,
                            const std::vector<Concept>& expansions, const Vocab& vocab) {
  EncodedSample s;
  s.id = id;
  for (const auto& c : concepts.items)
    for (const auto& w : tokenize_label(c.label)) s.concept_tokens.push_back(vocab.id(w));
  for (const auto& c : expansions)
    for (const auto& w : tokenize_label(c.label)) s.expansion_tokens.push_back(vocab.id(w));
  for (const auto& ev : linearize_paths(paths)) s.evidence.push_back(vocab.encode(ev.text));
  if (!references.empty()) s.target_tokens = vocab.encode(references.front());
  return s;
}

std::unordered_map<std::string, std::vector<KnowledgePath>> load_paths_jsonl(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open paths file: " + path);
  std::unordered_map<std::string, std::vector<KnowledgePath>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    json j = json::parse(line);
    if (j.contains("ckgen_header")) continue;
    std::vector<KnowledgePath> paths;
    for (const auto& pj : j.at("paths")) paths.push_back(path_from_json_obj(pj));
    out[j.at("id").get<std::string>()] = std::move(paths);
  }
  return out;
}

std::unordered_map<std::string, std::vector<Concept>> load_expansions_jsonl(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open expansions file: " + path);
  std::unordered_map<std::string, std::vector<Concept>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    json j = json::parse(line);
    if (j.contains("ckgen_header")) continue;
    std::vector<Concept> expansions;
    for (const auto& e : j.at("expansions"))
      expansions.push_back(Concept{e.get<std::string>(), Pos::None});
    out[j.at("id").get<std::string>()] = std::move(expansions);
  }
  return out;
}

int cmd_ingest(const IngestArgs& args) {
  const std::string hash = write_resolved_config(
      args.out_dir, "ingest",
      json{{"dump", args.dump}, {"language", args.language}, {"out", args.out_dir}});
  const LoadResult result = load_dump(args.dump, args.language);
  const std::string out_path = (fs::path(args.out_dir) / "graph.tsv").string();
  check_existing_output(out_path, hash, args.force);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  result.graph.write_fixture_tsv(
      out, {"config_hash=" + hash,
            "edges=" + std::to_string(result.graph.edge_count()) +
                " skipped=" + std::to_string(result.skipped_rows) +
                " filtered=" + std::to_string(result.filtered_rows)});
  std::cout << "ingest: " << result.graph.edge_count() << " edges, " << result.skipped_rows
            << " malformed rows skipped, " << result.filtered_rows
            << " rows dropped by language filter\n";
  return 0;
}

int cmd_extract(const ExtractArgs& args) {
  const std::string hash = write_resolved_config(
      args.out_dir, "extract",
      json{{"graph", args.graph},
           {"dataset", args.dataset},
           {"selection", args.selection},
           {"random_p", args.random_p},
           {"prior_threshold", args.prior_threshold},
           {"pos_constrained", args.pos_constrained},
           {"keep_excluded_relations", args.keep_excluded_relations},
           {"k_fallback", args.k_fallback},
           {"seed", args.seed},
           {"jobs", args.jobs}});
  const KnowledgeGraph graph = load_dump(args.graph, "en").graph;
  const auto samples = load_dataset(args.dataset);

  std::vector<std::vector<KnowledgePath>> filtered(samples.size());
  parallel_for(samples.size(), args.jobs, [&](std::size_t i) {
    const auto raw = extract_multihop(graph, samples[i].concepts, args.k_fallback);
    filtered[i] = filter_relations(raw, selection_from(args, args.seed), samples[i].concepts);
  });

  std::map<std::string, double> priors;
  if (args.selection == "prior") {
    std::vector<KnowledgePath> corpus;
    for (const auto& ps : filtered) corpus.insert(corpus.end(), ps.begin(), ps.end());
    priors = compute_priors(corpus);
  }

  std::vector<std::vector<KnowledgePath>> selected(samples.size());
  parallel_for(samples.size(), args.jobs, [&](std::size_t i) {
    SelectionConfig config = selection_from(args, args.seed ^ fnv1a(samples[i].id));
    switch (config.strategy) {
      case SelectionStrategy::RandomSubset:
        selected[i] = random_subset(filtered[i], config);
        break;
      case SelectionStrategy::PriorSubset:
        selected[i] = prior_subset(filtered[i], priors, config);
        break;
      default:
        selected[i] = filtered[i];
    }
  });

  std::vector<ConceptSet> concept_sets;
  for (const auto& s : samples) concept_sets.push_back(s.concepts);
  const ExtractionStats before = extraction_stats(filtered, concept_sets);
  const ExtractionStats after = extraction_stats(selected, concept_sets);

  const std::string out_path = (fs::path(args.out_dir) / "paths.jsonl").string();
  check_existing_output(out_path, hash, args.force);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << header_line("paths", hash,
                     json{{"avg_relations_before_selection", before.avg_relations},
                          {"avg_relations", after.avg_relations},
                          {"concept_coverage", after.concept_coverage}})
      << "\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    json row = {{"id", samples[i].id}, {"paths", json::array()}};
    for (const auto& p : selected[i]) row["paths"].push_back(path_to_json_obj(p));
    out << row.dump() << "\n";
  }
  std::cout << "extract: avg relations " << before.avg_relations << " -> " << after.avg_relations
            << " after selection, concept coverage " << after.concept_coverage << "\n";
  return 0;
}

int cmd_expand(const ExpandArgs& args) {
  const std::string hash = write_resolved_config(args.out_dir, "expand",
                                                 json{{"graph", args.graph},
                                                      {"dataset", args.dataset},
                                                      {"expansion_max", args.expansion_max},
                                                      {"jobs", args.jobs}});
  const KnowledgeGraph graph = load_dump(args.graph, "en").graph;
  const auto samples = load_dataset(args.dataset);
  const std::size_t cap = args.expansion_max < 0
                              ? SIZE_MAX
                              : static_cast<std::size_t>(args.expansion_max);

  std::vector<std::vector<Concept>> expansions(samples.size());
  parallel_for(samples.size(), args.jobs, [&](std::size_t i) {
    expansions[i] = expand_query(graph, samples[i].concepts, cap);
  });

  const std::string out_path = (fs::path(args.out_dir) / "expansions.jsonl").string();
  check_existing_output(out_path, hash, args.force);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << header_line("expansions", hash) << "\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    json labels = json::array();
    for (const auto& c : expansions[i]) labels.push_back(c.label);
    out << json{{"id", samples[i].id}, {"expansions", std::move(labels)}}.dump() << "\n";
  }
  return 0;
}

namespace {

struct AssembledDataset {
  std::vector<EncodedSample> encoded;
  Vocab vocab;
};

AssembledDataset assemble(const std::vector<DatasetSample>& samples,
                          const std::unordered_map<std::string, std::vector<KnowledgePath>>& paths,
                          const std::unordered_map<std::string, std::vector<Concept>>& expansions,
                          const Vocab* fixed_vocab) {
  AssembledDataset out;
  if (fixed_vocab == nullptr) {
    std::vector<std::string> texts;
    for (const auto& s : samples) {
      for (const auto& r : s.references) texts.push_back(r);
      for (const auto& w : concept_words(s.concepts)) texts.push_back(w);
      if (auto it = paths.find(s.id); it != paths.end())
        for (const auto& ev : linearize_paths(it->second)) texts.push_back(ev.text);
      if (auto it = expansions.find(s.id); it != expansions.end())
        for (const auto& c : it->second)
          for (const auto& w : tokenize_label(c.label)) texts.push_back(w);
    }
    out.vocab = Vocab::build(texts);
  } else {
    out.vocab = *fixed_vocab;
  }
  static const std::vector<KnowledgePath> no_paths;
  static const std::vector<Concept> no_expansions;
  for (const auto& s : samples) {
    auto pit = paths.find(s.id);
    auto eit = expansions.find(s.id);
    out.encoded.push_back(encode_sample(s.id, s.concepts, s.references,
                                        pit == paths.end() ? no_paths : pit->second,
                                        eit == expansions.end() ? no_expansions : eit->second,
                                        out.vocab));
  }
  return out;
}

}  // namespace

int cmd_train(const TrainArgs& args) {
  const std::string hash = write_resolved_config(args.out_dir, "train",
                                                 json{{"dataset", args.dataset},
                                                      {"paths", args.paths},
                                                      {"expansions", args.expansions},
                                                      {"mode", args.mode},
                                                      {"d_model", args.d_model},
                                                      {"n_layers", args.n_layers},
                                                      {"n_heads", args.n_heads},
                                                      {"cs_hidden", args.cs_hidden},
                                                      {"epochs", args.epochs},
                                                      {"learning_rate", args.learning_rate},
                                                      {"mask_lm_prob", args.mask_lm_prob},
                                                      {"seed", args.seed}});
  const InjectionMode mode = injection_mode_from_string(args.mode);
  const auto samples = load_dataset(args.dataset);
  for (const auto& s : samples)
    if (s.references.empty())
      throw std::runtime_error("train: sample " + s.id + " has no reference sentence");
  const auto paths = args.paths.empty()
                         ? std::unordered_map<std::string, std::vector<KnowledgePath>>{}
                         : load_paths_jsonl(args.paths);
  const auto expansions = args.expansions.empty()
                              ? std::unordered_map<std::string, std::vector<Concept>>{}
                              : load_expansions_jsonl(args.expansions);
  AssembledDataset data = assemble(samples, paths, expansions, nullptr);

  ModelConfig config;
  config.vocab_size = data.vocab.size();
  config.d_model = args.d_model;
  config.n_layers = args.n_layers;
  config.n_heads = args.n_heads;
  config.cs_encoder_hidden = args.cs_hidden;
  config.mask_lm_prob = args.mask_lm_prob;
  config.seed = args.seed;
  std::size_t longest_src = 1, longest_tgt = 1;
  for (const auto& s : data.encoded) {
    std::size_t src = s.concept_tokens.size() + s.expansion_tokens.size();
    if (mode == InjectionMode::Concat && s.expansion_tokens.empty())
      for (const auto& ev : s.evidence) src += ev.size();
    longest_src = std::max(longest_src, src);
    longest_tgt = std::max(longest_tgt, s.target_tokens.size());
  }
  config.max_source_len = longest_src + 4;  // headroom for unseen concept sets
  config.max_target_len = longest_tgt + 2;

  InjectionModel model(config);
  TrainOptions opts;
  opts.epochs = args.epochs;
  opts.learning_rate = args.learning_rate;
  const TrainReport report = model.train(data.encoded, mode, opts);

  const std::string ckpt_path = (fs::path(args.out_dir) / "checkpoint.json").string();
  const std::string loss_path = (fs::path(args.out_dir) / "loss.csv").string();
  check_existing_output(ckpt_path, hash, args.force);
  check_existing_output(loss_path, hash, args.force);
  model.save(ckpt_path, data.vocab, hash);
  std::ofstream loss(loss_path);
  loss << "# config_hash=" << hash << "\n";
  loss << "epoch,loss\n";
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e)
    loss << e << "," << report.epoch_loss[e] << "\n";
  std::cout << "train: " << report.epoch_loss.size() << " epochs, final loss "
            << report.epoch_loss.back() << "\n";
  return 0;
}

int cmd_generate(const GenerateArgs& args) {
  const std::string hash = write_resolved_config(args.out_dir, "generate",
                                                 json{{"checkpoint", args.checkpoint},
                                                      {"dataset", args.dataset},
                                                      {"paths", args.paths},
                                                      {"expansions", args.expansions},
                                                      {"lexicon", args.lexicon},
                                                      {"mode", args.mode},
                                                      {"beam_width", args.beam_width},
                                                      {"best_n", args.best_n},
                                                      {"max_len", args.max_len},
                                                      {"jobs", args.jobs}});
  const InjectionMode mode = injection_mode_from_string(args.mode);
  auto [model, vocab] = InjectionModel::load(args.checkpoint);
  const auto samples = load_dataset(args.dataset);
  const auto paths = args.paths.empty()
                         ? std::unordered_map<std::string, std::vector<KnowledgePath>>{}
                         : load_paths_jsonl(args.paths);
  const auto expansions = args.expansions.empty()
                              ? std::unordered_map<std::string, std::vector<Concept>>{}
                              : load_expansions_jsonl(args.expansions);
  AssembledDataset data = assemble(samples, paths, expansions, &vocab);
  const LexiconTagger tagger = LexiconTagger::from_file(args.lexicon);

  DecodeConfig decode;
  decode.beam_width = args.beam_width;
  decode.best_n = args.best_n;
  decode.max_len = std::min(args.max_len, model.config().max_target_len - 1);
  decode.validate();

  std::vector<json> rows(samples.size());
  parallel_for(samples.size(), args.jobs, [&](std::size_t i) {
    EncodedSample input = data.encoded[i];
    input.target_tokens.clear();
    ModelStepScorer scorer(model, input, mode);
    auto candidates = beam_search(scorer, decode);
    for (auto& c : candidates) {
      for (int tok : c.tokens) c.words.push_back(vocab.token(tok));
    }
    score_coverage(candidates, samples[i].concepts, tagger, lemma);
    const GenerationCandidate best =
        best_n_select(candidates, samples[i].concepts, tagger, lemma);
    auto join = [](const std::vector<std::string>& words) {
      std::string s;
      for (const auto& w : words) {
        if (!s.empty()) s += ' ';
        s += w;
      }
      return s;
    };
    json all = json::array();
    for (const auto& c : candidates)
      all.push_back({{"sentence", join(c.words)},
                     {"beam_score", c.beam_score},
                     {"coverage", c.coverage}});
    rows[i] = json{{"id", samples[i].id},
                   {"sentence", join(best.words)},
                   {"beam_score", best.beam_score},
                   {"coverage", best.coverage},
                   {"top_beam_sentence", join(candidates.front().words)},
                   {"all_candidates", std::move(all)}};
  });

  const std::string out_path = (fs::path(args.out_dir) / "generations.jsonl").string();
  check_existing_output(out_path, hash, args.force);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << header_line("generations", hash) << "\n";
  for (const auto& row : rows) out << row.dump() << "\n";
  std::cout << "generate: " << rows.size() << " samples decoded\n";
  return 0;
}

int cmd_eval(const EvalArgs& args) {
  const std::string hash = write_resolved_config(args.out_dir, "eval",
                                                 json{{"generations", args.generations},
                                                      {"dataset", args.dataset},
                                                      {"lexicon", args.lexicon},
                                                      {"run_label", args.run_label}});
  std::ifstream gen_in(args.generations);
  if (!gen_in) throw std::runtime_error("cannot open generations: " + args.generations);
  std::unordered_map<std::string, std::string> sentences;
  std::string line;
  while (std::getline(gen_in, line)) {
    if (line.empty() || line[0] == '#') continue;
    json j = json::parse(line);
    if (j.contains("ckgen_header")) continue;
    sentences[j.at("id").get<std::string>()] = j.at("sentence").get<std::string>();
  }
  const auto samples = load_dataset(args.dataset);
  std::vector<std::string> ids;
  std::vector<TokenSeq> hyps;
  std::vector<std::vector<TokenSeq>> refs;
  std::vector<ConceptSet> concept_sets;
  for (const auto& s : samples) {
    auto it = sentences.find(s.id);
    if (it == sentences.end())
      throw std::runtime_error("eval: no generation for sample " + s.id);
    ids.push_back(s.id);
    hyps.push_back(tokenize(it->second));
    std::vector<TokenSeq> r;
    for (const auto& ref : s.references) r.push_back(tokenize(ref));
    if (r.empty()) throw std::runtime_error("eval: sample " + s.id + " has no references");
    refs.push_back(std::move(r));
    concept_sets.push_back(s.concepts);
  }
  const LexiconTagger tagger = LexiconTagger::from_file(args.lexicon);
  const EvalReport report = evaluate_outputs(ids, hyps, refs, concept_sets, tagger, lemma);

  const std::string json_path = (fs::path(args.out_dir) / "report.json").string();
  const std::string table_path = (fs::path(args.out_dir) / "report.txt").string();
  check_existing_output(json_path, hash, args.force);
  std::ofstream(json_path) << report.to_json(args.run_label, hash) << "\n";
  std::ofstream table(table_path);
  table << "# config_hash=" << hash << "\n" << report.to_table(args.run_label);
  std::cout << report.to_table(args.run_label);
  return 0;
}

int cmd_synth(const SynthArgs& args) {
  const std::string hash = write_resolved_config(args.out_dir, "synth",
                                                 json{{"seed", args.seed},
                                                      {"train_per_scene", args.train_per_scene},
                                                      {"dev_per_scene", args.dev_per_scene}});
  const SyntheticCorpus corpus =
      make_synthetic_corpus(args.seed, args.train_per_scene, args.dev_per_scene);
  const KnowledgeGraph graph = synthetic_graph();

  const std::string graph_path = (fs::path(args.out_dir) / "graph.tsv").string();
  const std::string train_path = (fs::path(args.out_dir) / "train.jsonl").string();
  const std::string dev_path = (fs::path(args.out_dir) / "dev.jsonl").string();
  for (const auto& p : {graph_path, train_path, dev_path})
    check_existing_output(p, hash, args.force);

  std::ofstream gout(graph_path);
  graph.write_fixture_tsv(gout, {"config_hash=" + hash});
  std::ofstream tout(train_path);
  tout << header_line("dataset", hash) << "\n";
  write_dataset_jsonl(tout, corpus.train);
  std::ofstream dout(dev_path);
  dout << header_line("dataset", hash) << "\n";
  write_dataset_jsonl(dout, corpus.dev);
  std::cout << "synth: " << corpus.train.size() << " train / " << corpus.dev.size()
            << " dev samples, " << graph.edge_count() << " graph edges\n";
  return 0;
}

}  // namespace ckgen
