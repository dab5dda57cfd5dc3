#include "ckgen/dataset.hpp"

#include <cctype>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ckgen/rng.hpp"
#include "ckgen/tokenizer.hpp"

namespace ckgen {

using nlohmann::json;

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

Concept parse_concept_field(const std::string& field) {
  const std::size_t us = field.rfind('_');
  if (us == std::string::npos || us + 2 != field.size())
    throw std::invalid_argument("bad concept field (expected label_POS): " + field);
  const Pos pos = pos_from_letter(field[us + 1]);
  if (pos == Pos::None) throw std::invalid_argument("bad POS letter in: " + field);
  std::string label = field.substr(0, us);
  for (char& c : label) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (label.empty()) throw std::invalid_argument("empty concept label in: " + field);
  return Concept{label, pos};
}

void check_distinct(const ConceptSet& cs) {
  for (std::size_t i = 0; i < cs.items.size(); ++i)
    for (std::size_t j = i + 1; j < cs.items.size(); ++j)
      if (cs.items[i].label == cs.items[j].label)
        throw std::invalid_argument("duplicate concept label: " + cs.items[i].label);
}

DatasetSample parse_jsonl_sample(const json& j, std::size_t index) {
  DatasetSample sample;
  sample.id = j.contains("id") ? j.at("id").get<std::string>() : "sample-" + std::to_string(index);
  for (const auto& cj : j.at("concepts")) {
    Concept c;
    c.label = cj.at("label").get<std::string>();
    if (cj.contains("pos") && !cj.at("pos").is_null()) {
      const std::string p = cj.at("pos").get<std::string>();
      c.pos = p.empty() ? Pos::None : pos_from_letter(p[0]);
    }
    sample.concepts.items.push_back(std::move(c));
  }
  if (sample.concepts.items.size() < 2)
    throw std::invalid_argument("sample " + sample.id + ": needs at least 2 concepts");
  check_distinct(sample.concepts);
  sample.concepts.source_id = sample.id;
  if (j.contains("references"))
    for (const auto& r : j.at("references")) sample.references.push_back(r.get<std::string>());
  return sample;
}

}  // namespace

ConceptSet parse_concept_line(const std::string& field) {
  ConceptSet cs;
  for (const auto& part : split_on(field, '#')) {
    if (part.empty()) throw std::invalid_argument("empty concept in line: " + field);
    cs.items.push_back(parse_concept_field(part));
  }
  if (cs.items.size() < 3 || cs.items.size() > 5)
    throw std::invalid_argument("concept line must carry 3-5 concepts: " + field);
  check_distinct(cs);
  return cs;
}

std::string format_concept_line(const ConceptSet& cs) {
  std::string out;
  for (const auto& c : cs.items) {
    if (!out.empty()) out += '#';
    out += c.label;
    out += '_';
    out += pos_letter(c.pos);
  }
  return out;
}

std::vector<DatasetSample> parse_dataset_text(const std::string& text) {
  std::vector<DatasetSample> samples;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line[0] == '{') {
      json j = json::parse(line);
      if (j.contains("ckgen_header")) continue;
      samples.push_back(parse_jsonl_sample(j, samples.size()));
      continue;
    }
    const auto fields = split_on(line, '\t');
    DatasetSample sample;
    sample.id = "line-" + std::to_string(lineno);
    sample.concepts = parse_concept_line(fields[0]);
    sample.concepts.source_id = sample.id;
    for (std::size_t i = 1; i < fields.size(); ++i)
      if (!fields[i].empty()) sample.references.push_back(fields[i]);
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::vector<DatasetSample> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset_text(buf.str());
}

void write_dataset_jsonl(std::ostream& out, const std::vector<DatasetSample>& samples) {
  for (const auto& s : samples) {
    json cj = json::array();
    for (const auto& c : s.concepts.items) {
      std::string p(1, pos_letter(c.pos));
      cj.push_back({{"label", c.label}, {"pos", c.pos == Pos::None ? json() : json(p)}});
    }
    json j = {{"id", s.id}, {"concepts", std::move(cj)}, {"references", s.references}};
    out << j.dump() << "\n";
  }
}

// ------------------------------------------------------------------

const std::vector<Scene>& synthetic_scenes() {
  static const std::vector<Scene> scenes = [] {
    std::vector<Scene> out;
    auto scene = [&out](std::initializer_list<std::pair<const char*, Pos>> concepts,
                        std::initializer_list<const char*> templates) {
      Scene s;
      for (const auto& [label, pos] : concepts) s.concepts.items.push_back(Concept{label, pos});
      for (const char* t : templates) s.templates.emplace_back(t);
      out.push_back(std::move(s));
    };

    scene({{"dog", Pos::N}, {"frisbee", Pos::N}, {"throw", Pos::V}, {"catch", Pos::V}},
          {"the dog throws the frisbee and catches it",
           "a dog catches the frisbee and throws it back",
           "the dog catches a frisbee after the man throws it"});
    scene({{"bed", Pos::N}, {"comb", Pos::V}, {"hair", Pos::N}, {"sit", Pos::V}},
          {"a man sits on the bed and combs his hair",
           "the man sits on a bed combing his hair",
           "a man combs his hair and sits on the bed"});
    scene({{"board", Pos::N}, {"boat", Pos::N}, {"ride", Pos::V}, {"water", Pos::N}},
          {"a man rides a boat in the water with a boy on board",
           "people on board ride the boat in the water",
           "a boy on board rides the boat on the water"});
    scene({{"girl", Pos::N}, {"song", Pos::N}, {"sing", Pos::V}, {"stage", Pos::N}},
          {"the girl sings a song on the stage", "a girl sings the song on a stage"});
    scene({{"cheese", Pos::N}, {"cook", Pos::V}, {"kitchen", Pos::N}, {"pizza", Pos::N}},
          {"a man cooks a pizza with cheese in the kitchen",
           "the man cooks the pizza with cheese in a kitchen"});
    scene({{"ball", Pos::N}, {"boy", Pos::N}, {"field", Pos::N}, {"kick", Pos::V}},
          {"the boy kicks a ball on the field", "a boy kicks the ball across the field"});
    scene({{"cat", Pos::N}, {"chair", Pos::N}, {"sleep", Pos::V}},
          {"the cat sleeps on the chair", "a cat sleeps in the chair"});
    scene({{"drill", Pos::N}, {"field", Pos::N}, {"run", Pos::V}, {"team", Pos::N}},
          {"the team runs a drill on the field", "a team runs the drill on a field"});
    scene({{"guitar", Pos::N}, {"park", Pos::N}, {"play", Pos::V}, {"woman", Pos::N}},
          {"a woman plays the guitar in the park", "the woman plays a guitar at the park"});
    scene({{"bird", Pos::N}, {"fly", Pos::V}, {"sky", Pos::N}, {"tree", Pos::N}},
          {"a bird flies over the tree in the sky",
           "the bird flies from the tree into the sky"});
    scene({{"beach", Pos::N}, {"child", Pos::N}, {"play", Pos::V}, {"sand", Pos::N}},
          {"a child plays with sand on the beach", "the child plays in the sand at the beach"});
    scene({{"fence", Pos::N}, {"horse", Pos::N}, {"jump", Pos::V}},
          {"the horse jumps over a fence", "a horse jumps the fence"});
    scene({{"chef", Pos::N}, {"cut", Pos::V}, {"knife", Pos::N}, {"tomato", Pos::N}},
          {"a chef cuts a tomato with a knife", "the chef cuts the tomato with his knife"});
    scene({{"climb", Pos::V}, {"man", Pos::N}, {"mountain", Pos::N}, {"snow", Pos::N}},
          {"a man climbs the mountain in the snow", "the man climbs a mountain in the snow"});
    return out;
  }();
  return scenes;
}

std::vector<Edge> synthetic_graph_edges() {
  std::vector<Edge> edges;
  auto push = [&edges](const char* h, Pos hp, const char* rel, const char* t, Pos tp, double w) {
    edges.push_back(Edge{Concept{h, hp}, rel, Concept{t, tp}, w});
  };

  // Scene concepts, pairwise linked so extraction finds 1-hop evidence.
  static const char* kRelations[] = {"RelatedTo", "AtLocation", "UsedFor", "CapableOf"};
  const auto& scenes = synthetic_scenes();
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const auto& items = scenes[si].concepts.items;
    for (std::size_t i = 0; i < items.size(); ++i)
      for (std::size_t j = i + 1; j < items.size(); ++j) {
        const char* rel = kRelations[(si + i + j) % 4];
        const double w = 1.0 + static_cast<double>((si + 2 * i + j) % 4) * 0.25;
        edges.push_back(Edge{items[i], rel, items[j], w});
      }
  }

  // Worked example: cheese--pizza directly, broccoli--pizza through plate.
  push("cheese", Pos::None, "AtLocation", "pizza", Pos::None, 2.0);
  push("broccoli", Pos::None, "AtLocation", "plate", Pos::None, 1.5);
  push("plate", Pos::None, "RelatedTo", "pizza", Pos::None, 1.8);
  push("chicken", Pos::None, "AtLocation", "pizza", Pos::None, 1.6);
  push("broccoli", Pos::None, "RelatedTo", "cheese", Pos::None, 1.2);

  // Worked example: expansion neighborhood of drill/field/run/team.
  push("baseball", Pos::N, "RelatedTo", "drill", Pos::N, 2.5);
  push("baseball", Pos::N, "AtLocation", "field", Pos::N, 2.2);
  push("baseball", Pos::N, "RelatedTo", "run", Pos::V, 2.0);
  push("baseball", Pos::N, "RelatedTo", "team", Pos::N, 2.4);
  push("sport", Pos::N, "RelatedTo", "drill", Pos::N, 2.1);
  push("sport", Pos::N, "RelatedTo", "field", Pos::N, 2.0);
  push("sport", Pos::N, "RelatedTo", "run", Pos::V, 2.3);
  push("sport", Pos::N, "RelatedTo", "team", Pos::N, 2.2);
  push("football", Pos::N, "RelatedTo", "drill", Pos::N, 1.9);
  push("football", Pos::N, "AtLocation", "field", Pos::N, 2.1);
  push("football", Pos::N, "RelatedTo", "team", Pos::N, 2.0);

  return edges;
}

KnowledgeGraph synthetic_graph() { return KnowledgeGraph::from_edges(synthetic_graph_edges()); }

SyntheticCorpus make_synthetic_corpus(std::uint64_t seed, std::size_t train_per_scene,
                                      std::size_t dev_per_scene) {
  SyntheticCorpus corpus;
  Rng rng(seed);
  const auto& scenes = synthetic_scenes();
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const Scene& scene = scenes[si];
    for (std::size_t v = 0; v < train_per_scene; ++v) {
      DatasetSample s;
      s.id = "scene" + std::to_string(si) + "-train" + std::to_string(v);
      s.concepts = scene.concepts;
      s.concepts.source_id = s.id;
      s.references = scene.templates;
      // one template becomes the training target; keep it in front
      const std::size_t pick = rng.next_below(scene.templates.size());
      std::swap(s.references[0], s.references[pick]);
      corpus.train.push_back(std::move(s));
    }
    for (std::size_t v = 0; v < dev_per_scene; ++v) {
      DatasetSample s;
      s.id = "scene" + std::to_string(si) + "-dev" + std::to_string(v);
      s.concepts = scene.concepts;
      s.concepts.source_id = s.id;
      for (std::size_t i = s.concepts.items.size(); i > 1; --i)
        std::swap(s.concepts.items[i - 1], s.concepts.items[rng.next_below(i)]);
      s.references = scene.templates;
      corpus.dev.push_back(std::move(s));
    }
  }
  return corpus;
}

}  // namespace ckgen
