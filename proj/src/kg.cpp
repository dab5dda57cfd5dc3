#include "ckgen/kg.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <tuple>

#include <zlib.h>

#include <nlohmann/json.hpp>

namespace ckgen {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::string to_lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool has_whitespace(const std::string& s) {
  return std::any_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

std::vector<std::string> split_slashes(const std::string& uri) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= uri.size()) {
    std::size_t slash = uri.find('/', start);
    if (slash == std::string::npos) {
      if (start < uri.size()) parts.push_back(uri.substr(start));
      break;
    }
    if (slash > start) parts.push_back(uri.substr(start, slash - start));
    start = slash + 1;
  }
  return parts;
}

std::optional<std::string> parse_relation_uri(const std::string& uri) {
  if (uri.rfind("/r/", 0) != 0) return std::nullopt;
  std::string rel = uri.substr(3);
  while (!rel.empty() && rel.back() == '/') rel.pop_back();
  if (rel.empty() || has_whitespace(rel)) return std::nullopt;
  return rel;
}

struct ParsedRow {
  Edge edge;
  std::string start_lang;
  std::string end_lang;
};

std::optional<ParsedRow> parse_conceptnet_row(const std::vector<std::string>& f) {
  if (f.size() != 5) return std::nullopt;
  auto rel = parse_relation_uri(f[1]);
  auto start = parse_concept_uri(f[2]);
  auto end = parse_concept_uri(f[3]);
  if (!rel || !start || !end) return std::nullopt;
  double weight = 1.0;  // dumps may omit the weight key
  try {
    auto meta = nlohmann::json::parse(f[4]);
    if (meta.contains("weight")) {
      if (!meta["weight"].is_number()) return std::nullopt;
      weight = meta["weight"].get<double>();
    }
  } catch (const nlohmann::json::parse_error&) {
    return std::nullopt;
  }
  if (weight < 0.0) return std::nullopt;
  ParsedRow row;
  row.edge = Edge{start->second, *rel, end->second, weight};
  row.start_lang = start->first;
  row.end_lang = end->first;
  return row;
}

std::optional<Pos> parse_fixture_pos(const std::string& s) {
  if (s.size() != 1) return std::nullopt;
  if (s[0] == '-') return Pos::None;
  Pos p = pos_from_letter(s[0]);
  if (p == Pos::None) return std::nullopt;
  return p;
}

std::optional<Edge> parse_fixture_row(const std::vector<std::string>& f) {
  if (f.size() != 6) return std::nullopt;
  auto hpos = parse_fixture_pos(f[1]);
  auto tpos = parse_fixture_pos(f[4]);
  if (!hpos || !tpos) return std::nullopt;
  std::string head = to_lower(f[0]);
  std::string rel = f[2];
  std::string tail = to_lower(f[3]);
  if (head.empty() || tail.empty() || rel.empty()) return std::nullopt;
  if (has_whitespace(head) || has_whitespace(tail) || has_whitespace(rel)) return std::nullopt;
  double weight = 0.0;
  try {
    std::size_t used = 0;
    weight = std::stod(f[5], &used);
    if (used != f[5].size()) return std::nullopt;
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (weight < 0.0) return std::nullopt;
  return Edge{Concept{head, *hpos}, rel, Concept{tail, *tpos}, weight};
}

DumpFormat sniff_format(const std::string& line) {
  auto f = split_tabs(line);
  if (f.size() == 5 && f[2].rfind("/c/", 0) == 0) return DumpFormat::ConceptNet;
  if (f.size() == 6 && parse_fixture_pos(f[1])) return DumpFormat::FixtureTsv;
  // Unrecognizable first rows count as malformed under either reading; the
  // ConceptNet parser reports them as skips.
  return DumpFormat::ConceptNet;
}

struct EdgeKeyLess {
  bool operator()(const Edge& a, const Edge& b) const {
    return std::tie(a.head.label, a.head.pos, a.relation, a.tail.label, a.tail.pos) <
           std::tie(b.head.label, b.head.pos, b.relation, b.tail.label, b.tail.pos);
  }
};

}  // namespace

std::optional<std::pair<std::string, Concept>> parse_concept_uri(const std::string& uri) {
  if (uri.rfind("/c/", 0) != 0) return std::nullopt;
  auto parts = split_slashes(uri);
  // parts: ["c", lang, term, (pos, sense...)]
  if (parts.size() < 3) return std::nullopt;
  const std::string& lang = parts[1];
  std::string term = to_lower(parts[2]);
  if (lang.empty() || term.empty() || has_whitespace(term)) return std::nullopt;
  Pos pos = Pos::None;
  if (parts.size() >= 4 && parts[3].size() == 1) pos = pos_from_letter(parts[3][0]);
  return std::make_pair(lang, Concept{std::move(term), pos});
}

std::string format_concept_uri(const std::string& language, const Concept& c) {
  std::string uri = "/c/" + language + "/" + c.label;
  if (c.pos != Pos::None) {
    uri += '/';
    uri += static_cast<char>(std::tolower(pos_letter(c.pos)));
  }
  return uri;
}

KnowledgeGraph KnowledgeGraph::from_edges(std::vector<Edge> edges) {
  KnowledgeGraph g;
  std::map<std::tuple<std::string, Pos, std::string, std::string, Pos>, std::uint32_t> seen;
  g.edges_.reserve(edges.size());
  for (auto& e : edges) {
    auto key = std::make_tuple(e.head.label, e.head.pos, e.relation, e.tail.label, e.tail.pos);
    auto it = seen.find(key);
    if (it != seen.end()) {
      Edge& kept = g.edges_[it->second];
      kept.weight = std::max(kept.weight, e.weight);
      continue;
    }
    seen.emplace(std::move(key), static_cast<std::uint32_t>(g.edges_.size()));
    g.edges_.push_back(std::move(e));
  }
  for (std::uint32_t i = 0; i < g.edges_.size(); ++i) {
    g.out_index_[g.edges_[i].head.label].push_back(i);
    g.in_index_[g.edges_[i].tail.label].push_back(i);
  }
  return g;
}

std::size_t KnowledgeGraph::node_count() const {
  std::set<std::string> labels;
  for (const auto& e : edges_) {
    labels.insert(e.head.label);
    labels.insert(e.tail.label);
  }
  return labels.size();
}

bool KnowledgeGraph::has_node(const std::string& label) const {
  return out_index_.count(label) > 0 || in_index_.count(label) > 0;
}

std::vector<Edge> KnowledgeGraph::neighbors(const std::string& label,
                                            std::optional<Pos> pos_filter,
                                            Direction direction) const {
  std::vector<std::uint32_t> idx;
  auto collect = [&](const auto& index, bool match_head) {
    auto it = index.find(label);
    if (it == index.end()) return;
    for (std::uint32_t i : it->second) {
      const Edge& e = edges_[i];
      const Concept& matched = match_head ? e.head : e.tail;
      if (pos_filter && matched.pos != *pos_filter) continue;
      idx.push_back(i);
    }
  };
  if (direction == Direction::Out || direction == Direction::Both) collect(out_index_, true);
  if (direction == Direction::In || direction == Direction::Both) collect(in_index_, false);
  if (direction == Direction::Both) {
    // A self-loop sits in both indices; report the edge once.
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  }
  std::vector<Edge> result;
  result.reserve(idx.size());
  for (std::uint32_t i : idx) result.push_back(edges_[i]);
  std::sort(result.begin(), result.end(), [&](const Edge& a, const Edge& b) {
    const Concept& an = a.head.label == label ? a.tail : a.head;
    const Concept& bn = b.head.label == label ? b.tail : b.head;
    return std::make_tuple(-a.weight, std::cref(a.relation), std::cref(an.label), an.pos,
                           a.head.label, a.head.pos, a.tail.pos) <
           std::make_tuple(-b.weight, std::cref(b.relation), std::cref(bn.label), bn.pos,
                           b.head.label, b.head.pos, b.tail.pos);
  });
  return result;
}

std::vector<Concept> KnowledgeGraph::top_k_neighbors(const std::string& label,
                                                     std::size_t k) const {
  // label -> (max incident weight, representative endpoint concept)
  std::map<std::string, std::pair<double, Concept>> best;
  for (const Edge& e : neighbors(label, std::nullopt, Direction::Both)) {
    const Concept& other = e.head.label == label ? e.tail : e.head;
    if (other.label == label) continue;
    auto it = best.find(other.label);
    if (it == best.end() || e.weight > it->second.first)
      best[other.label] = {e.weight, other};
  }
  std::vector<std::pair<double, Concept>> ranked;
  ranked.reserve(best.size());
  for (auto& [lbl, wc] : best) ranked.push_back(wc);
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second.label < b.second.label;
  });
  if (ranked.size() > k) ranked.resize(k);
  std::vector<Concept> out;
  out.reserve(ranked.size());
  for (auto& [w, c] : ranked) out.push_back(c);
  return out;
}

void KnowledgeGraph::write_fixture_tsv(std::ostream& out,
                                       const std::vector<std::string>& header_comments) const {
  for (const auto& line : header_comments) out << "# " << line << "\n";
  std::vector<Edge> sorted = edges_;
  std::sort(sorted.begin(), sorted.end(), EdgeKeyLess{});
  for (const Edge& e : sorted) {
    out << e.head.label << '\t' << pos_letter(e.head.pos) << '\t' << e.relation << '\t'
        << e.tail.label << '\t' << pos_letter(e.tail.pos) << '\t' << e.weight << "\n";
  }
}

namespace {

// Shared row handling for the string and streaming loaders; dumps are large,
// so the file path never materializes the whole text.
class RowAccumulator {
 public:
  RowAccumulator(std::string language, DumpFormat format)
      : language_(std::move(language)), format_(format) {}

  void feed(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') return;
    if (format_ == DumpFormat::Auto) format_ = sniff_format(line);
    const auto fields = split_tabs(line);
    if (format_ == DumpFormat::FixtureTsv) {
      auto edge = parse_fixture_row(fields);
      if (!edge) {
        ++result_.skipped_rows;
        return;
      }
      edges_.push_back(std::move(*edge));
    } else {
      auto row = parse_conceptnet_row(fields);
      if (!row) {
        ++result_.skipped_rows;
        return;
      }
      if (row->start_lang != language_ || row->end_lang != language_) {
        ++result_.filtered_rows;
        return;
      }
      edges_.push_back(std::move(row->edge));
    }
  }

  LoadResult finish() {
    result_.graph = KnowledgeGraph::from_edges(std::move(edges_));
    return std::move(result_);
  }

 private:
  std::string language_;
  DumpFormat format_;
  std::vector<Edge> edges_;
  LoadResult result_;
};

}  // namespace

LoadResult load_dump_text(const std::string& text, const std::string& language,
                          DumpFormat format) {
  RowAccumulator acc(language, format);
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t nl = text.find('\n', start);
    acc.feed(text.substr(start, nl == std::string::npos ? nl : nl - start));
    start = nl == std::string::npos ? text.size() : nl + 1;
  }
  return acc.finish();
}

LoadResult load_dump(const std::string& path, const std::string& language, DumpFormat format) {
  // gzopen reads plain files transparently, so one reader covers .gz and text.
  gzFile file = gzopen(path.c_str(), "rb");
  if (file == nullptr) throw std::runtime_error("cannot open dump file: " + path);
  RowAccumulator acc(language, format);
  std::string line;
  char buf[1 << 16];
  while (gzgets(file, buf, sizeof(buf)) != nullptr) {
    line += buf;
    if (!line.empty() && line.back() == '\n') {
      line.pop_back();
      acc.feed(std::move(line));
      line.clear();
    }
  }
  int errnum = 0;
  gzerror(file, &errnum);
  gzclose(file);
  if (errnum != Z_OK && errnum != Z_STREAM_END)
    throw std::runtime_error("error while reading dump file: " + path);
  if (!line.empty()) acc.feed(std::move(line));  // final line without newline
  return acc.finish();
}

}  // namespace ckgen
