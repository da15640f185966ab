#include "ccassg/convert.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ccassg/error.hpp"

namespace ccassg {

namespace fs = std::filesystem;

namespace {

using Kind = DataError::Kind;

std::vector<std::string_view> tokens(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i <= s.size()) {
    const auto j = s.find(sep, i);
    const auto tok = s.substr(i, j == std::string_view::npos ? std::string_view::npos : j - i);
    if (!tok.empty() || sep != ' ') out.push_back(tok);
    if (j == std::string_view::npos) break;
    i = j + 1;
  }
  return out;
}

// Whitespace-separated fields (tabs or spaces).
std::vector<std::string_view> fields(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view tok, double& out) {
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

fs::path find_one(const fs::path& dir, std::string_view suffix, const char* what) {
  if (!fs::is_directory(dir)) throw ConfigError("input", dir.string() + " is not a directory");
  std::vector<fs::path> hits;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      hits.push_back(entry.path());
  }
  if (hits.size() != 1)
    throw ConfigError("format", "expected exactly one " + std::string(what) + " file (*" + std::string(suffix) +
                                    ") in " + dir.string() + ", found " + std::to_string(hits.size()));
  return hits.front();
}

struct RawGraph {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> features;
  std::vector<std::string> label_names;
  std::vector<std::pair<std::string, std::string>> links;
};

GraphDataset assemble(RawGraph raw, const std::string& name, const fs::path& node_file) {
  if (raw.ids.empty()) throw DataError(Kind::invalid, node_file.string(), 0, "no nodes in input");
  GraphDataset g;
  g.name = name;
  g.num_nodes = raw.ids.size();
  g.num_features = raw.features.front().size();
  if (g.num_features == 0) throw DataError(Kind::invalid, node_file.string(), 0, "nodes have no features");

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < raw.ids.size(); ++i)
    if (!index.emplace(raw.ids[i], i).second)
      throw DataError(Kind::invalid, node_file.string(), 0, "duplicate node id '" + raw.ids[i] + "'");

  std::map<std::string, int> classes;
  for (const auto& l : raw.label_names) classes.emplace(l, 0);
  int next = 0;
  for (auto& [label, id] : classes) id = next++;
  g.num_classes = classes.size();
  std::vector<int> labels;
  labels.reserve(g.num_nodes);
  for (const auto& l : raw.label_names) labels.push_back(classes.at(l));
  g.label_store = LabelStore(std::move(labels));

  g.features = DenseMatrix(g.num_nodes, g.num_features);
  for (std::size_t i = 0; i < g.num_nodes; ++i) std::copy(raw.features[i].begin(), raw.features[i].end(), g.features.row(i).begin());

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(raw.links.size());
  for (const auto& [a, b] : raw.links) {
    const auto ia = index.find(a), ib = index.find(b);
    if (ia == index.end() || ib == index.end()) {
      ++g.ingest.dangling_edges_dropped;
      continue;
    }
    pairs.emplace_back(ia->second, ib->second);
  }
  g.edges = canonicalize_edges(g.num_nodes, pairs, g.ingest);

  try {
    SeededRng rng(0);
    g.splits[kPerClassSplit] = make_per_class_split(g.label_store.unaudited(), g.num_classes, 20, 500, 1000, rng);
  } catch (const ConfigError&) {
    // Too small for the standard protocol; callers can still use "random".
  }
  validate(g);
  return g;
}

RawGraph read_linqs(const fs::path& content, const fs::path& cites) {
  RawGraph raw;
  std::ifstream in(content);
  if (!in) throw DataError(Kind::missing_file, content.string(), 0, "cannot open file");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto f = fields(line);
    if (f.empty()) continue;
    if (f.size() < 3) throw DataError(Kind::malformed_line, content.string(), line_no, "expected id, features, label");
    std::vector<double> x(f.size() - 2);
    for (std::size_t k = 1; k + 1 < f.size(); ++k)
      if (!parse_double(f[k], x[k - 1]))
        throw DataError(Kind::malformed_line, content.string(), line_no, "bad feature value '" + std::string(f[k]) + "'");
    if (!raw.features.empty() && x.size() != raw.features.front().size())
      throw DataError(Kind::count_mismatch, content.string(), line_no, "feature count differs from the first row");
    raw.ids.emplace_back(f.front());
    raw.label_names.emplace_back(f.back());
    raw.features.push_back(std::move(x));
  }

  std::ifstream cin(cites);
  if (!cin) throw DataError(Kind::missing_file, cites.string(), 0, "cannot open file");
  line_no = 0;
  while (std::getline(cin, line)) {
    ++line_no;
    const auto f = fields(line);
    if (f.empty()) continue;
    if (f.size() != 2) throw DataError(Kind::malformed_line, cites.string(), line_no, "expected 'cited citing'");
    raw.links.emplace_back(std::string(f[0]), std::string(f[1]));
  }
  return raw;
}

RawGraph read_pubmed(const fs::path& nodes, const fs::path& cites) {
  RawGraph raw;
  std::ifstream in(nodes);
  if (!in) throw DataError(Kind::missing_file, nodes.string(), 0, "cannot open file");
  std::string line;
  std::size_t line_no = 0;
  std::unordered_map<std::string, std::size_t> vocab;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) continue;  // "NO_FEATURES"
    const auto cols = tokens(line, '\t');
    if (line_no == 2) {
      // Header: "cat=...:label", then "numeric:<term>:0.0" per feature, then "string:summary".
      for (const auto& c : cols) {
        if (!c.starts_with("numeric:")) continue;
        const auto rest = c.substr(8);
        const auto term = rest.substr(0, rest.find(':'));
        vocab.emplace(std::string(term), vocab.size());
      }
      if (vocab.empty()) throw DataError(Kind::malformed_line, nodes.string(), line_no, "header lists no numeric features");
      continue;
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (cols.size() < 2 || !cols[1].starts_with("label="))
      throw DataError(Kind::malformed_line, nodes.string(), line_no, "expected 'id<TAB>label=k ...'");
    std::vector<double> x(vocab.size(), 0.0);
    for (std::size_t k = 2; k < cols.size(); ++k) {
      const auto eq = cols[k].find('=');
      if (eq == std::string_view::npos) continue;
      const std::string term(cols[k].substr(0, eq));
      if (term == "summary") continue;
      const auto it = vocab.find(term);
      if (it == vocab.end())
        throw DataError(Kind::malformed_line, nodes.string(), line_no, "feature '" + term + "' not in header");
      if (!parse_double(cols[k].substr(eq + 1), x[it->second]))
        throw DataError(Kind::malformed_line, nodes.string(), line_no, "bad value for '" + term + "'");
    }
    raw.ids.emplace_back(cols[0]);
    raw.label_names.emplace_back(cols[1].substr(6));
    raw.features.push_back(std::move(x));
  }

  std::ifstream cin(cites);
  if (!cin) throw DataError(Kind::missing_file, cites.string(), 0, "cannot open file");
  line_no = 0;
  while (std::getline(cin, line)) {
    ++line_no;
    const auto f = fields(line);
    if (f.empty()) continue;
    const bool edge = f.size() == 4 && f[2] == "|" && f[1].starts_with("paper:") && f[3].starts_with("paper:");
    if (!edge) {
      if (line_no <= 2) continue;  // "DIRECTED ... cites" and "NO_FEATURES"
      throw DataError(Kind::malformed_line, cites.string(), line_no, "expected 'id paper:a | paper:b'");
    }
    raw.links.emplace_back(std::string(f[1].substr(6)), std::string(f[3].substr(6)));
  }
  return raw;
}

}  // namespace

SourceFormat parse_source_format(const std::string& s) {
  if (s == "linqs") return SourceFormat::linqs;
  if (s == "pubmed") return SourceFormat::pubmed;
  throw ConfigError("format", "unrecognized input format '" + s + "' (expected 'linqs' or 'pubmed')");
}

GraphDataset import_dataset(SourceFormat format, const fs::path& input_dir, const std::string& name) {
  if (format == SourceFormat::linqs) {
    const fs::path content = find_one(input_dir, ".content", "node");
    return assemble(read_linqs(content, find_one(input_dir, ".cites", "citation")), name, content);
  }
  const fs::path nodes = find_one(input_dir, "NODE.paper.tab", "node");
  return assemble(read_pubmed(nodes, find_one(input_dir, ".cites.tab", "citation")), name, nodes);
}

std::string dataset_statistics(const GraphDataset& g) {
  return "nodes=" + std::to_string(g.num_nodes) + " edges(directed)=" + std::to_string(g.directed_edge_count()) +
         " classes=" + std::to_string(g.num_classes) + " features=" + std::to_string(g.num_features);
}

}  // namespace ccassg
