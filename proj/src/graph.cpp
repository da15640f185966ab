#include "ccassg/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string_view>

#include "ccassg/error.hpp"

namespace ccassg {

namespace fs = std::filesystem;

namespace {

using Kind = DataError::Kind;

/// Line reader that tracks 1-based line numbers for error reporting.
class LineReader {
 public:
  explicit LineReader(const fs::path& path) : path_(path), in_(path) {
    if (!in_) throw DataError(Kind::missing_file, path.string(), 0, "cannot open file");
  }

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  std::size_t line_no() const noexcept { return line_no_; }
  std::string file() const { return path_.string(); }

  [[noreturn]] void fail(Kind kind, const std::string& what) const { throw DataError(kind, file(), line_no_, what); }

 private:
  fs::path path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
};

bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t") == std::string_view::npos;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::size_t parse_index(const LineReader& r, std::string_view tok) {
  std::size_t v = 0;
  if (!parse_number(tok, v)) r.fail(Kind::malformed_line, "expected a non-negative integer, got '" + std::string(tok) + "'");
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

struct Meta {
  std::string name;
  std::size_t num_nodes = 0;
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
};

Meta read_meta(const fs::path& path) {
  LineReader r(path);
  Meta meta;
  std::set<std::string> seen;
  std::string line;
  while (r.next(line)) {
    if (is_blank(line)) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) r.fail(Kind::malformed_line, "expected key<TAB>value");
    const std::string key = line.substr(0, tab);
    const std::string_view value = std::string_view(line).substr(tab + 1);
    if (key == "name") {
      meta.name = std::string(value);
    } else if (key == "num_nodes") {
      meta.num_nodes = parse_index(r, value);
    } else if (key == "num_features") {
      meta.num_features = parse_index(r, value);
    } else if (key == "num_classes") {
      meta.num_classes = parse_index(r, value);
    } else {
      r.fail(Kind::malformed_line, "unknown meta key '" + key + "'");
    }
    seen.insert(key);
  }
  for (const char* required : {"name", "num_nodes", "num_features", "num_classes"})
    if (!seen.contains(required))
      throw DataError(Kind::malformed_line, path.string(), 0, std::string("missing meta key '") + required + "'");
  return meta;
}

std::vector<std::pair<std::size_t, std::size_t>> read_edges(const fs::path& path, std::size_t num_nodes) {
  LineReader r(path);
  std::vector<std::pair<std::size_t, std::size_t>> raw;
  std::string line;
  while (r.next(line)) {
    if (is_blank(line)) continue;
    const auto toks = split_ws(line);
    if (toks.size() != 2) r.fail(Kind::malformed_line, "expected 'u<TAB>v'");
    const std::size_t u = parse_index(r, toks[0]);
    const std::size_t v = parse_index(r, toks[1]);
    if (u >= num_nodes || v >= num_nodes)
      r.fail(Kind::index_out_of_range, "edge endpoint >= num_nodes (" + std::to_string(num_nodes) + ")");
    raw.emplace_back(u, v);
  }
  return raw;
}

DenseMatrix read_features(const fs::path& path, std::size_t n, std::size_t f) {
  LineReader r(path);
  DenseMatrix x(n, f);
  std::string line;
  std::size_t row = 0;
  while (r.next(line)) {
    if (is_blank(line)) continue;
    if (row >= n) r.fail(Kind::count_mismatch, "more feature rows than num_nodes (" + std::to_string(n) + ")");
    const auto toks = split_ws(line);
    if (toks.size() != f)
      r.fail(Kind::count_mismatch, "expected " + std::to_string(f) + " features, got " + std::to_string(toks.size()));
    auto dst = x.row(row);
    for (std::size_t c = 0; c < f; ++c) {
      if (!parse_number(toks[c], dst[c]) || !std::isfinite(dst[c]))
        r.fail(Kind::malformed_line, "bad feature value '" + std::string(toks[c]) + "'");
    }
    ++row;
  }
  if (row != n)
    throw DataError(Kind::count_mismatch, path.string(), 0,
                    "expected " + std::to_string(n) + " feature rows, got " + std::to_string(row));
  return x;
}

std::vector<int> read_labels(const fs::path& path, std::size_t n, std::size_t num_classes) {
  LineReader r(path);
  std::vector<int> labels;
  labels.reserve(n);
  std::string line;
  while (r.next(line)) {
    if (is_blank(line)) continue;
    int y = 0;
    const auto toks = split_ws(line);
    if (toks.size() != 1 || !parse_number(toks[0], y)) r.fail(Kind::malformed_line, "expected one integer label");
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      r.fail(Kind::index_out_of_range, "label outside [0, " + std::to_string(num_classes) + ")");
    if (labels.size() >= n) r.fail(Kind::count_mismatch, "more labels than num_nodes");
    labels.push_back(y);
  }
  if (labels.size() != n)
    throw DataError(Kind::count_mismatch, path.string(), 0,
                    "expected " + std::to_string(n) + " labels, got " + std::to_string(labels.size()));
  return labels;
}

Split read_split(const fs::path& path, std::size_t n) {
  LineReader r(path);
  Split s;
  std::vector<char> used(n, 0);
  std::string line;
  while (r.next(line)) {
    if (is_blank(line)) continue;
    const auto toks = split_ws(line);
    if (toks.size() != 2) r.fail(Kind::malformed_line, "expected 'train|val|test<TAB>node_id'");
    const std::size_t id = parse_index(r, toks[1]);
    if (id >= n) r.fail(Kind::index_out_of_range, "node id >= num_nodes");
    if (used[id]) r.fail(Kind::invalid, "node " + std::to_string(id) + " listed twice");
    used[id] = 1;
    if (toks[0] == "train") {
      s.train.push_back(id);
    } else if (toks[0] == "val") {
      s.val.push_back(id);
    } else if (toks[0] == "test") {
      s.test.push_back(id);
    } else {
      r.fail(Kind::malformed_line, "unknown split role '" + std::string(toks[0]) + "'");
    }
  }
  return s;
}

void write_or_throw(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

template <typename T>
std::uint64_t fnv1a_value(std::uint64_t h, T v) {
  return fnv1a(h, &v, sizeof(v));
}

}  // namespace

void validate(const GraphDataset& g) {
  auto bad = [&](const std::string& what) { throw DataError(Kind::invalid, g.name, 0, what); };
  if (g.features.rows() != g.num_nodes || g.features.cols() != g.num_features) bad("feature matrix shape mismatch");
  if (!g.features.all_finite()) bad("non-finite feature value");
  if (g.label_store.size() != g.num_nodes) bad("label count != num_nodes");
  for (int y : g.label_store.unaudited())
    if (y < 0 || static_cast<std::size_t>(y) >= g.num_classes) bad("label outside [0, num_classes)");
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const Edge& e = g.edges[i];
    if (e.v >= g.num_nodes) bad("edge endpoint >= num_nodes");
    if (e.u >= e.v) bad("edge not stored as u < v");
    if (i > 0 && !(g.edges[i - 1] < e)) bad("edges not sorted/deduplicated");
  }
  for (const auto& [name, s] : g.splits) {
    std::vector<char> used(g.num_nodes, 0);
    for (const auto* part : {&s.train, &s.val, &s.test}) {
      for (std::size_t id : *part) {
        if (id >= g.num_nodes) bad("split '" + name + "' node id out of range");
        if (used[id]) bad("split '" + name + "' lists node " + std::to_string(id) + " twice");
        used[id] = 1;
      }
    }
  }
}

std::vector<Edge> canonicalize_edges(std::size_t num_nodes, std::span<const std::pair<std::size_t, std::size_t>> raw,
                                     IngestReport& report) {
  std::vector<Edge> edges;
  edges.reserve(raw.size());
  for (const auto& [a, b] : raw) {
    if (a >= num_nodes || b >= num_nodes)
      throw DataError(Kind::index_out_of_range, "edges", 0, "edge endpoint >= num_nodes");
    if (a == b) {
      ++report.self_loops_dropped;
      continue;
    }
    edges.push_back({std::min(a, b), std::max(a, b)});
  }
  std::sort(edges.begin(), edges.end());
  const auto last = std::unique(edges.begin(), edges.end());
  report.duplicate_edges_dropped += static_cast<std::size_t>(edges.end() - last);
  edges.erase(last, edges.end());
  return edges;
}

GraphDataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError(Kind::missing_file, dir.string(), 0, "not a dataset directory");
  const Meta meta = read_meta(dir / "meta.tsv");
  GraphDataset g;
  g.name = meta.name;
  g.num_nodes = meta.num_nodes;
  g.num_features = meta.num_features;
  g.num_classes = meta.num_classes;
  const auto raw = read_edges(dir / "edges.tsv", g.num_nodes);
  g.edges = canonicalize_edges(g.num_nodes, raw, g.ingest);
  g.features = read_features(dir / "features.tsv", g.num_nodes, g.num_features);
  g.label_store = LabelStore(read_labels(dir / "labels.tsv", g.num_nodes, g.num_classes));
  const fs::path split_dir = dir / "splits";
  if (fs::is_directory(split_dir)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(split_dir))
      if (entry.is_regular_file() && entry.path().extension() == ".tsv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) g.splits[f.stem().string()] = read_split(f, g.num_nodes);
  }
  validate(g);
  return g;
}

void save_dataset(const GraphDataset& g, const fs::path& dir) {
  validate(g);
  std::error_code ec;
  fs::create_directories(dir / "splits", ec);
  if (ec) throw IoError("cannot create " + (dir / "splits").string() + ": " + ec.message());

  auto open = [](const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot open " + p.string() + " for writing");
    return out;
  };
  {
    auto out = open(dir / "meta.tsv");
    out << "name\t" << g.name << "\nnum_nodes\t" << g.num_nodes << "\nnum_features\t" << g.num_features
        << "\nnum_classes\t" << g.num_classes << "\n";
    write_or_throw(out, dir / "meta.tsv");
  }
  {
    auto out = open(dir / "edges.tsv");
    for (const Edge& e : g.edges) out << e.u << '\t' << e.v << '\n';
    write_or_throw(out, dir / "edges.tsv");
  }
  {
    auto out = open(dir / "features.tsv");
    std::string line;
    for (std::size_t r = 0; r < g.num_nodes; ++r) {
      line.clear();
      const auto row = g.features.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) line += ' ';
        line += format_double(row[c]);
      }
      line += '\n';
      out << line;
    }
    write_or_throw(out, dir / "features.tsv");
  }
  {
    auto out = open(dir / "labels.tsv");
    for (int y : g.label_store.unaudited()) out << y << '\n';
    write_or_throw(out, dir / "labels.tsv");
  }
  for (const auto& [name, s] : g.splits) {
    const fs::path p = dir / "splits" / (name + ".tsv");
    auto out = open(p);
    for (std::size_t id : s.train) out << "train\t" << id << '\n';
    for (std::size_t id : s.val) out << "val\t" << id << '\n';
    for (std::size_t id : s.test) out << "test\t" << id << '\n';
    write_or_throw(out, p);
  }
}

NormalizedAdjacency normalize_adjacency(std::size_t num_nodes, std::span<const Edge> edges) {
  std::vector<std::size_t> degree(num_nodes, 0);
  for (const Edge& e : edges) {
    if (e.u >= num_nodes || e.v >= num_nodes || e.u == e.v)
      throw ShapeError("normalize_adjacency: invalid edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ")");
    ++degree[e.u];
    ++degree[e.v];
  }
  std::vector<double> inv_sqrt(num_nodes);
  for (std::size_t i = 0; i < num_nodes; ++i) inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(degree[i] + 1));

  // Bucket neighbours per row (self-loop included), then sort each row.
  std::vector<std::size_t> row_ptr(num_nodes + 1, 0);
  for (std::size_t i = 0; i < num_nodes; ++i) row_ptr[i + 1] = row_ptr[i] + degree[i] + 1;
  std::vector<std::size_t> col_idx(row_ptr.back());
  std::vector<std::size_t> cursor(row_ptr.begin(), row_ptr.end() - 1);
  for (std::size_t i = 0; i < num_nodes; ++i) col_idx[cursor[i]++] = i;
  for (const Edge& e : edges) {
    col_idx[cursor[e.u]++] = e.v;
    col_idx[cursor[e.v]++] = e.u;
  }
  std::vector<double> values(col_idx.size());
  for (std::size_t i = 0; i < num_nodes; ++i) {
    const auto first = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
    const auto last = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
    std::sort(first, last);
    if (std::adjacent_find(first, last) != last)
      throw ShapeError("normalize_adjacency: duplicate edge at node " + std::to_string(i));
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) values[k] = inv_sqrt[i] * inv_sqrt[col_idx[k]];
  }
  return {CsrMatrix(num_nodes, num_nodes, std::move(row_ptr), std::move(col_idx), std::move(values))};
}

NormalizedAdjacency normalize_adjacency(const GraphDataset& g) { return normalize_adjacency(g.num_nodes, g.edges); }

Split make_random_split(std::size_t num_nodes, SplitFractions fractions, SeededRng& rng) {
  const double sum = fractions.train + fractions.val + fractions.test;
  if (std::abs(sum - 1.0) > 1e-9 || fractions.train < 0 || fractions.val < 0 || fractions.test < 0)
    throw ConfigError("split_fractions", "fractions must be non-negative and sum to 1");
  const double n = static_cast<double>(num_nodes);
  const auto n_train = static_cast<std::size_t>(std::llround(fractions.train * n));
  const auto n_val = std::min(static_cast<std::size_t>(std::llround(fractions.val * n)), num_nodes - n_train);
  std::vector<std::size_t> order(num_nodes);
  for (std::size_t i = 0; i < num_nodes; ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
               order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

Split make_per_class_split(const std::vector<int>& labels, std::size_t num_classes, std::size_t per_class,
                           std::size_t num_val, std::size_t num_test, SeededRng& rng) {
  std::vector<std::size_t> order(labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::size_t> taken(num_classes, 0);
  std::vector<std::size_t> rest;
  Split s;
  for (std::size_t node : order) {
    const auto y = static_cast<std::size_t>(labels[node]);
    if (y >= num_classes) throw ConfigError("split", "label outside [0, num_classes)");
    if (taken[y] < per_class) {
      ++taken[y];
      s.train.push_back(node);
    } else {
      rest.push_back(node);
    }
  }
  for (std::size_t c = 0; c < num_classes; ++c)
    if (taken[c] < per_class) throw ConfigError("split", "class " + std::to_string(c) + " has too few nodes");
  if (rest.size() < num_val + num_test) throw ConfigError("split", "not enough nodes left for val and test");
  s.val.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(num_val));
  s.test.assign(rest.begin() + static_cast<std::ptrdiff_t>(num_val),
                rest.begin() + static_cast<std::ptrdiff_t>(num_val + num_test));
  for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

Split make_random_split(const GraphDataset& g, SplitFractions fractions, SeededRng& rng) {
  return make_random_split(g.num_nodes, fractions, rng);
}

void row_normalize(DenseMatrix& features) {
  for (std::size_t r = 0; r < features.rows(); ++r) {
    auto row = features.row(r);
    double s = 0.0;
    for (double v : row) s += v;
    if (s == 0.0) continue;
    for (double& v : row) v /= s;
  }
}

std::uint64_t dataset_hash(const GraphDataset& g) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  h = fnv1a_value(h, static_cast<std::uint64_t>(g.num_nodes));
  h = fnv1a_value(h, static_cast<std::uint64_t>(g.num_features));
  h = fnv1a_value(h, static_cast<std::uint64_t>(g.num_classes));
  h = fnv1a(h, g.features.data(), g.features.size() * sizeof(double));
  for (const Edge& e : g.edges) {
    h = fnv1a_value(h, static_cast<std::uint64_t>(e.u));
    h = fnv1a_value(h, static_cast<std::uint64_t>(e.v));
  }
  for (int y : g.label_store.unaudited()) h = fnv1a_value(h, static_cast<std::int64_t>(y));
  for (const auto& [name, s] : g.splits) {
    h = fnv1a(h, name.data(), name.size());
    for (const auto* part : {&s.train, &s.val, &s.test}) {
      h = fnv1a_value(h, static_cast<std::uint64_t>(part->size()));
      for (std::size_t id : *part) h = fnv1a_value(h, static_cast<std::uint64_t>(id));
    }
  }
  return h;
}

}  // namespace ccassg
