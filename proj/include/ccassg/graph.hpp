#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ccassg/linalg.hpp"

namespace ccassg {

/// Undirected edge, stored once with u < v.
struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  friend bool operator==(const Split&, const Split&) = default;
};

/// Counts of input rows normalized away during ingestion.
struct IngestReport {
  std::size_t self_loops_dropped = 0;
  std::size_t duplicate_edges_dropped = 0;
  std::size_t dangling_edges_dropped = 0;  // endpoints missing from the node list (import only)
};

/// Node labels behind an accessor that counts reads, so callers can prove
/// that a code path (pretraining) never looked at them.
class LabelStore {
 public:
  LabelStore() = default;
  explicit LabelStore(std::vector<int> labels) : labels_(std::move(labels)) {}
  LabelStore(const LabelStore& other) : labels_(other.labels_) {}
  LabelStore& operator=(const LabelStore& other) {
    labels_ = other.labels_;
    return *this;
  }

  const std::vector<int>& get() const noexcept {
    reads_.fetch_add(1, std::memory_order_relaxed);
    return labels_;
  }
  /// Uncounted access for serialization and hashing.
  const std::vector<int>& unaudited() const noexcept { return labels_; }
  std::size_t reads() const noexcept { return reads_.load(std::memory_order_relaxed); }
  std::size_t size() const noexcept { return labels_.size(); }

 private:
  std::vector<int> labels_;
  mutable std::atomic<std::size_t> reads_{0};
};

struct GraphDataset {
  std::string name;
  std::size_t num_nodes = 0;
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
  DenseMatrix features;  // num_nodes x num_features
  std::vector<Edge> edges;  // sorted, deduplicated, no self-loops
  LabelStore label_store;
  std::map<std::string, Split> splits;
  IngestReport ingest;

  const std::vector<int>& labels() const { return label_store.get(); }
  /// Table-6 style edge count (both directions).
  std::size_t directed_edge_count() const noexcept { return 2 * edges.size(); }
};

/// Throws DataError(Kind::invalid) naming the first violated invariant.
void validate(const GraphDataset& g);

/// Sorts, orients (u < v), drops self-loops and duplicates, recording counts
/// in `report`. Throws DataError on endpoints >= num_nodes.
std::vector<Edge> canonicalize_edges(std::size_t num_nodes, std::span<const std::pair<std::size_t, std::size_t>> raw,
                                     IngestReport& report);

/// Reads the dataset directory layout (meta.tsv, edges.tsv, features.tsv,
/// labels.tsv, splits/<name>.tsv).
GraphDataset load_dataset(const std::filesystem::path& dir);
/// Writes the directory layout; doubles are written in shortest round-trip form.
void save_dataset(const GraphDataset& g, const std::filesystem::path& dir);

/// D̂^(-1/2)(A+I)D̂^(-1/2), symmetric CSR.
struct NormalizedAdjacency {
  CsrMatrix matrix;
};

NormalizedAdjacency normalize_adjacency(std::size_t num_nodes, std::span<const Edge> edges);
NormalizedAdjacency normalize_adjacency(const GraphDataset& g);

struct SplitFractions {
  double train = 0.1;
  double val = 0.1;
  double test = 0.8;
};

/// Random disjoint cover of [0, num_nodes). Train and val sizes are
/// round(fraction * N); test takes the remainder.
Split make_random_split(std::size_t num_nodes, SplitFractions fractions, SeededRng& rng);
Split make_random_split(const GraphDataset& g, SplitFractions fractions, SeededRng& rng);

/// `per_class` train nodes from each class, then `num_val` and `num_test`
/// nodes from the rest, all in a shuffled order. Throws ConfigError when a
/// class or the remainder is too small.
Split make_per_class_split(const std::vector<int>& labels, std::size_t num_classes, std::size_t per_class,
                           std::size_t num_val, std::size_t num_test, SeededRng& rng);

/// Scales every row to sum to 1; all-zero rows are left untouched.
void row_normalize(DenseMatrix& features);

/// FNV-1a over the canonical content (features, edges, labels, splits).
/// Does not count as a label read.
std::uint64_t dataset_hash(const GraphDataset& g);

}  // namespace ccassg
