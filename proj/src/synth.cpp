#include "ccassg/synth.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ccassg/convert.hpp"
#include "ccassg/error.hpp"

namespace ccassg {

void SynthConfig::validate() const {
  if (num_nodes < 2) throw ConfigError("nodes", "need at least two nodes");
  if (num_classes < 1 || num_classes > num_nodes) throw ConfigError("classes", "must be in [1, nodes]");
  if (num_features < num_classes) throw ConfigError("features", "need at least one feature per class");
  if (!(mean_degree >= 0.0) || !std::isfinite(mean_degree)) throw ConfigError("mean_degree", "must be non-negative");
  if (!(homophily >= 0.0 && homophily <= 1.0)) throw ConfigError("homophily", "must be in [0, 1]");
  if (!(topic_fraction >= 0.0 && topic_fraction <= 1.0)) throw ConfigError("topic_fraction", "must be in [0, 1]");
  if (words_per_node < 1) throw ConfigError("words_per_node", "must be >= 1");
}

GraphDataset make_synthetic_graph(const SynthConfig& cfg) {
  cfg.validate();
  SeededRng rng(cfg.seed);
  const std::size_t n = cfg.num_nodes, c = cfg.num_classes, f = cfg.num_features;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<int> labels(n);
  std::vector<std::vector<std::size_t>> members(c);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = i % c;
    labels[order[i]] = static_cast<int>(y);
  }
  for (std::size_t v = 0; v < n; ++v) members[static_cast<std::size_t>(labels[v])].push_back(v);

  GraphDataset g;
  g.name = "synthetic";
  g.num_nodes = n;
  g.num_features = f;
  g.num_classes = c;
  g.features = DenseMatrix(n, f);
  // Class k owns the vocabulary slice [k*f/c, (k+1)*f/c).
  for (std::size_t v = 0; v < n; ++v) {
    const auto y = static_cast<std::size_t>(labels[v]);
    const std::size_t lo = y * f / c, hi = (y + 1) * f / c;
    for (std::size_t w = 0; w < cfg.words_per_node; ++w) {
      const std::size_t word =
          rng.bernoulli(cfg.topic_fraction) ? lo + rng.uniform_index(hi - lo) : rng.uniform_index(f);
      g.features(v, word) = 1.0;
    }
  }

  const auto target = static_cast<std::size_t>(std::llround(cfg.mean_degree * static_cast<double>(n) / 2.0));
  std::vector<std::pair<std::size_t, std::size_t>> raw;
  raw.reserve(target);
  for (std::size_t e = 0; e < target; ++e) {
    const std::size_t u = rng.uniform_index(n);
    std::size_t v;
    if (rng.bernoulli(cfg.homophily)) {
      const auto& same = members[static_cast<std::size_t>(labels[u])];
      v = same[rng.uniform_index(same.size())];
    } else {
      v = rng.uniform_index(n);
    }
    raw.emplace_back(u, v);
  }
  g.edges = canonicalize_edges(n, raw, g.ingest);
  g.label_store = LabelStore(std::move(labels));

  const std::size_t smallest = n / c;
  if (smallest > 20 && n - 20 * c >= 1500) {
    SeededRng split_rng = rng.fork(1);
    g.splits[kPerClassSplit] = make_per_class_split(g.label_store.unaudited(), c, 20, 500, 1000, split_rng);
  }
  validate(g);
  return g;
}

}  // namespace ccassg
