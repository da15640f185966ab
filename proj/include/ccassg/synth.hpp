#pragma once

#include <cstddef>
#include <cstdint>

#include "ccassg/graph.hpp"

namespace ccassg {

/// Planted-partition citation graph with bag-of-words features. The defaults
/// mimic Cora's size, class count, vocabulary and mean degree.
struct SynthConfig {
  std::size_t num_nodes = 2708;
  std::size_t num_classes = 7;
  std::size_t num_features = 1433;
  double mean_degree = 3.9;
  double homophily = 0.8;         // probability an edge stays inside its class
  std::size_t words_per_node = 18;
  double topic_fraction = 0.6;    // share of a node's words drawn from its class vocabulary
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Labels are assigned round-robin after a shuffle so classes are balanced.
/// Adds the per-class split when every class is large enough.
GraphDataset make_synthetic_graph(const SynthConfig& cfg);

}  // namespace ccassg
