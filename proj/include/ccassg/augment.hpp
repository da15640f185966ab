#pragma once

#include <vector>

#include "ccassg/graph.hpp"
#include "ccassg/linalg.hpp"

namespace ccassg {

/// Edge-dropping and feature-masking ratios shared by both views.
struct AugmentConfig {
  double p_e = 0.0;
  double p_f = 0.0;

  /// Throws ConfigError("p_e" / "p_f") when outside [0, 1].
  void validate() const;
};

/// One sampled view t(G).
struct AugmentedView {
  NormalizedAdjacency adjacency;  // over the surviving edges
  DenseMatrix features;           // masked copy
};

/// Keeps each undirected edge independently with probability 1 - p_e.
std::vector<Edge> drop_edges(std::span<const Edge> edges, double p_e, SeededRng& rng);

/// Zeroes each feature column (across every node) with probability p_f.
DenseMatrix mask_features(const DenseMatrix& x, double p_f, SeededRng& rng);

/// drop_edges, renormalize on the survivors, then mask_features. Draws are
/// made in that order from `rng`.
AugmentedView sample_view(const GraphDataset& g, const DenseMatrix& features, const AugmentConfig& cfg, SeededRng& rng);
AugmentedView sample_view(const GraphDataset& g, const AugmentConfig& cfg, SeededRng& rng);

/// The unaugmented graph as a view.
AugmentedView identity_view(const GraphDataset& g, const DenseMatrix& features);

}  // namespace ccassg
