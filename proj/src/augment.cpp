#include "ccassg/augment.hpp"

#include "ccassg/error.hpp"

namespace ccassg {

void AugmentConfig::validate() const {
  if (!(p_e >= 0.0 && p_e <= 1.0)) throw ConfigError("p_e", "must lie in [0, 1]");
  if (!(p_f >= 0.0 && p_f <= 1.0)) throw ConfigError("p_f", "must lie in [0, 1]");
}

std::vector<Edge> drop_edges(std::span<const Edge> edges, double p_e, SeededRng& rng) {
  std::vector<Edge> kept;
  kept.reserve(edges.size());
  for (const Edge& e : edges)
    if (!rng.bernoulli(p_e)) kept.push_back(e);
  return kept;
}

DenseMatrix mask_features(const DenseMatrix& x, double p_f, SeededRng& rng) {
  std::vector<char> masked(x.cols());
  bool any = false;
  for (auto& m : masked) {
    m = rng.bernoulli(p_f) ? 1 : 0;
    any = any || m;
  }
  DenseMatrix out = x;
  if (!any) return out;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c)
      if (masked[c]) row[c] = 0.0;
  }
  return out;
}

AugmentedView sample_view(const GraphDataset& g, const DenseMatrix& features, const AugmentConfig& cfg, SeededRng& rng) {
  cfg.validate();
  const auto kept = drop_edges(g.edges, cfg.p_e, rng);
  AugmentedView view{normalize_adjacency(g.num_nodes, kept), {}};
  view.features = mask_features(features, cfg.p_f, rng);
  return view;
}

AugmentedView sample_view(const GraphDataset& g, const AugmentConfig& cfg, SeededRng& rng) {
  return sample_view(g, g.features, cfg, rng);
}

AugmentedView identity_view(const GraphDataset& g, const DenseMatrix& features) {
  return {normalize_adjacency(g), features};
}

}  // namespace ccassg
