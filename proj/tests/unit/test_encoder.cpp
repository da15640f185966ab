#include <cmath>
#include <filesystem>
#include <fstream>

#include "ccassg/encoder.hpp"
#include "ccassg/error.hpp"
#include "doctest.h"

using namespace ccassg;
namespace fs = std::filesystem;

namespace {

GraphDataset random_graph(std::size_t n, std::size_t f, double feature_density, std::uint64_t seed) {
  SeededRng rng(seed);
  GraphDataset g;
  g.name = "g";
  g.num_nodes = n;
  g.num_features = f;
  g.num_classes = 1;
  g.features = DenseMatrix(n, f);
  for (double& v : g.features.values()) v = rng.bernoulli(feature_density) ? rng.uniform(0.1, 1.0) : 0.0;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (rng.bernoulli(0.2)) g.edges.push_back({u, v});
  g.label_store = LabelStore(std::vector<int>(n, 0));
  return g;
}

DenseMatrix naive_product(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
  return out;
}

// The encoder written out with dense matrices only.
DenseMatrix reference_forward(const EncoderParams& p, const EncoderConfig& cfg, const AugmentedView& view) {
  const DenseMatrix a = view.adjacency.matrix.to_dense();
  DenseMatrix h = view.features;
  for (std::size_t k = 0; k < cfg.depth(); ++k) {
    DenseMatrix z = naive_product(h, p.weights[k]);
    if (cfg.kind == EncoderKind::gcn) z = naive_product(a, z);
    for (std::size_t r = 0; r < z.rows(); ++r)
      for (std::size_t c = 0; c < z.cols(); ++c) {
        if (cfg.bias) z(r, c) += p.biases[k](0, c);
        if (k + 1 < cfg.depth()) z(r, c) = std::max(z(r, c), 0.0);
      }
    h = std::move(z);
  }
  return h;
}

EncoderParams random_params(const EncoderConfig& cfg, SeededRng& rng) {
  EncoderParams p = glorot_init(cfg, rng);
  for (auto& b : p.biases)
    for (double& v : b.values()) v = rng.uniform(-0.2, 0.2);
  return p;
}

double weighted_sum(const DenseMatrix& z, const DenseMatrix& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += z.values()[i] * g.values()[i];
  return s;
}

}  // namespace

TEST_CASE("encoder config validation and shapes") {
  CHECK_THROWS_AS((EncoderConfig{EncoderKind::gcn, {5}, false}.validate()), ConfigError);
  CHECK_THROWS_AS((EncoderConfig{EncoderKind::gcn, {5, 0}, false}.validate()), ConfigError);
  const EncoderConfig cfg{EncoderKind::gcn, {6, 4, 3}, true};
  const EncoderParams p = EncoderParams::zeros_like(cfg);
  CHECK(p.weights.size() == 2);
  CHECK(p.weights[1].rows() == 4);
  CHECK(p.biases[1].cols() == 3);
  CHECK(p.parameter_count() == 6 * 4 + 4 * 3 + 4 + 3);
  CHECK(parse_encoder_kind("mlp") == EncoderKind::mlp);
  CHECK_THROWS_AS(parse_encoder_kind("gat"), ConfigError);
}

TEST_CASE("glorot init respects its bound and leaves biases at zero") {
  const EncoderConfig cfg{EncoderKind::gcn, {30, 20}, true};
  SeededRng rng(1);
  const EncoderParams p = glorot_init(cfg, rng);
  const double bound = std::sqrt(6.0 / 50.0);
  double sq = 0.0;
  for (double v : p.weights[0].values()) {
    CHECK(std::abs(v) <= bound);
    sq += v * v;
  }
  // Uniform(-b, b) has variance b²/3.
  CHECK(sq / 600.0 == doctest::Approx(bound * bound / 3.0).epsilon(0.15));
  for (double v : p.biases[0].values()) CHECK(v == 0.0);
}

TEST_CASE("forward matches a dense reimplementation") {
  for (EncoderKind kind : {EncoderKind::gcn, EncoderKind::mlp}) {
    for (bool bias : {false, true}) {
      for (double density : {0.05, 0.9}) {  // sparse and dense first-layer paths
        const GraphDataset g = random_graph(15, 9, density, 3);
        const EncoderConfig cfg{kind, {9, 7, 6, 4}, bias};
        SeededRng rng(4);
        const EncoderParams p = random_params(cfg, rng);
        const AugmentedView view = identity_view(g, g.features);
        const DenseMatrix z = encode(p, cfg, view);
        CHECK(max_abs_diff(z, reference_forward(p, cfg, view)) < 1e-13);
      }
    }
  }
}

TEST_CASE("forward rejects mismatched inputs") {
  const GraphDataset g = random_graph(6, 4, 0.5, 1);
  const EncoderConfig cfg{EncoderKind::gcn, {5, 3}, false};
  SeededRng rng(1);
  const EncoderParams p = glorot_init(cfg, rng);
  CHECK_THROWS_AS(encode(p, cfg, identity_view(g, g.features)), ShapeError);
  const EncoderConfig other{EncoderKind::gcn, {4, 2}, false};
  CHECK_THROWS_AS(encode(p, other, identity_view(g, g.features)), ShapeError);
}

TEST_CASE("backward agrees with central differences of a linear functional") {
  // L = Σ G ⊙ Z, so dL/dZ = G exactly.
  for (EncoderKind kind : {EncoderKind::gcn, EncoderKind::mlp}) {
    for (double density : {0.1, 0.8}) {
      const GraphDataset g = random_graph(10, 6, density, 8);
      const EncoderConfig cfg{kind, {6, 5, 4}, true};
      SeededRng rng(9);
      EncoderParams p = random_params(cfg, rng);
      const AugmentedView view = identity_view(g, g.features);
      DenseMatrix weights(10, 4);
      for (double& v : weights.values()) v = rng.uniform(-1.0, 1.0);

      const ForwardResult fr = forward(p, cfg, view);
      const EncoderParams grads = backward(p, cfg, fr.tape, weights);

      const double h = 1e-6;
      double worst = 0.0;
      auto probe = [&](DenseMatrix& block, const DenseMatrix& grad) {
        for (std::size_t i = 0; i < block.size(); ++i) {
          const double saved = block.values()[i];
          block.values()[i] = saved + h;
          const double up = weighted_sum(encode(p, cfg, view), weights);
          block.values()[i] = saved - h;
          const double down = weighted_sum(encode(p, cfg, view), weights);
          block.values()[i] = saved;
          const double numeric = (up - down) / (2 * h);
          worst = std::max(worst, std::abs(numeric - grad.values()[i]) / std::max({std::abs(numeric), 1e-3}));
        }
      };
      for (std::size_t k = 0; k < p.weights.size(); ++k) probe(p.weights[k], grads.weights[k]);
      for (std::size_t k = 0; k < p.biases.size(); ++k) probe(p.biases[k], grads.biases[k]);
      CHECK(worst < 1e-6);
    }
  }
}

TEST_CASE("ReLU derivative at exactly zero is zero") {
  // One node, one feature, identity adjacency: pre-activation equals the weight.
  GraphDataset g;
  g.name = "one";
  g.num_nodes = 2;
  g.num_features = 1;
  g.num_classes = 1;
  g.features = DenseMatrix{{1.0}, {1.0}};
  g.label_store = LabelStore({0, 0});
  const EncoderConfig cfg{EncoderKind::mlp, {1, 1, 1}, false};
  EncoderParams p = EncoderParams::zeros_like(cfg);
  p.weights[0](0, 0) = 0.0;
  p.weights[1](0, 0) = 2.0;
  const AugmentedView view = identity_view(g, g.features);
  const ForwardResult fr = forward(p, cfg, view);
  const EncoderParams grads = backward(p, cfg, fr.tape, DenseMatrix{{1.0}, {1.0}});
  CHECK(grads.weights[0](0, 0) == 0.0);
}

TEST_CASE("checkpoint round trip is bit exact") {
  const EncoderConfig cfg{EncoderKind::gcn, {7, 5, 3}, true};
  SeededRng rng(2);
  const Checkpoint ckpt{cfg, random_params(cfg, rng), R"({"note":"hello","lambda":0.002})"};
  const fs::path path = fs::temp_directory_path() / "ccassg_ckpt_roundtrip.bin";
  save_checkpoint(path, ckpt);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.config == cfg);
  CHECK(back.params == ckpt.params);
  CHECK(back.metadata_json.find("hello") != std::string::npos);
}

TEST_CASE("corrupted checkpoints are rejected") {
  const EncoderConfig cfg{EncoderKind::mlp, {4, 2}, false};
  SeededRng rng(3);
  const fs::path path = fs::temp_directory_path() / "ccassg_ckpt_corrupt.bin";
  save_checkpoint(path, {cfg, glorot_init(cfg, rng), "{}"});
  const auto size = fs::file_size(path);

  SUBCASE("truncated") {
    fs::resize_file(path, size - 3);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }
  SUBCASE("trailing bytes") {
    std::ofstream(path, std::ios::app | std::ios::binary) << "xx";
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }
  SUBCASE("bad magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
    f.close();
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_checkpoint(path.string() + ".none"), IoError); }
}
