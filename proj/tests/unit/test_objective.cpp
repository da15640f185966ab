#include <cmath>
#include <vector>

#include "ccassg/error.hpp"
#include "ccassg/objective.hpp"
#include "doctest.h"

using namespace ccassg;

namespace {

DenseMatrix random_matrix(std::size_t r, std::size_t c, SeededRng& rng) {
  DenseMatrix m(r, c);
  for (double& v : m.values()) v = rng.normal() * 3.0 + 1.5;
  return m;
}

// Z̃ by the textbook formula, column by column.
DenseMatrix naive_normalize(const DenseMatrix& z, bool sample) {
  const std::size_t n = z.rows();
  DenseMatrix out(n, z.cols());
  for (std::size_t c = 0; c < z.cols(); ++c) {
    double mu = 0.0;
    for (std::size_t r = 0; r < n; ++r) mu += z(r, c);
    mu /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) ss += (z(r, c) - mu) * (z(r, c) - mu);
    const double sigma = std::sqrt(ss / static_cast<double>(sample ? n - 1 : n));
    for (std::size_t r = 0; r < n; ++r) out(r, c) = (z(r, c) - mu) / (sigma * std::sqrt(static_cast<double>(n)));
  }
  return out;
}

double pearson(const DenseMatrix& z, std::size_t a, std::size_t b) {
  const std::size_t n = z.rows();
  double ma = 0, mb = 0;
  for (std::size_t r = 0; r < n; ++r) {
    ma += z(r, a);
    mb += z(r, b);
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t r = 0; r < n; ++r) {
    sab += (z(r, a) - ma) * (z(r, b) - mb);
    saa += (z(r, a) - ma) * (z(r, a) - ma);
    sbb += (z(r, b) - mb) * (z(r, b) - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// ‖A − B‖² + λ(‖AᵀA − I‖² + ‖BᵀB − I‖²) with every matrix formed explicitly.
double naive_loss(const DenseMatrix& a, const DenseMatrix& b, double lambda, double w = 1.0) {
  double inv = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) inv += (a.values()[i] - b.values()[i]) * (a.values()[i] - b.values()[i]);
  auto dec = [](const DenseMatrix& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.cols(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) {
        double g = 0.0;
        for (std::size_t r = 0; r < m.rows(); ++r) g += m(r, i) * m(r, j);
        if (i == j) g -= 1.0;
        s += g * g;
      }
    return s;
  };
  return w * inv + lambda * (dec(a) + dec(b));
}

}  // namespace

TEST_CASE("population normalization matches the formula and gives unit columns") {
  SeededRng rng(1);
  const DenseMatrix z = random_matrix(40, 6, rng);
  const auto nz = normalize_embeddings(z);
  CHECK(max_abs_diff(nz.matrix, naive_normalize(z, false)) < 1e-14);
  const DenseMatrix g = gram(nz);
  for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(g(k, k) - 1.0) < 1e-12);
  for (std::size_t a = 0; a < 6; ++a)
    for (std::size_t b = 0; b < 6; ++b)
      if (a != b) CHECK(std::abs(g(a, b) - pearson(z, a, b)) < 1e-12);
}

TEST_CASE("sample normalization leaves column norms at (N-1)/N") {
  SeededRng rng(2);
  const DenseMatrix z = random_matrix(25, 4, rng);
  const auto nz = normalize_embeddings(z, StdMode::sample);
  CHECK(max_abs_diff(nz.matrix, naive_normalize(z, true)) < 1e-14);
  const DenseMatrix g = gram(nz);
  for (std::size_t k = 0; k < 4; ++k) CHECK(g(k, k) == doctest::Approx(24.0 / 25.0).epsilon(1e-12));
  CHECK(parse_std_mode("sample") == StdMode::sample);
  CHECK_THROWS_AS(parse_std_mode("biased"), ConfigError);
}

TEST_CASE("degenerate inputs are rejected") {
  DenseMatrix z{{1, 2, 3}, {1, 5, 3}, {1, 0, 3}};
  try {
    normalize_embeddings(z);
    FAIL("expected DegenerateColumnError");
  } catch (const DegenerateColumnError& e) {
    CHECK(e.column() == 0);
  }
  CHECK_THROWS_AS(normalize_embeddings(DenseMatrix{{1, 2}}), ShapeError);
}

TEST_CASE("loss matches the explicit formula") {
  SeededRng rng(3);
  for (double lambda : {0.0, 1e-3, 0.5}) {
    for (double w : {1.0, 0.0}) {
      const auto a = normalize_embeddings(random_matrix(30, 5, rng));
      const auto b = normalize_embeddings(random_matrix(30, 5, rng));
      const LossBreakdown l = cca_loss(a, b, lambda, w);
      CHECK(l.total == doctest::Approx(naive_loss(a.matrix, b.matrix, lambda, w)).epsilon(1e-12));
      CHECK(l.invariance == doctest::Approx(naive_loss(a.matrix, b.matrix, 0.0)).epsilon(1e-12));
      CHECK(l.total == doctest::Approx(w * l.invariance + lambda * l.decorrelation()).epsilon(1e-14));
    }
  }
  CHECK_THROWS_AS(cca_loss(normalize_embeddings(random_matrix(5, 2, rng)), normalize_embeddings(random_matrix(5, 3, rng)), 0.1),
                  ShapeError);
}

TEST_CASE("trace form and its relation to the squared-difference form") {
  SeededRng rng(4);
  const auto a = normalize_embeddings(random_matrix(20, 4, rng));
  const auto b = normalize_embeddings(random_matrix(20, 4, rng));
  double cross = 0.0;
  for (std::size_t i = 0; i < a.matrix.size(); ++i) cross += a.matrix.values()[i] * b.matrix.values()[i];
  // naive_loss(x, x, 0.5) reduces to ‖XᵀX − I‖².
  const double dec = naive_loss(a.matrix, a.matrix, 0.5) + naive_loss(b.matrix, b.matrix, 0.5);
  CHECK(trace_form_loss(a, b, 0.3) == doctest::Approx(-cross + 0.3 * dec).epsilon(1e-12));
  CHECK(loss_equivalence_check(a, b, 0.2) < 1e-12);
}

TEST_CASE("loss gradient agrees with central differences through the normalization") {
  SeededRng rng(5);
  for (StdMode mode : {StdMode::population, StdMode::sample}) {
    for (double w : {1.0, 0.0}) {
      DenseMatrix za = random_matrix(9, 4, rng);
      DenseMatrix zb = random_matrix(9, 4, rng);
      const double lambda = 0.05;
      const LossGradient lg = cca_loss_grad(normalize_embeddings(za, mode), normalize_embeddings(zb, mode), lambda, w);
      auto loss = [&] {
        return cca_loss(normalize_embeddings(za, mode), normalize_embeddings(zb, mode), lambda, w).total;
      };
      const double h = 1e-6;
      double worst = 0.0;
      for (auto [z, g] : {std::pair{&za, &lg.grad_a}, std::pair{&zb, &lg.grad_b}}) {
        for (std::size_t i = 0; i < z->size(); ++i) {
          const double saved = z->values()[i];
          z->values()[i] = saved + h;
          const double up = loss();
          z->values()[i] = saved - h;
          const double down = loss();
          z->values()[i] = saved;
          const double numeric = (up - down) / (2 * h);
          worst = std::max(worst, std::abs(numeric - g->values()[i]) / std::max(std::abs(numeric), 1e-4));
        }
      }
      CHECK(worst < 1e-6);
    }
  }
}

TEST_CASE("gradient columns sum to zero because the loss is shift invariant") {
  SeededRng rng(6);
  const auto a = normalize_embeddings(random_matrix(12, 3, rng));
  const auto b = normalize_embeddings(random_matrix(12, 3, rng));
  const LossGradient lg = cca_loss_grad(a, b, 0.1);
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < 12; ++r) s += lg.grad_a(r, c);
    CHECK(std::abs(s) < 1e-12);
  }
}

TEST_CASE("variance form matches a direct computation") {
  SeededRng rng(7);
  std::vector<DenseMatrix> views;
  for (int i = 0; i < 6; ++i) views.push_back(random_matrix(5, 3, rng));
  const VarianceFormResult r = variance_form_check(views);
  CHECK(r.pairs == 3);

  std::vector<DenseMatrix> nz;
  for (const auto& v : views) nz.push_back(naive_normalize(v, false));
  double pair_sum = 0.0;
  for (int p = 0; p < 3; ++p) pair_sum += naive_loss(nz[2 * p], nz[2 * p + 1], 0.0);
  CHECK(r.pairwise_invariance == doctest::Approx(pair_sum / 3.0).epsilon(1e-12));

  double var_sum = 0.0;
  for (std::size_t e = 0; e < 15; ++e) {
    double m = 0.0;
    for (const auto& v : nz) m += v.values()[e];
    m /= 6.0;
    for (const auto& v : nz) var_sum += (v.values()[e] - m) * (v.values()[e] - m) / 5.0;
  }
  CHECK(r.variance_form == doctest::Approx(2.0 * var_sum).epsilon(1e-12));
  CHECK_THROWS_AS(variance_form_check(std::span<const DenseMatrix>(views.data(), 1)), NumericalError);
}
