#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ccassg/diagnostics.hpp"
#include "ccassg/error.hpp"
#include "ccassg/objective.hpp"
#include "doctest.h"

using namespace ccassg;
namespace fs = std::filesystem;

namespace {

DenseMatrix random_symmetric(std::size_t n, SeededRng& rng) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) m(i, j) = m(j, i) = rng.uniform(-1.0, 1.0);
  return m;
}

DenseMatrix random_matrix(std::size_t r, std::size_t c, SeededRng& rng) {
  DenseMatrix m(r, c);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

CorrelationReport report_with(double mean_abs_off, double rank = 10.0) {
  CorrelationReport r;
  r.mean_abs_off_diagonal = mean_abs_off;
  r.effective_rank = rank;
  r.abs_correlation = DenseMatrix(10, 10);
  r.eigenvalues.assign(10, 1.0);
  return r;
}

}  // namespace

TEST_CASE("jacobi eigenvalues match Eigen and the vectors reconstruct the input") {
  SeededRng rng(1);
  for (std::size_t n : {1, 2, 5, 16}) {
    const DenseMatrix a = random_symmetric(n, rng);
    const SymmetricEigen e = jacobi_eigen(a);
    Eigen::MatrixXd ea(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) ea(i, j) = a(i, j);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(ea);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(e.values[i] == doctest::Approx(solver.eigenvalues()(n - 1 - i)).epsilon(1e-9));
      if (i > 0) CHECK(e.values[i - 1] >= e.values[i]);
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += e.vectors(i, k) * e.values[k] * e.vectors(j, k);
        worst = std::max(worst, std::abs(s - a(i, j)));
      }
    CHECK(worst < 1e-9);
  }
  CHECK_THROWS_AS(jacobi_eigen(DenseMatrix(2, 3)), ShapeError);
  DenseMatrix bad = DenseMatrix::identity(2);
  bad(0, 1) = bad(1, 0) = NAN;
  CHECK_THROWS_AS(jacobi_eigen(bad), NumericalError);
}

TEST_CASE("orthogonal columns give full effective rank and zero off-diagonal") {
  // Columns of a 4x4 Hadamard matrix minus the constant one: zero mean, orthogonal.
  const DenseMatrix z{{1, 1, 1}, {-1, 1, -1}, {1, -1, -1}, {-1, -1, 1}};
  const CorrelationReport r = correlation_report(z);
  CHECK(r.mean_abs_off_diagonal < 1e-14);
  CHECK(r.effective_rank == doctest::Approx(3.0).epsilon(1e-12));
  for (double v : r.eigenvalues) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(r.log_det) < 1e-12);
}

TEST_CASE("identical columns collapse to rank one") {
  const DenseMatrix z{{1, 1}, {2, 2}, {4, 4}, {0, 0}};
  const CorrelationReport r = correlation_report(z);
  CHECK(r.eigenvalues[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.eigenvalues[1] < 1e-12);
  CHECK(r.effective_rank == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.mean_abs_off_diagonal == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.log_det < -20.0);
}

TEST_CASE("correlation report agrees with pairwise Pearson coefficients") {
  SeededRng rng(2);
  DenseMatrix z = random_matrix(100, 8, rng);
  for (std::size_t r = 0; r < 100; ++r) z(r, 3) += 0.7 * z(r, 1);
  const CorrelationReport rep = correlation_report(z);
  double off = 0.0;
  for (std::size_t a = 0; a < 8; ++a)
    for (std::size_t b = 0; b < 8; ++b) {
      double ma = 0, mb = 0;
      for (std::size_t r = 0; r < 100; ++r) {
        ma += z(r, a) / 100.0;
        mb += z(r, b) / 100.0;
      }
      double sab = 0, saa = 0, sbb = 0;
      for (std::size_t r = 0; r < 100; ++r) {
        sab += (z(r, a) - ma) * (z(r, b) - mb);
        saa += (z(r, a) - ma) * (z(r, a) - ma);
        sbb += (z(r, b) - mb) * (z(r, b) - mb);
      }
      const double rho = std::abs(sab / std::sqrt(saa * sbb));
      CHECK(std::abs(rep.abs_correlation(a, b) - rho) < 1e-10);
      if (a != b) off += rho;
    }
  CHECK(rep.mean_abs_off_diagonal == doctest::Approx(off / 56.0).epsilon(1e-10));
  double trace = 0.0;
  for (double v : rep.eigenvalues) trace += v;
  CHECK(trace == doctest::Approx(8.0).epsilon(1e-10));
}

TEST_CASE("entropy proxy matches the Gaussian formula") {
  // One column of ±1 has population variance 1: ½ ln(2πe).
  const DenseMatrix one{{1}, {-1}, {1}, {-1}};
  CHECK(gaussian_entropy_proxy(one) == doctest::Approx(0.5 * std::log(2 * std::numbers::pi * std::numbers::e)).epsilon(1e-12));

  SeededRng rng(3);
  const DenseMatrix z = random_matrix(50, 3, rng);
  // Covariance determinant via Eigen as an independent route.
  Eigen::MatrixXd ez(50, 3);
  for (std::size_t r = 0; r < 50; ++r)
    for (std::size_t c = 0; c < 3; ++c) ez(r, c) = z(r, c);
  const Eigen::MatrixXd centered = ez.rowwise() - ez.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / 50.0;
  const double expected = 1.5 * (std::log(2 * std::numbers::pi) + 1.0) + 0.5 * std::log(cov.determinant());
  CHECK(gaussian_entropy_proxy(z) == doctest::Approx(expected).epsilon(1e-10));
  CHECK_THROWS_AS(gaussian_entropy_proxy(DenseMatrix(4, 2)), NumericalError);
}

TEST_CASE("among normalized embeddings, an identity Gram maximises the entropy") {
  // With unit-norm centred columns the covariance is G/N, so the entropy is at
  // most (D/2)(ln 2π + 1) − (D/2) ln N, reached only when G = I.
  const auto bound = [](double d, double n) { return 0.5 * d * (std::log(2 * std::numbers::pi) + 1.0) - 0.5 * d * std::log(n); };
  SeededRng rng(4);
  for (double mix : {0.0, 0.2, 0.5, 0.9}) {
    DenseMatrix y = random_matrix(200, 4, rng);
    for (std::size_t r = 0; r < 200; ++r) y(r, 1) = mix * y(r, 0) + std::sqrt(1 - mix * mix) * y(r, 1);
    const auto ny = normalize_embeddings(y);
    CHECK(gaussian_entropy_proxy(ny.matrix) < bound(4, 200));
  }
  const DenseMatrix h{{1, 1, 1}, {-1, 1, -1}, {1, -1, -1}, {-1, -1, 1}};
  const auto nh = normalize_embeddings(h);
  CHECK(gaussian_entropy_proxy(nh.matrix) == doctest::Approx(bound(3, 4)).epsilon(1e-12));
  DenseMatrix c = h;
  for (std::size_t r = 0; r < 4; ++r) c(r, 2) = 0.6 * h(r, 0) + 0.8 * h(r, 2);
  CHECK(gaussian_entropy_proxy(normalize_embeddings(c).matrix) < gaussian_entropy_proxy(nh.matrix));
}

TEST_CASE("gradcheck passes on correct gradients") {
  SeededRng rng(5);
  SUBCASE("two-layer GCN") {
    const GradcheckResult r = gradcheck(EncoderConfig{EncoderKind::gcn, {7, 6, 5}, false}, 1e-3, rng);
    CHECK(r.max_relative_error <= 1e-4);
    CHECK(r.entries == 7 * 6 + 6 * 5);
  }
  SUBCASE("single linear layer") {
    CHECK(gradcheck(EncoderConfig{EncoderKind::gcn, {6, 4}, false}, 0.1, rng).max_relative_error <= 1e-5);
  }
  SUBCASE("no decorrelation term") {
    CHECK(gradcheck(EncoderConfig{EncoderKind::gcn, {7, 6, 5}, true}, 0.0, rng).max_relative_error <= 1e-4);
  }
  SUBCASE("identical views have zero invariance gradient") {
    // Only the decorrelation term contributes; it must still be a non-trivial gradient.
    const EncoderConfig cfg{EncoderKind::mlp, {7, 6, 5}, false};
    const GradcheckInstance inst = make_gradcheck_instance(cfg, rng, {.identical_views = true});
    const GradcheckResult r = gradcheck(inst, 0.5);
    CHECK(r.max_abs_analytic > 1e-3);
    CHECK(r.max_relative_error <= 1e-4);
  }
}

TEST_CASE("gradcheck catches a corrupted gradient and is deterministic") {
  const EncoderConfig cfg{EncoderKind::gcn, {7, 6, 5}, false};
  SeededRng a(9), b(9);
  const GradcheckInstance ia = make_gradcheck_instance(cfg, a);
  const GradcheckInstance ib = make_gradcheck_instance(cfg, b);
  CHECK(gradcheck(ia, 1e-3, 1e-5, true).max_relative_error > 1e-2);
  CHECK(gradcheck(ia, 1e-3).max_relative_error == gradcheck(ib, 1e-3).max_relative_error);
  SeededRng c(1);
  CHECK_THROWS_AS(make_gradcheck_instance(cfg, c, {.num_nodes = 1}), ConfigError);
}

TEST_CASE("collapse verdict flags") {
  SUBCASE("low effective rank") {
    const std::vector<CorrelationReport> h{report_with(0.01, 0.5)};
    const CollapseVerdict v = collapse_report(h);
    CHECK(v.dimensional_collapse);
    CHECK_FALSE(v.rising_correlation);
  }
  SUBCASE("strictly rising over ten reports") {
    std::vector<CorrelationReport> h;
    for (int i = 0; i < 12; ++i) h.push_back(report_with(0.02 + 0.01 * i));
    CHECK(collapse_report(h).rising_correlation);
    h.back().mean_abs_off_diagonal = h[h.size() - 2].mean_abs_off_diagonal;
    CHECK_FALSE(collapse_report(h).rising_correlation);
  }
  SUBCASE("rising but still near identity") {
    std::vector<CorrelationReport> h;
    for (int i = 0; i < 10; ++i) h.push_back(report_with(0.001 * (i + 1)));
    CHECK_FALSE(collapse_report(h).rising_correlation);
  }
  SUBCASE("too few reports") {
    std::vector<CorrelationReport> h;
    for (int i = 0; i < 9; ++i) h.push_back(report_with(0.1 * (i + 1)));
    CHECK_FALSE(collapse_report(h).rising_correlation);
  }
}

TEST_CASE("correlation CSV and PGM can be read back") {
  const DenseMatrix m{{1.0, 0.25}, {0.25, 1.0}, {0.5, 0.0}};
  const fs::path csv = fs::temp_directory_path() / "ccassg_corr.csv";
  const fs::path pgm = fs::temp_directory_path() / "ccassg_corr.pgm";
  write_correlation_csv(csv, m);
  write_correlation_pgm(pgm, m);

  std::ifstream c(csv);
  std::string line;
  std::vector<std::vector<double>> rows;
  while (std::getline(c, line)) {
    std::stringstream ss(line);
    std::string cell;
    rows.emplace_back();
    while (std::getline(ss, cell, ',')) rows.back().push_back(std::stod(cell));
  }
  REQUIRE(rows.size() == 3);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t k = 0; k < 2; ++k) CHECK(rows[r][k] == m(r, k));

  std::ifstream p(pgm, std::ios::binary);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  p >> magic >> w >> h >> maxval;
  p.get();
  CHECK(magic == "P5");
  CHECK(w == 2);
  CHECK(h == 3);
  CHECK(maxval == 255);
  std::vector<unsigned char> px(6);
  p.read(reinterpret_cast<char*>(px.data()), 6);
  CHECK(p.gcount() == 6);
  CHECK(px == std::vector<unsigned char>{255, 64, 64, 255, 128, 0});
}
