#include "ccassg/objective.hpp"

#include <cmath>

#include "ccassg/error.hpp"

namespace ccassg {

namespace {

constexpr double kStdFloor = 1e-12;

void require_same_shape(const NormalizedEmbeddings& a, const NormalizedEmbeddings& b, const char* op) {
  if (a.matrix.rows() != b.matrix.rows() || a.matrix.cols() != b.matrix.cols())
    throw ShapeError(std::string(op) + ": views have different shapes");
}

double trace(const DenseMatrix& m) {
  double t = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) t += m(i, i);
  return t;
}

double off_identity_sq(const DenseMatrix& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i) {
    for (std::size_t j = 0; j < g.cols(); ++j) {
      const double d = g(i, j) - (i == j ? 1.0 : 0.0);
      s += d * d;
    }
  }
  return s;
}

double cross_trace(const DenseMatrix& a, const DenseMatrix& b) {
  double t = 0.0;
  const auto x = a.values();
  const auto y = b.values();
  for (std::size_t i = 0; i < x.size(); ++i) t += x[i] * y[i];
  return t;
}

struct Terms {
  DenseMatrix gram_a;
  DenseMatrix gram_b;
  double cross = 0.0;
};

Terms compute_terms(const NormalizedEmbeddings& za, const NormalizedEmbeddings& zb) {
  return {gram(za), gram(zb), cross_trace(za.matrix, zb.matrix)};
}

LossBreakdown breakdown(const Terms& t, double lambda, double invariance_weight) {
  LossBreakdown out;
  out.lambda = lambda;
  out.invariance_weight = invariance_weight;
  // ‖A−B‖² = ‖A‖² + ‖B‖² − 2·trace(AᵀB); the squared norms are the Gram traces
  // (both equal D in population mode).
  out.invariance = trace(t.gram_a) + trace(t.gram_b) - 2.0 * t.cross;
  out.decorrelation_a = off_identity_sq(t.gram_a);
  out.decorrelation_b = off_identity_sq(t.gram_b);
  out.total = invariance_weight * out.invariance + lambda * (out.decorrelation_a + out.decorrelation_b);
  return out;
}

// Pull dL/dZ̃ back through Z̃ = (Z − μ)/(σ√N) for one view.
DenseMatrix normalization_backward(const NormalizedEmbeddings& z, const DenseMatrix& grad_norm) {
  const std::size_t n = z.matrix.rows();
  const std::size_t d = z.matrix.cols();
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double divisor = z.mode == StdMode::population ? static_cast<double>(n) : static_cast<double>(n - 1);
  DenseMatrix out(n, d);
  std::vector<double> sum_g(d, 0.0), sum_gx(d, 0.0);
  // With x̂ = Z̃√N and g = dL/dx̂ = dL/dZ̃ / √N:
  //   dL/dz = (g − mean(g) − x̂ · Σ(g·x̂) / divisor) / σ
  for (std::size_t i = 0; i < n; ++i) {
    const auto g = grad_norm.row(i);
    const auto zt = z.matrix.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      sum_g[k] += g[k] / sqrt_n;
      sum_gx[k] += (g[k] / sqrt_n) * (zt[k] * sqrt_n);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto g = grad_norm.row(i);
    const auto zt = z.matrix.row(i);
    auto dst = out.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      const double xhat = zt[k] * sqrt_n;
      dst[k] = (g[k] / sqrt_n - sum_g[k] / static_cast<double>(n) - xhat * sum_gx[k] / divisor) / z.stddev[k];
    }
  }
  return out;
}

}  // namespace

std::string to_string(StdMode mode) { return mode == StdMode::population ? "population" : "sample"; }

StdMode parse_std_mode(const std::string& s) {
  if (s == "population") return StdMode::population;
  if (s == "sample") return StdMode::sample;
  throw ConfigError("std_mode", "expected 'population' or 'sample', got '" + s + "'");
}

NormalizedEmbeddings normalize_embeddings(const DenseMatrix& z, StdMode mode) {
  const std::size_t n = z.rows();
  const std::size_t d = z.cols();
  if (n < 2) throw ShapeError("normalize_embeddings: need at least 2 rows");
  NormalizedEmbeddings out;
  out.mode = mode;
  out.mean.assign(d, 0.0);
  out.stddev.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = z.row(i);
    for (std::size_t k = 0; k < d; ++k) out.mean[k] += row[k];
  }
  for (double& m : out.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = z.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      const double c = row[k] - out.mean[k];
      out.stddev[k] += c * c;
    }
  }
  const double divisor = mode == StdMode::population ? static_cast<double>(n) : static_cast<double>(n - 1);
  for (std::size_t k = 0; k < d; ++k) {
    out.stddev[k] = std::sqrt(out.stddev[k] / divisor);
    if (!(out.stddev[k] > kStdFloor)) throw DegenerateColumnError(k);
  }
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  out.matrix = DenseMatrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = z.row(i);
    auto dst = out.matrix.row(i);
    for (std::size_t k = 0; k < d; ++k) dst[k] = (src[k] - out.mean[k]) / (out.stddev[k] * sqrt_n);
  }
  return out;
}

DenseMatrix gram(const NormalizedEmbeddings& z) { return dense_matmul_tn(z.matrix, z.matrix); }

LossBreakdown cca_loss(const NormalizedEmbeddings& za, const NormalizedEmbeddings& zb, double lambda,
                       double invariance_weight) {
  require_same_shape(za, zb, "cca_loss");
  if (!(lambda >= 0.0)) throw ConfigError("lambda", "must be non-negative");
  return breakdown(compute_terms(za, zb), lambda, invariance_weight);
}

double trace_form_loss(const NormalizedEmbeddings& za, const NormalizedEmbeddings& zb, double lambda_prime) {
  require_same_shape(za, zb, "trace_form_loss");
  const Terms t = compute_terms(za, zb);
  return -t.cross + lambda_prime * (off_identity_sq(t.gram_a) + off_identity_sq(t.gram_b));
}

double loss_equivalence_check(const NormalizedEmbeddings& za, const NormalizedEmbeddings& zb, double lambda) {
  const double direct = cca_loss(za, zb, lambda).total;
  const double d = static_cast<double>(za.matrix.cols());
  return std::abs(direct - (2.0 * trace_form_loss(za, zb, lambda / 2.0) + 2.0 * d));
}

LossGradient cca_loss_grad(const NormalizedEmbeddings& za, const NormalizedEmbeddings& zb, double lambda,
                           double invariance_weight) {
  require_same_shape(za, zb, "cca_loss_grad");
  if (!(lambda >= 0.0)) throw ConfigError("lambda", "must be non-negative");
  Terms t = compute_terms(za, zb);
  LossGradient out;
  out.loss = breakdown(t, lambda, invariance_weight);

  // dL/dZ̃_A = 2w(Z̃_A − Z̃_B) + 4λ Z̃_A (C_A − I), symmetric for B.
  for (std::size_t i = 0; i < t.gram_a.rows(); ++i) {
    t.gram_a(i, i) -= 1.0;
    t.gram_b(i, i) -= 1.0;
  }
  DenseMatrix ga = dense_matmul(za.matrix, t.gram_a);
  DenseMatrix gb = dense_matmul(zb.matrix, t.gram_b);
  {
    auto a = ga.values();
    auto b = gb.values();
    const auto xa = za.matrix.values();
    const auto xb = zb.matrix.values();
    const double w2 = 2.0 * invariance_weight;
    const double l4 = 4.0 * lambda;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double diff = xa[i] - xb[i];
      a[i] = w2 * diff + l4 * a[i];
      b[i] = -w2 * diff + l4 * b[i];
    }
  }
  out.grad_a = normalization_backward(za, ga);
  out.grad_b = normalization_backward(zb, gb);
  return out;
}

VarianceFormResult variance_form_check(std::span<const DenseMatrix> view_embeddings, StdMode mode) {
  if (view_embeddings.size() < 2) throw NumericalError("variance_form_check: need at least two sampled views");
  std::vector<NormalizedEmbeddings> views;
  views.reserve(view_embeddings.size());
  for (const auto& z : view_embeddings) views.push_back(normalize_embeddings(z, mode));
  const std::size_t n = views.front().matrix.rows();
  const std::size_t d = views.front().matrix.cols();
  for (const auto& v : views)
    if (v.matrix.rows() != n || v.matrix.cols() != d) throw ShapeError("variance_form_check: views differ in shape");

  VarianceFormResult r;
  r.pairs = views.size() / 2;
  double lhs = 0.0;
  for (std::size_t p = 0; p < r.pairs; ++p) {
    const auto a = views[2 * p].matrix.values();
    const auto b = views[2 * p + 1].matrix.values();
    for (std::size_t i = 0; i < a.size(); ++i) lhs += (a[i] - b[i]) * (a[i] - b[i]);
  }
  r.pairwise_invariance = lhs / static_cast<double>(r.pairs);

  // Unbiased variance across views of every (node, dim) entry.
  const double m = static_cast<double>(views.size());
  double total_var = 0.0;
  for (std::size_t e = 0; e < n * d; ++e) {
    double mean = 0.0;
    for (const auto& v : views) mean += v.matrix.values()[e];
    mean /= m;
    double ss = 0.0;
    for (const auto& v : views) {
      const double c = v.matrix.values()[e] - mean;
      ss += c * c;
    }
    total_var += ss / (m - 1.0);
  }
  const double mean_node_var = total_var / static_cast<double>(n);  // Σ_k mean_i Var(z̃_ik)
  r.variance_form = 2.0 * static_cast<double>(n) * mean_node_var;
  const double scale = std::max(std::abs(r.variance_form), std::abs(r.pairwise_invariance));
  r.relative_residual = scale > 0.0 ? std::abs(r.pairwise_invariance - r.variance_form) / scale : 0.0;
  return r;
}

}  // namespace ccassg
