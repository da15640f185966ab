#include "ccassg/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "ccassg/error.hpp"
#include "ccassg/objective.hpp"
#include "ccassg/pipeline.hpp"

namespace ccassg {

namespace {

double off_diagonal_norm_sq(const DenseMatrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return s;
}

// Clamped spectrum summaries shared by the report and the entropy proxy.
std::vector<double> clamped_spectrum(const DenseMatrix& symmetric, double floor) {
  auto eig = jacobi_eigen(symmetric);
  for (double& v : eig.values) v = std::max(v, floor);
  return eig.values;
}

double loss_at(const GradcheckInstance& inst, const EncoderParams& params, double lambda) {
  const auto za = normalize_embeddings(encode(params, inst.encoder, inst.view_a));
  const auto zb = normalize_embeddings(encode(params, inst.encoder, inst.view_b));
  return cca_loss(za, zb, lambda).total;
}

double min_hidden_margin(const EncoderParams& params, const EncoderConfig& cfg, const AugmentedView& view) {
  const ForwardResult f = forward(params, cfg, view);
  double margin = INFINITY;
  for (std::size_t k = 0; k + 1 < f.tape.layers.size(); ++k)
    for (double v : f.tape.layers[k].pre_activation.values()) margin = std::min(margin, std::abs(v));
  return margin;
}

}  // namespace

SymmetricEigen jacobi_eigen(const DenseMatrix& symmetric, double tolerance, std::size_t max_sweeps) {
  if (symmetric.rows() != symmetric.cols()) throw ShapeError("jacobi_eigen: matrix is not square");
  if (!symmetric.all_finite()) throw NumericalError("jacobi_eigen: non-finite input");
  const std::size_t n = symmetric.rows();
  DenseMatrix a = symmetric;
  DenseMatrix v = DenseMatrix::identity(n);
  const double scale = std::max(frobenius_norm_sq(a), 1e-300);
  const double target = tolerance * tolerance * scale;

  SymmetricEigen out;
  while (off_diagonal_norm_sq(a) > target) {
    if (out.sweeps == max_sweeps) throw NumericalError("jacobi_eigen: no convergence");
    ++out.sweeps;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation angle that annihilates a(p, q), taking the smaller root.
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  out.values.resize(n);
  out.vectors = DenseMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = a(order[i], order[i]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, i) = v(k, order[i]);
  }
  return out;
}

CorrelationReport correlation_report(const DenseMatrix& z) {
  const auto nz = normalize_embeddings(z, StdMode::population);
  const DenseMatrix g = gram(nz);
  const std::size_t d = g.rows();

  CorrelationReport r;
  r.abs_correlation = DenseMatrix(d, d);
  double off = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      r.abs_correlation(i, j) = std::abs(g(i, j));
      if (i != j) off += std::abs(g(i, j));
    }
  r.mean_abs_off_diagonal = d > 1 ? off / static_cast<double>(d * (d - 1)) : 0.0;

  r.eigenvalues = clamped_spectrum(g, 0.0);
  double total = 0.0;
  for (double l : r.eigenvalues) total += l;
  double h = 0.0;
  for (double l : r.eigenvalues) {
    r.log_det += std::log(std::max(l, 1e-12));
    if (l > 0.0) {
      const double p = l / total;
      h -= p * std::log(p);
    }
  }
  r.effective_rank = std::exp(h);
  return r;
}

double gaussian_entropy_proxy(const DenseMatrix& z) {
  if (z.rows() < 1 || z.cols() < 1) throw ShapeError("gaussian_entropy_proxy: empty input");
  if (!z.all_finite()) throw NumericalError("gaussian_entropy_proxy: non-finite input");
  if (std::all_of(z.values().begin(), z.values().end(), [](double v) { return v == 0.0; }))
    throw NumericalError("gaussian_entropy_proxy: all-zero input");

  const std::size_t n = z.rows(), d = z.cols();
  DenseMatrix centered = z;
  for (std::size_t c = 0; c < d; ++c) {
    double mu = 0.0;
    for (std::size_t r = 0; r < n; ++r) mu += z(r, c);
    mu /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) centered(r, c) -= mu;
  }
  DenseMatrix cov = dense_matmul_tn(centered, centered);
  for (double& v : cov.values()) v /= static_cast<double>(n);

  double log_det = 0.0;
  for (double l : clamped_spectrum(cov, 1e-12)) log_det += std::log(l);
  return 0.5 * static_cast<double>(d) * (std::log(2.0 * std::numbers::pi) + 1.0) + 0.5 * log_det;
}

GradcheckInstance make_gradcheck_instance(const EncoderConfig& cfg, SeededRng& rng, const GradcheckOptions& opts) {
  cfg.validate();
  if (opts.num_nodes < 2 || opts.num_nodes > 32) throw ConfigError("num_nodes", "gradcheck instances need 2..32 nodes");

  GraphDataset g;
  g.name = "gradcheck";
  g.num_nodes = opts.num_nodes;
  g.num_features = cfg.input_dim();
  g.features = DenseMatrix(g.num_nodes, g.num_features);
  for (double& v : g.features.values()) v = rng.uniform(0.1, 1.0);
  for (std::size_t u = 0; u < g.num_nodes; ++u)
    for (std::size_t v = u + 1; v < g.num_nodes; ++v)
      if (rng.bernoulli(opts.edge_probability)) g.edges.push_back({u, v});

  const AugmentConfig aug{opts.p_e, opts.p_f};
  constexpr int kAttempts = 200;
  constexpr double kKinkMargin = 1e-3;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    GradcheckInstance inst;
    inst.encoder = cfg;
    inst.view_a = sample_view(g, g.features, aug, rng);
    inst.view_b = opts.identical_views ? inst.view_a : sample_view(g, g.features, aug, rng);
    inst.params = glorot_init(cfg, rng);
    for (auto& b : inst.params.biases)
      for (double& v : b.values()) v = rng.uniform(-0.1, 0.1);
    if (min_hidden_margin(inst.params, cfg, inst.view_a) < kKinkMargin ||
        min_hidden_margin(inst.params, cfg, inst.view_b) < kKinkMargin)
      continue;
    try {
      (void)loss_at(inst, inst.params, 0.0);
    } catch (const DegenerateColumnError&) {
      continue;
    }
    return inst;
  }
  throw NumericalError("make_gradcheck_instance: could not draw an instance away from ReLU kinks");
}

GradcheckResult gradcheck(const GradcheckInstance& inst, double lambda, double h, bool corrupt_analytic) {
  if (!(h > 0.0)) throw ConfigError("h", "finite-difference step must be positive");
  EncoderParams analytic =
      two_view_step(inst.params, inst.encoder, inst.view_a, inst.view_b, lambda).grads;
  if (corrupt_analytic) analytic.weights.front()(0, 0) += 0.1 * (std::abs(analytic.weights.front()(0, 0)) + 1.0);

  GradcheckResult result;
  EncoderParams probe = inst.params;
  auto check_block = [&](DenseMatrix& block, const DenseMatrix& grad) {
    for (std::size_t i = 0; i < block.size(); ++i) {
      const double saved = block.values()[i];
      block.values()[i] = saved + h;
      const double up = loss_at(inst, probe, lambda);
      block.values()[i] = saved - h;
      const double down = loss_at(inst, probe, lambda);
      block.values()[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = grad.values()[i];
      if (!std::isfinite(numeric) || !std::isfinite(a)) throw NumericalError("gradcheck: non-finite gradient");
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
      result.max_abs_analytic = std::max(result.max_abs_analytic, std::abs(a));
      ++result.entries;
    }
  };
  for (std::size_t k = 0; k < probe.weights.size(); ++k) check_block(probe.weights[k], analytic.weights[k]);
  for (std::size_t k = 0; k < probe.biases.size(); ++k) check_block(probe.biases[k], analytic.biases[k]);
  return result;
}

GradcheckResult gradcheck(const EncoderConfig& cfg, double lambda, SeededRng& rng, double h) {
  return gradcheck(make_gradcheck_instance(cfg, rng), lambda, h);
}

CollapseVerdict collapse_report(std::span<const CorrelationReport> history) {
  CollapseVerdict v;
  if (history.empty()) return v;
  const auto& last = history.back();
  const double d = static_cast<double>(last.eigenvalues.size());
  v.effective_rank = last.effective_rank;
  v.mean_abs_off_diagonal = last.mean_abs_off_diagonal;
  v.dimensional_collapse = last.effective_rank < 0.1 * d;

  constexpr std::size_t kWindow = 10;
  if (history.size() >= kWindow && last.mean_abs_off_diagonal >= kRisingCorrelationFloor) {
    bool rising = true;
    for (std::size_t i = history.size() - kWindow + 1; i < history.size(); ++i)
      rising = rising && history[i].mean_abs_off_diagonal > history[i - 1].mean_abs_off_diagonal;
    v.rising_correlation = rising;
  }
  return v;
}

void write_correlation_csv(const std::filesystem::path& path, const DenseMatrix& abs_correlation) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  char buf[32];
  for (std::size_t i = 0; i < abs_correlation.rows(); ++i) {
    for (std::size_t j = 0; j < abs_correlation.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", abs_correlation(i, j));
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_correlation_pgm(const std::filesystem::path& path, const DenseMatrix& abs_correlation) {
  if (abs_correlation.empty()) throw ShapeError("write_correlation_pgm: empty matrix");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << abs_correlation.cols() << ' ' << abs_correlation.rows() << "\n255\n";
  for (double v : abs_correlation.values()) {
    const double clamped = std::clamp(std::abs(v), 0.0, 1.0);
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(clamped * 255.0))));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace ccassg
