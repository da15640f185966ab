#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ccassg/augment.hpp"
#include "ccassg/encoder.hpp"
#include "ccassg/linalg.hpp"

namespace ccassg {

struct SymmetricEigen {
  std::vector<double> values;  // descending
  DenseMatrix vectors;         // column i pairs with values[i]
  std::size_t sweeps = 0;
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm falls to
/// `tolerance` times the norm of the input. Throws ShapeError for non-square
/// input and NumericalError if `max_sweeps` is exhausted.
SymmetricEigen jacobi_eigen(const DenseMatrix& symmetric, double tolerance = 1e-10, std::size_t max_sweeps = 100);

struct CorrelationReport {
  DenseMatrix abs_correlation;      // |ρ|, D x D
  double mean_abs_off_diagonal = 0.0;
  std::vector<double> eigenvalues;  // of Z̃ᵀZ̃, descending, clamped at 0
  double effective_rank = 0.0;      // exp(−Σ p log p), p = λ / Σλ
  double log_det = 0.0;             // Σ log max(λ, 1e-12)
};

/// Pearson correlations of the columns of raw embeddings and the spectrum of
/// their population-normalized Gram matrix.
CorrelationReport correlation_report(const DenseMatrix& z);

/// (D/2)(ln 2π + 1) + ½ Σ ln λ_i over the population covariance of the
/// columns of z (eigenvalues clamped at 1e-12). Throws NumericalError for an
/// all-zero input.
double gaussian_entropy_proxy(const DenseMatrix& z);

struct GradcheckInstance {
  EncoderConfig encoder;
  EncoderParams params;
  AugmentedView view_a;
  AugmentedView view_b;
};

struct GradcheckOptions {
  std::size_t num_nodes = 12;
  double edge_probability = 0.3;
  double p_e = 0.3;
  double p_f = 0.2;
  bool identical_views = false;
};

/// Random small graph, features, two views and parameters. Parameters are
/// redrawn until no hidden pre-activation sits within 1e-3 of the ReLU kink.
GradcheckInstance make_gradcheck_instance(const EncoderConfig& cfg, SeededRng& rng, const GradcheckOptions& opts = {});

struct GradcheckResult {
  double max_relative_error = 0.0;
  double max_abs_analytic = 0.0;
  std::size_t entries = 0;
};

/// Central differences of the full two-view loss on every parameter entry.
/// Relative error is |a − n| / max(|a|, |n|, 1e-6).
/// `corrupt_analytic` perturbs one analytic entry, as a negative control.
GradcheckResult gradcheck(const GradcheckInstance& inst, double lambda, double h = 1e-5,
                          bool corrupt_analytic = false);

/// Convenience: build an instance from `rng` and check it.
GradcheckResult gradcheck(const EncoderConfig& cfg, double lambda, SeededRng& rng, double h = 1e-5);

struct CollapseVerdict {
  bool dimensional_collapse = false;  // effective rank < 0.1·D
  bool rising_correlation = false;    // mean |off-diag| increasing across the last 10 reports
  double effective_rank = 0.0;
  double mean_abs_off_diagonal = 0.0;
};

/// Threshold for the rising-correlation flag; below it the Gram counts as ≈ I.
inline constexpr double kRisingCorrelationFloor = 0.05;

CollapseVerdict collapse_report(std::span<const CorrelationReport> history);

void write_correlation_csv(const std::filesystem::path& path, const DenseMatrix& abs_correlation);
/// Binary 8-bit PGM, |ρ| mapped linearly onto 0..255.
void write_correlation_pgm(const std::filesystem::path& path, const DenseMatrix& abs_correlation);

}  // namespace ccassg
