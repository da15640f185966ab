#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ccassg/linalg.hpp"

namespace ccassg {

/// Which standard deviation scales the embeddings. Population (divide by N)
/// makes every column of Z̃ exactly unit norm; sample (divide by N-1)
/// replicates the library-default std of the reference pseudocode.
enum class StdMode { population, sample };

std::string to_string(StdMode mode);
StdMode parse_std_mode(const std::string& s);

/// Z̃ = (Z - μ) / (σ √N), column-wise.
struct NormalizedEmbeddings {
  DenseMatrix matrix;
  std::vector<double> mean;
  std::vector<double> stddev;
  StdMode mode = StdMode::population;
};

/// Throws DegenerateColumnError for a column with σ <= 1e-12 and
/// ShapeError when N < 2.
NormalizedEmbeddings normalize_embeddings(const DenseMatrix& z, StdMode mode = StdMode::population);

/// total = invariance_weight * invariance + lambda * (decorrelation_a + decorrelation_b).
/// invariance_weight is 1 for the full objective and 0 for the
/// decorrelation-only ablation.
struct LossBreakdown {
  double total = 0.0;
  double invariance = 0.0;
  double decorrelation_a = 0.0;
  double decorrelation_b = 0.0;
  double lambda = 0.0;
  double invariance_weight = 1.0;

  double decorrelation() const noexcept { return decorrelation_a + decorrelation_b; }
};

/// ‖Z̃_A − Z̃_B‖²_F + λ(‖Z̃_AᵀZ̃_A − I‖²_F + ‖Z̃_BᵀZ̃_B − I‖²_F).
///
/// Evaluated through D x D Gram matrices and the cross trace
/// trace(Z̃_AᵀZ̃_B); no N x N quantity is ever formed.
LossBreakdown cca_loss(const NormalizedEmbeddings& za, const NormalizedEmbeddings& zb, double lambda,
                       double invariance_weight = 1.0);

/// −trace(Z̃_AᵀZ̃_B) + λ′(‖Z̃_AᵀZ̃_A − I‖² + ‖Z̃_BᵀZ̃_B − I‖²).
double trace_form_loss(const NormalizedEmbeddings& za, const NormalizedEmbeddings& zb, double lambda_prime);

/// |L(λ) − (2·L_trace(λ/2) + 2D)|. Zero up to rounding for population-mode inputs.
double loss_equivalence_check(const NormalizedEmbeddings& za, const NormalizedEmbeddings& zb, double lambda);

struct LossGradient {
  LossBreakdown loss;
  DenseMatrix grad_a;  // dL/dZ_A (raw, pre-normalization)
  DenseMatrix grad_b;
};

/// Loss and its gradient with respect to the raw embeddings, differentiating
/// through centering and the data-dependent standard deviation.
LossGradient cca_loss_grad(const NormalizedEmbeddings& za, const NormalizedEmbeddings& zb, double lambda,
                           double invariance_weight = 1.0);

/// Monte-Carlo comparison of the mean two-view invariance loss with
/// 2N · Σ_k V̂[z̃_k], where V̂ averages the per-node variance across views.
struct VarianceFormResult {
  double pairwise_invariance = 0.0;  // mean over disjoint view pairs
  double variance_form = 0.0;        // 2N · Σ_k mean_i Var_views(z̃_ik)
  double relative_residual = 0.0;
  std::size_t pairs = 0;
};

/// `view_embeddings` are raw embeddings of independently sampled views under
/// fixed parameters; consecutive entries form pairs. Needs at least two.
VarianceFormResult variance_form_check(std::span<const DenseMatrix> view_embeddings,
                                       StdMode mode = StdMode::population);

/// Z̃ᵀZ̃ (D x D).
DenseMatrix gram(const NormalizedEmbeddings& z);

}  // namespace ccassg
