#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ccassg/augment.hpp"
#include "ccassg/encoder.hpp"
#include "ccassg/graph.hpp"
#include "ccassg/objective.hpp"

namespace ccassg {

/// Which loss terms drive pretraining. `no_decorrelation` is the λ = 0
/// ablation; `no_invariance` keeps only the decorrelation term.
enum class LossVariant { full, no_decorrelation, no_invariance };

std::string to_string(LossVariant v);
LossVariant parse_loss_variant(const std::string& s);

struct TrainConfig {
  std::size_t steps = 50;
  EncoderKind encoder = EncoderKind::gcn;
  std::vector<std::size_t> hidden{512, 512};  // widths after the input layer; last is D
  bool bias = false;
  double lambda = 2e-3;  // weight of the decorrelation term in the ‖Z̃_A − Z̃_B‖² form
  double lr = 1e-3;
  double weight_decay = 0.0;
  double p_e = 0.4;
  double p_f = 0.1;
  std::uint64_t seed = 0;
  StdMode std_mode = StdMode::population;
  bool row_normalize_features = true;
  LossVariant variant = LossVariant::full;

  EncoderConfig encoder_config(std::size_t num_features) const;
  double effective_lambda() const noexcept { return variant == LossVariant::no_decorrelation ? 0.0 : lambda; }
  double invariance_weight() const noexcept { return variant == LossVariant::no_invariance ? 0.0 : 1.0; }
  /// Throws ConfigError naming the offending key.
  void validate() const;
};

struct ProbeConfig {
  double lr = 1e-2;
  double weight_decay = 1e-4;
  std::size_t epochs = 300;
  std::string split = "public";  // a named split of the dataset, or "random" (10/10/80 per seed)

  void validate() const;
};

/// Loss and raw-embedding gradients for one pair of views, with the parameter
/// gradient summed over both branches of the shared encoder.
struct TwoViewStep {
  LossBreakdown loss;
  EncoderParams grads;
  DenseMatrix gram_a;  // Z̃_AᵀZ̃_A, for decorrelation tracking
};

TwoViewStep two_view_step(const EncoderParams& params, const EncoderConfig& cfg, const AugmentedView& view_a,
                          const AugmentedView& view_b, double lambda, double invariance_weight = 1.0,
                          StdMode mode = StdMode::population);

/// Features as the encoder sees them (row-normalized when configured).
DenseMatrix prepare_features(const GraphDataset& g, bool row_normalize);

struct PretrainResult {
  EncoderConfig encoder;
  EncoderParams params;
  std::vector<LossBreakdown> history;           // one entry per step
  std::vector<double> mean_abs_correlation;     // mean |off-diagonal| of view A's Gram, per step
};

/// Called after each step with the 1-based step index.
using StepObserver = std::function<void(std::size_t step, const LossBreakdown&, const EncoderParams&)>;

/// Full-graph pretraining. Never reads labels or splits. Throws
/// NumericalError naming the step when the loss becomes non-finite.
PretrainResult pretrain(const GraphDataset& g, const TrainConfig& cfg, const StepObserver& observer = {});

/// Raw embeddings of the unaugmented graph.
DenseMatrix infer_embeddings(const GraphDataset& g, const EncoderConfig& cfg, const EncoderParams& params,
                             bool row_normalize);

struct ProbeResult {
  DenseMatrix weights;  // D x C
  DenseMatrix bias;     // 1 x C
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t best_epoch = 0;  // 1-based epoch whose parameters were kept
};

/// Softmax regression on the train nodes, trained with Adam. Keeps the
/// parameters from the epoch with the best validation accuracy (earliest on
/// ties).
ProbeResult fit_probe(const DenseMatrix& embeddings, const std::vector<int>& labels, std::size_t num_classes,
                      const Split& split, const ProbeConfig& cfg, SeededRng& rng);

struct RunManifest {
  TrainConfig train;
  ProbeConfig probe;
  std::string dataset_name;
  std::uint64_t dataset_hash = 0;
  std::string code_version;
  std::size_t n_seeds = 1;

  /// Deterministic JSON (fixed key order, no timestamps).
  std::string to_json() const;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<LossBreakdown> history;
};

struct EvalResult {
  std::vector<SeedOutcome> seeds;
  double mean_test_accuracy = 0.0;
  double std_test_accuracy = 0.0;  // population std over seeds
  RunManifest manifest;
  PretrainResult last_pretrain;  // of the final seed, for checkpointing

  std::string to_json() const;
};

/// Runs pretrain + probe for seeds cfg.seed, cfg.seed+1, ... .
EvalResult evaluate(const GraphDataset& g, const TrainConfig& train_cfg, const ProbeConfig& probe_cfg,
                    std::size_t n_seeds, const std::function<void(const SeedOutcome&)>& on_seed = {});

/// The split a probe run uses; "random" draws a 10/10/80 split from `rng`.
Split resolve_split(const GraphDataset& g, const std::string& name, SeededRng& rng);

/// step,inv_loss,dec_loss,total
void write_metrics_csv(const std::filesystem::path& path, const std::vector<LossBreakdown>& history);

std::string code_version();

}  // namespace ccassg
