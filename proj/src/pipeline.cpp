#include "ccassg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "ccassg/error.hpp"
#include "ccassg/optim.hpp"
#include "json.hpp"

#ifndef CCASSG_VERSION
#define CCASSG_VERSION "unknown"
#endif

namespace ccassg {

namespace {

// Sub-stream ids under the run seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kAugmentStream = 2;
constexpr std::uint64_t kProbeStream = 3;
constexpr std::uint64_t kSplitStream = 4;

void accumulate(EncoderParams& into, const EncoderParams& g) {
  for (std::size_t k = 0; k < into.weights.size(); ++k) axpy(1.0, g.weights[k], into.weights[k]);
  for (std::size_t k = 0; k < into.biases.size(); ++k) axpy(1.0, g.biases[k], into.biases[k]);
}

std::vector<DenseMatrix*> parameter_list(EncoderParams& p) {
  std::vector<DenseMatrix*> out;
  for (auto& w : p.weights) out.push_back(&w);
  for (auto& b : p.biases) out.push_back(&b);
  return out;
}

std::vector<const DenseMatrix*> parameter_list(const EncoderParams& p) {
  std::vector<const DenseMatrix*> out;
  for (const auto& w : p.weights) out.push_back(&w);
  for (const auto& b : p.biases) out.push_back(&b);
  return out;
}

double mean_abs_off_diagonal(const DenseMatrix& g) {
  const std::size_t d = g.rows();
  if (d < 2) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (i != j) s += std::abs(g(i, j));
  return s / static_cast<double>(d * (d - 1));
}

std::size_t argmax_row(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

double accuracy(const DenseMatrix& embeddings, const std::vector<int>& labels, const std::vector<std::size_t>& nodes,
                const DenseMatrix& w, const DenseMatrix& b) {
  if (nodes.empty()) return 0.0;
  std::vector<double> logits(w.cols());
  std::size_t correct = 0;
  for (std::size_t node : nodes) {
    const auto x = embeddings.row(node);
    for (std::size_t c = 0; c < w.cols(); ++c) {
      double s = b(0, c);
      for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * w(k, c);
      logits[c] = s;
    }
    correct += argmax_row(logits) == static_cast<std::size_t>(labels[node]);
  }
  return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

DenseMatrix gather_rows(const DenseMatrix& m, const std::vector<std::size_t>& rows) {
  DenseMatrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(m.row(rows[i]).data(), m.cols(), out.row(i).data());
  return out;
}

nlohmann::ordered_json train_json(const TrainConfig& c) {
  return {{"steps", c.steps},
          {"encoder", to_string(c.encoder)},
          {"hidden", c.hidden},
          {"bias", c.bias},
          {"lambda", c.lambda},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"p_e", c.p_e},
          {"p_f", c.p_f},
          {"seed", c.seed},
          {"std_mode", to_string(c.std_mode)},
          {"row_normalize_features", c.row_normalize_features},
          {"variant", to_string(c.variant)}};
}

nlohmann::ordered_json probe_json(const ProbeConfig& c) {
  return {{"lr", c.lr}, {"weight_decay", c.weight_decay}, {"epochs", c.epochs}, {"split", c.split}};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::full:
      return "full";
    case LossVariant::no_decorrelation:
      return "no-dec";
    case LossVariant::no_invariance:
      return "no-inv";
  }
  return "full";
}

LossVariant parse_loss_variant(const std::string& s) {
  if (s == "full") return LossVariant::full;
  if (s == "no-dec") return LossVariant::no_decorrelation;
  if (s == "no-inv") return LossVariant::no_invariance;
  throw ConfigError("variant", "expected 'full', 'no-dec' or 'no-inv', got '" + s + "'");
}

EncoderConfig TrainConfig::encoder_config(std::size_t num_features) const {
  EncoderConfig cfg;
  cfg.kind = encoder;
  cfg.bias = bias;
  cfg.widths.push_back(num_features);
  cfg.widths.insert(cfg.widths.end(), hidden.begin(), hidden.end());
  return cfg;
}

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("steps", "must be >= 1");
  if (hidden.empty()) throw ConfigError("hidden", "need at least one layer width");
  for (std::size_t w : hidden)
    if (w == 0) throw ConfigError("hidden", "layer widths must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda", "must be a finite non-negative number");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr", "must be a finite non-negative number");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay", "must be non-negative");
  AugmentConfig{p_e, p_f}.validate();
}

void ProbeConfig::validate() const {
  if (epochs < 1) throw ConfigError("probe.epochs", "must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("probe.lr", "must be non-negative");
  if (!(weight_decay >= 0.0)) throw ConfigError("probe.weight_decay", "must be non-negative");
  if (split.empty()) throw ConfigError("probe.split", "must name a split");
}

TwoViewStep two_view_step(const EncoderParams& params, const EncoderConfig& cfg, const AugmentedView& view_a,
                          const AugmentedView& view_b, double lambda, double invariance_weight, StdMode mode) {
  const ForwardResult fa = forward(params, cfg, view_a);
  const ForwardResult fb = forward(params, cfg, view_b);
  const NormalizedEmbeddings na = normalize_embeddings(fa.embeddings, mode);
  const NormalizedEmbeddings nb = normalize_embeddings(fb.embeddings, mode);
  LossGradient lg = cca_loss_grad(na, nb, lambda, invariance_weight);
  TwoViewStep out;
  out.loss = lg.loss;
  out.grads = backward(params, cfg, fa.tape, lg.grad_a);
  accumulate(out.grads, backward(params, cfg, fb.tape, lg.grad_b));
  out.gram_a = gram(na);
  return out;
}

DenseMatrix prepare_features(const GraphDataset& g, bool row_normalize) {
  DenseMatrix x = g.features;
  if (row_normalize) ccassg::row_normalize(x);
  return x;
}

PretrainResult pretrain(const GraphDataset& g, const TrainConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  const DenseMatrix features = prepare_features(g, cfg.row_normalize_features);
  const AugmentConfig aug{cfg.p_e, cfg.p_f};
  const SeededRng master(cfg.seed);
  SeededRng init_rng = master.fork(kInitStream);
  SeededRng aug_rng = master.fork(kAugmentStream);

  PretrainResult result;
  result.encoder = cfg.encoder_config(g.num_features);
  result.params = glorot_init(result.encoder, init_rng);
  result.history.reserve(cfg.steps);
  AdamState adam({.lr = cfg.lr, .weight_decay = cfg.weight_decay});

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const AugmentedView view_a = sample_view(g, features, aug, aug_rng);
    const AugmentedView view_b = sample_view(g, features, aug, aug_rng);
    TwoViewStep s;
    try {
      s = two_view_step(result.params, result.encoder, view_a, view_b, cfg.effective_lambda(), cfg.invariance_weight(),
                        cfg.std_mode);
    } catch (const NumericalError& e) {
      throw NumericalError("pretrain step " + std::to_string(step) + ": " + e.what());
    }
    if (!std::isfinite(s.loss.total))
      throw NumericalError("pretrain step " + std::to_string(step) + ": non-finite loss");
    const auto params = parameter_list(result.params);
    const auto grads = parameter_list(std::as_const(s.grads));
    adam_step(adam, params, grads);
    result.history.push_back(s.loss);
    result.mean_abs_correlation.push_back(mean_abs_off_diagonal(s.gram_a));
    if (observer) observer(step, s.loss, result.params);
  }
  return result;
}

DenseMatrix infer_embeddings(const GraphDataset& g, const EncoderConfig& cfg, const EncoderParams& params,
                             bool row_normalize) {
  if (cfg.input_dim() != g.num_features)
    throw ShapeError("infer_embeddings: encoder expects " + std::to_string(cfg.input_dim()) + " features, dataset has " +
                     std::to_string(g.num_features));
  return encode(params, cfg, identity_view(g, prepare_features(g, row_normalize)));
}

ProbeResult fit_probe(const DenseMatrix& embeddings, const std::vector<int>& labels, std::size_t num_classes,
                      const Split& split, const ProbeConfig& cfg, SeededRng& rng) {
  cfg.validate();
  if (split.train.empty() || split.val.empty() || split.test.empty())
    throw ConfigError("probe.split", "train, val and test parts must all be non-empty");
  if (labels.size() != embeddings.rows()) throw ShapeError("fit_probe: label count != embedding rows");
  if (num_classes < 2) throw ConfigError("num_classes", "need at least two classes");

  const std::size_t d = embeddings.cols();
  const std::size_t c = num_classes;
  const DenseMatrix x = gather_rows(embeddings, split.train);
  const std::size_t n = split.train.size();

  DenseMatrix w(d, c), b(1, c);
  const double bound = std::sqrt(6.0 / static_cast<double>(d + c));
  for (double& v : w.values()) v = rng.uniform(-bound, bound);

  AdamState adam({.lr = cfg.lr, .weight_decay = cfg.weight_decay});
  ProbeResult best;
  best.val_accuracy = -1.0;
  DenseMatrix grad_w(d, c), grad_b(1, c);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Softmax cross-entropy, mean over train nodes.
    DenseMatrix logits = dense_matmul(x, w);
    grad_b.fill(0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = logits.row(i);
      double mx = -INFINITY;
      for (std::size_t k = 0; k < c; ++k) {
        row[k] += b(0, k);
        mx = std::max(mx, row[k]);
      }
      double z = 0.0;
      for (double& v : row) {
        v = std::exp(v - mx);
        z += v;
      }
      const auto y = static_cast<std::size_t>(labels[split.train[i]]);
      for (std::size_t k = 0; k < c; ++k) {
        row[k] = (row[k] / z - (k == y ? 1.0 : 0.0)) / static_cast<double>(n);
        grad_b(0, k) += row[k];
      }
    }
    grad_w = dense_matmul_tn(x, logits);
    const DenseMatrix* grads[] = {&grad_w, &grad_b};
    DenseMatrix* params[] = {&w, &b};
    adam_step(adam, params, grads);

    const double val = accuracy(embeddings, labels, split.val, w, b);
    if (val > best.val_accuracy) {
      best.val_accuracy = val;
      best.weights = w;
      best.bias = b;
      best.best_epoch = epoch;
    }
  }
  best.train_accuracy = accuracy(embeddings, labels, split.train, best.weights, best.bias);
  best.test_accuracy = accuracy(embeddings, labels, split.test, best.weights, best.bias);
  return best;
}

Split resolve_split(const GraphDataset& g, const std::string& name, SeededRng& rng) {
  if (name == "random") return make_random_split(g, {}, rng);
  const auto it = g.splits.find(name);
  if (it == g.splits.end()) throw ConfigError("probe.split", "dataset '" + g.name + "' has no split named '" + name + "'");
  return it->second;
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["code_version"] = code_version;
  j["dataset"] = {{"name", dataset_name}, {"hash", hex64(dataset_hash)}};
  j["train"] = train_json(train);
  j["probe"] = probe_json(probe);
  j["n_seeds"] = n_seeds;
  j["decisions"] = {
      {"rng", "xoshiro256** seeded via splitmix64, v" + std::to_string(SeededRng::algorithm_version)},
      {"init", "glorot_uniform"},
      {"activation", "relu (hidden layers), identity (output)"},
      {"std_mode", to_string(train.std_mode)},
      {"lambda_form", "weight of the decorrelation term next to ||Za-Zb||_F^2"},
      {"edge_dropping", "undirected pairs"},
      {"feature_masking", train.row_normalize_features ? "columns, after row normalization" : "columns"},
      {"probe", "softmax regression, adam, best validation epoch"},
      {"seed_std", "population"}};
  return j.dump(2);
}

std::string EvalResult::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json per_seed = nlohmann::ordered_json::array();
  for (const auto& s : seeds) {
    per_seed.push_back({{"seed", s.seed},
                        {"train_accuracy", s.train_accuracy},
                        {"val_accuracy", s.val_accuracy},
                        {"test_accuracy", s.test_accuracy},
                        {"final_loss", s.history.empty() ? 0.0 : s.history.back().total}});
  }
  j["accuracy"] = {{"mean", mean_test_accuracy}, {"std", std_test_accuracy}, {"per_seed", per_seed}};
  j["manifest"] = nlohmann::ordered_json::parse(manifest.to_json());
  return j.dump(2) + "\n";
}

EvalResult evaluate(const GraphDataset& g, const TrainConfig& train_cfg, const ProbeConfig& probe_cfg,
                    std::size_t n_seeds, const std::function<void(const SeedOutcome&)>& on_seed) {
  if (n_seeds < 1) throw ConfigError("seeds", "must be >= 1");
  train_cfg.validate();
  probe_cfg.validate();

  EvalResult result;
  result.manifest = {train_cfg, probe_cfg, g.name, dataset_hash(g), code_version(), n_seeds};
  for (std::size_t i = 0; i < n_seeds; ++i) {
    TrainConfig cfg = train_cfg;
    cfg.seed = train_cfg.seed + i;
    PretrainResult pre = pretrain(g, cfg, {});
    const DenseMatrix z = infer_embeddings(g, pre.encoder, pre.params, cfg.row_normalize_features);

    const SeededRng master(cfg.seed);
    SeededRng split_rng = master.fork(kSplitStream);
    SeededRng probe_rng = master.fork(kProbeStream);
    const Split split = resolve_split(g, probe_cfg.split, split_rng);
    const ProbeResult probe = fit_probe(z, g.labels(), g.num_classes, split, probe_cfg, probe_rng);

    SeedOutcome outcome{cfg.seed, probe.train_accuracy, probe.val_accuracy, probe.test_accuracy, pre.history};
    if (on_seed) on_seed(outcome);
    result.seeds.push_back(std::move(outcome));
    result.last_pretrain = std::move(pre);
  }
  double sum = 0.0;
  for (const auto& s : result.seeds) sum += s.test_accuracy;
  result.mean_test_accuracy = sum / static_cast<double>(n_seeds);
  double ss = 0.0;
  for (const auto& s : result.seeds) ss += (s.test_accuracy - result.mean_test_accuracy) * (s.test_accuracy - result.mean_test_accuracy);
  result.std_test_accuracy = std::sqrt(ss / static_cast<double>(n_seeds));
  return result;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<LossBreakdown>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "step,inv_loss,dec_loss,total\n";
  char buf[128];
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& h = history[i];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", i + 1, h.invariance, h.decorrelation(), h.total);
    out << buf;
  }
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::string code_version() { return CCASSG_VERSION; }

}  // namespace ccassg
