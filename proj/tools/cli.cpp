#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "ccassg/config.hpp"
#include "ccassg/convert.hpp"
#include "ccassg/diagnostics.hpp"
#include "ccassg/error.hpp"
#include "ccassg/pipeline.hpp"
#include "ccassg/synth.hpp"
#include "json.hpp"

namespace ccassg::cli {

namespace fs = std::filesystem;

namespace {

// Command-line values that take precedence over the config file.
struct Overrides {
  std::string dataset;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<std::size_t> dim;
  std::optional<double> p_e;
  std::optional<double> p_f;
  std::optional<std::string> std_mode;
  std::optional<std::size_t> steps;
  std::optional<std::string> variant;
  std::optional<std::size_t> seeds;
  std::optional<std::string> split;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--dataset", o.dataset, "Dataset directory (overrides the config)");
  cmd->add_option("--seed", o.seed, "Base seed");
  cmd->add_option("--lambda", o.lambda, "Decorrelation weight");
  cmd->add_option("--dim", o.dim, "Embedding width (last encoder layer)");
  cmd->add_option("--pe", o.p_e, "Edge-drop ratio");
  cmd->add_option("--pf", o.p_f, "Feature-mask ratio");
  cmd->add_option("--std-mode", o.std_mode, "population | sample");
  cmd->add_option("--steps", o.steps, "Pretraining steps");
  cmd->add_option("--variant", o.variant, "full | no-dec | no-inv");
  cmd->add_option("--split", o.split, "Probe split name, or 'random'");
}

RunConfig resolve_config(const std::string& path, const Overrides& o) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_run_config(path);
  if (!o.dataset.empty()) cfg.dataset = o.dataset;
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.lambda) cfg.train.lambda = *o.lambda;
  if (o.dim) {
    if (cfg.train.hidden.empty()) cfg.train.hidden.push_back(*o.dim);
    cfg.train.hidden.back() = *o.dim;
  }
  if (o.p_e) cfg.train.p_e = *o.p_e;
  if (o.p_f) cfg.train.p_f = *o.p_f;
  if (o.std_mode) cfg.train.std_mode = parse_std_mode(*o.std_mode);
  if (o.steps) cfg.train.steps = *o.steps;
  if (o.variant) cfg.train.variant = parse_loss_variant(*o.variant);
  if (o.seeds) cfg.seeds = *o.seeds;
  if (o.split) cfg.probe.split = *o.split;
  if (cfg.dataset.empty()) throw ConfigError("dataset", "no dataset given (config key or --dataset)");
  cfg.train.validate();
  cfg.probe.validate();
  if (cfg.seeds < 1) throw ConfigError("seeds", "must be >= 1");
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

void save_run_checkpoint(const fs::path& path, const PretrainResult& pre, const RunManifest& manifest) {
  save_checkpoint(path, {pre.encoder, pre.params, manifest.to_json()});
}

int cmd_convert(const std::string& format, const std::string& input, const std::string& output, std::string name,
                std::ostream& out) {
  const SourceFormat f = parse_source_format(format);
  if (name.empty()) name = fs::path(output).filename().string();
  // Import fully before touching the output directory.
  const GraphDataset g = import_dataset(f, input, name);
  save_dataset(g, output);
  out << dataset_statistics(g) << "\n";
  if (g.ingest.dangling_edges_dropped || g.ingest.self_loops_dropped || g.ingest.duplicate_edges_dropped)
    out << "dropped: dangling=" << g.ingest.dangling_edges_dropped << " self_loops=" << g.ingest.self_loops_dropped
        << " duplicates=" << g.ingest.duplicate_edges_dropped << "\n";
  return kExitOk;
}

int cmd_synth(const SynthConfig& sc, const std::string& output, std::ostream& out) {
  const GraphDataset g = make_synthetic_graph(sc);
  save_dataset(g, output);
  out << dataset_statistics(g) << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, const fs::path& out_dir, std::ostream& out) {
  const GraphDataset g = load_dataset(cfg.dataset);
  ensure_dir(out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  const PretrainResult pre = pretrain(g, cfg.train);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const RunManifest manifest{cfg.train, cfg.probe, g.name, dataset_hash(g), code_version(), 1};
  save_run_checkpoint(out_dir / "checkpoint.bin", pre, manifest);
  write_metrics_csv(out_dir / "metrics.csv", pre.history);
  write_text(out_dir / "manifest.json", manifest.to_json() + "\n");
  write_text(out_dir / "timing.json", nlohmann::ordered_json{{"pretrain_seconds", secs}}.dump(2) + "\n");
  out << "steps=" << pre.history.size() << " final_loss=" << fmt("%.6g", pre.history.back().total) << "\n";
  return kExitOk;
}

EvalResult run_eval(const RunConfig& cfg, const GraphDataset& g, std::ostream& out, std::vector<double>& seconds) {
  auto t0 = std::chrono::steady_clock::now();
  return evaluate(g, cfg.train, cfg.probe, cfg.seeds, [&](const SeedOutcome& s) {
    const auto now = std::chrono::steady_clock::now();
    seconds.push_back(std::chrono::duration<double>(now - t0).count());
    t0 = now;
    out << "seed=" << s.seed << " test_acc=" << fmt("%.4f", s.test_accuracy) << " val_acc=" << fmt("%.4f", s.val_accuracy)
        << "\n"
        << std::flush;
  });
}

int cmd_eval(const RunConfig& cfg, const fs::path& out_dir, std::ostream& out) {
  const GraphDataset g = load_dataset(cfg.dataset);
  ensure_dir(out_dir);
  std::vector<double> seconds;
  const EvalResult r = run_eval(cfg, g, out, seconds);
  save_run_checkpoint(out_dir / "checkpoint.bin", r.last_pretrain, r.manifest);
  write_metrics_csv(out_dir / "metrics.csv", r.seeds.back().history);
  write_text(out_dir / "result.json", r.to_json());
  write_text(out_dir / "manifest.json", r.manifest.to_json() + "\n");
  double total = 0.0;
  for (double s : seconds) total += s;
  write_text(out_dir / "timing.json",
             nlohmann::ordered_json{{"per_seed_seconds", seconds}, {"total_seconds", total}}.dump(2) + "\n");
  out << "mean=" << fmt("%.4f", r.mean_test_accuracy) << " std=" << fmt("%.4f", r.std_test_accuracy)
      << " seeds=" << r.seeds.size() << "\n";
  return kExitOk;
}

int cmd_sweep(RunConfig cfg, const std::string& axis, const std::vector<double>& values, const fs::path& out_dir,
              std::ostream& out) {
  if (axis != "lambda" && axis != "dim") throw ConfigError("axis", "expected 'lambda' or 'dim', got '" + axis + "'");
  if (values.size() < 2) throw ConfigError("values", "a sweep needs at least two values");
  const GraphDataset g = load_dataset(cfg.dataset);
  ensure_dir(out_dir);
  std::ostringstream csv;
  csv << axis << ",mean_test_accuracy,std_test_accuracy,seeds\n";
  for (double v : values) {
    RunConfig c = cfg;
    if (axis == "lambda") {
      c.train.lambda = v;
    } else {
      if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v)))
        throw ConfigError("values", "dim values must be positive integers");
      c.train.hidden.back() = static_cast<std::size_t>(v);
    }
    c.train.validate();
    out << axis << "=" << fmt("%g", v) << "\n";
    std::vector<double> seconds;
    const EvalResult r = run_eval(c, g, out, seconds);
    csv << fmt("%.17g", v) << "," << fmt("%.17g", r.mean_test_accuracy) << "," << fmt("%.17g", r.std_test_accuracy) << ","
        << r.seeds.size() << "\n";
  }
  write_text(out_dir / "sweep.csv", csv.str());
  out << "wrote " << (out_dir / "sweep.csv").string() << "\n";
  return kExitOk;
}

int cmd_diagnose(const std::string& checkpoint, const std::string& dataset, const fs::path& out_dir, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const GraphDataset g = load_dataset(dataset);
  bool row_norm = true;
  try {
    const auto meta = nlohmann::json::parse(ckpt.metadata_json);
    if (meta.contains("train")) row_norm = meta["train"].value("row_normalize_features", true);
  } catch (const nlohmann::json::exception&) {
  }
  const DenseMatrix z = infer_embeddings(g, ckpt.config, ckpt.params, row_norm);
  const CorrelationReport report = correlation_report(z);
  const CorrelationReport single[] = {report};
  const CollapseVerdict verdict = collapse_report(single);
  ensure_dir(out_dir);
  write_correlation_csv(out_dir / "correlation.csv", report.abs_correlation);
  write_correlation_pgm(out_dir / "correlation.pgm", report.abs_correlation);
  nlohmann::ordered_json j{{"mean_abs_off_diagonal", report.mean_abs_off_diagonal},
                           {"effective_rank", report.effective_rank},
                           {"log_det", report.log_det},
                           {"gaussian_entropy_proxy", gaussian_entropy_proxy(z)},
                           {"eigenvalues", report.eigenvalues},
                           {"dimensional_collapse", verdict.dimensional_collapse},
                           {"rising_correlation", verdict.rising_correlation}};
  write_text(out_dir / "diagnose.json", j.dump(2) + "\n");
  out << "mean_abs_offdiag=" << fmt("%.6f", report.mean_abs_off_diagonal)
      << " effective_rank=" << fmt("%.3f", report.effective_rank) << " of " << report.eigenvalues.size()
      << " verdict=" << (verdict.dimensional_collapse ? "dimensional-collapse" : "ok") << "\n";
  return kExitOk;
}

struct GradcheckArgs {
  std::size_t nodes = 12;
  std::size_t features = 7;
  std::size_t hidden = 6;
  std::size_t dim = 5;
  std::size_t layers = 2;
  double lambda = 1e-3;
  double h = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
  std::string encoder = "gcn";
  bool corrupt = false;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  if (a.layers < 1) throw ConfigError("layers", "must be >= 1");
  EncoderConfig cfg;
  cfg.kind = parse_encoder_kind(a.encoder);
  cfg.widths.push_back(a.features);
  for (std::size_t k = 1; k < a.layers; ++k) cfg.widths.push_back(a.hidden);
  cfg.widths.push_back(a.dim);
  SeededRng rng(a.seed);
  GradcheckOptions opts;
  opts.num_nodes = a.nodes;
  const GradcheckInstance inst = make_gradcheck_instance(cfg, rng, opts);
  const auto t0 = std::chrono::steady_clock::now();
  const GradcheckResult r = gradcheck(inst, a.lambda, a.h, a.corrupt);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = r.max_relative_error <= a.tolerance;
  out << (pass ? "PASS" : "FAIL") << " max_rel_err=" << fmt("%.3e", r.max_relative_error) << " entries=" << r.entries
      << " seconds=" << fmt("%.3f", secs) << "\n";
  return pass ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-supervised graph embeddings with a canonical-correlation objective"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "run";
  Overrides ov;

  auto* convert = app.add_subcommand("convert", "Import a raw citation dump into a dataset directory");
  std::string c_format, c_input, c_output, c_name;
  convert->add_option("--format", c_format, "linqs | pubmed")->required();
  convert->add_option("--input", c_input, "Directory holding the raw files")->required();
  convert->add_option("--output", c_output, "Dataset directory to write")->required();
  convert->add_option("--name", c_name, "Dataset name (default: output directory name)");

  auto* synth = app.add_subcommand("synth", "Write a synthetic planted-partition dataset");
  SynthConfig sc;
  std::string s_output;
  synth->add_option("--output", s_output, "Dataset directory to write")->required();
  synth->add_option("--nodes", sc.num_nodes);
  synth->add_option("--classes", sc.num_classes);
  synth->add_option("--features", sc.num_features);
  synth->add_option("--degree", sc.mean_degree, "Mean degree");
  synth->add_option("--homophily", sc.homophily);
  synth->add_option("--words", sc.words_per_node, "Words per node");
  synth->add_option("--topic-fraction", sc.topic_fraction);
  synth->add_option("--seed", sc.seed);

  auto* train = app.add_subcommand("train", "Pretrain one encoder");
  train->add_option("config", config_path, "Run config file");
  train->add_option("--out", out_dir, "Output directory");
  add_override_flags(train, ov);

  auto* eval = app.add_subcommand("eval", "Pretrain and probe over several seeds");
  eval->add_option("config", config_path, "Run config file");
  eval->add_option("--out", out_dir, "Output directory");
  eval->add_option("--seeds", ov.seeds, "Number of seeds");
  add_override_flags(eval, ov);

  auto* sweep = app.add_subcommand("sweep", "Evaluate across values of lambda or the embedding width");
  std::string axis;
  std::vector<double> values;
  sweep->add_option("config", config_path, "Run config file");
  sweep->add_option("--axis", axis, "lambda | dim")->required();
  sweep->add_option("--values", values, "Comma-separated values")->delimiter(',')->required();
  sweep->add_option("--out", out_dir, "Output directory");
  sweep->add_option("--seeds", ov.seeds, "Seeds per value");
  add_override_flags(sweep, ov);

  auto* diagnose = app.add_subcommand("diagnose", "Correlation report for a checkpoint's embeddings");
  std::string d_ckpt, d_dataset;
  diagnose->add_option("--checkpoint", d_ckpt)->required();
  diagnose->add_option("--dataset", d_dataset)->required();
  diagnose->add_option("--out", out_dir, "Output directory");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the analytic gradients");
  GradcheckArgs ga;
  grad->add_option("--nodes", ga.nodes);
  grad->add_option("--features", ga.features);
  grad->add_option("--hidden", ga.hidden, "Hidden width");
  grad->add_option("--dim", ga.dim, "Output width");
  grad->add_option("--layers", ga.layers);
  grad->add_option("--lambda", ga.lambda);
  grad->add_option("--step", ga.h, "Finite-difference step");
  grad->add_option("--tolerance", ga.tolerance);
  grad->add_option("--seed", ga.seed);
  grad->add_option("--encoder", ga.encoder, "gcn | mlp");
  grad->add_flag("--corrupt", ga.corrupt, "Perturb one analytic entry (negative control)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*convert) return cmd_convert(c_format, c_input, c_output, c_name, out);
    if (*synth) return cmd_synth(sc, s_output, out);
    if (*train) return cmd_train(resolve_config(config_path, ov), out_dir, out);
    if (*eval) return cmd_eval(resolve_config(config_path, ov), out_dir, out);
    if (*sweep) return cmd_sweep(resolve_config(config_path, ov), axis, values, out_dir, out);
    if (*diagnose) return cmd_diagnose(d_ckpt, d_dataset, out_dir, out);
    if (*grad) return cmd_gradcheck(ga, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ShapeError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitIo;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitConfig;
}

}  // namespace ccassg::cli
