#include "ccassg/encoder.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include "json.hpp"

#include "ccassg/error.hpp"

namespace ccassg {

namespace {

constexpr char kMagic[8] = {'C', 'C', 'A', 'S', 'S', 'G', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

// First-layer inputs at or below this density take the sparse path.
constexpr double kSparseInputDensity = 0.25;

std::size_t count_nonzero(const DenseMatrix& m) {
  std::size_t n = 0;
  for (double v : m.values()) n += (v != 0.0);
  return n;
}

void add_bias(DenseMatrix& m, const DenseMatrix& bias) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias(0, c);
  }
}

DenseMatrix relu(const DenseMatrix& m) {
  DenseMatrix out = m;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

void check_shapes(const EncoderParams& params, const EncoderConfig& cfg) {
  cfg.validate();
  if (params.weights.size() != cfg.depth()) throw ShapeError("encoder: parameter depth does not match config");
  for (std::size_t k = 0; k < cfg.depth(); ++k) {
    const auto& w = params.weights[k];
    if (w.rows() != cfg.widths[k] || w.cols() != cfg.widths[k + 1])
      throw ShapeError("encoder: weight " + std::to_string(k) + " shape does not match config");
  }
  if (cfg.bias != !params.biases.empty() || (cfg.bias && params.biases.size() != cfg.depth()))
    throw ShapeError("encoder: bias blocks do not match config");
}

// Little-endian byte I/O.
void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}
void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}
std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw IoError("checkpoint: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("checkpoint: truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}
void put_block(std::ostream& out, const DenseMatrix& m) {
  for (double v : m.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
}
void get_block(std::istream& in, DenseMatrix& m) {
  for (double& v : m.values()) v = std::bit_cast<double>(get_u64(in));
}

}  // namespace

std::string to_string(EncoderKind kind) { return kind == EncoderKind::gcn ? "gcn" : "mlp"; }

EncoderKind parse_encoder_kind(const std::string& s) {
  if (s == "gcn") return EncoderKind::gcn;
  if (s == "mlp") return EncoderKind::mlp;
  throw ConfigError("encoder", "expected 'gcn' or 'mlp', got '" + s + "'");
}

void EncoderConfig::validate() const {
  if (widths.size() < 2) throw ConfigError("widths", "need at least one layer (input and output width)");
  for (std::size_t w : widths)
    if (w == 0) throw ConfigError("widths", "layer widths must be positive");
}

EncoderParams EncoderParams::zeros_like(const EncoderConfig& cfg) {
  cfg.validate();
  EncoderParams p;
  for (std::size_t k = 0; k < cfg.depth(); ++k) {
    p.weights.emplace_back(cfg.widths[k], cfg.widths[k + 1]);
    if (cfg.bias) p.biases.emplace_back(1, cfg.widths[k + 1]);
  }
  return p;
}

std::size_t EncoderParams::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

EncoderParams glorot_init(const EncoderConfig& cfg, SeededRng& rng) {
  EncoderParams p = EncoderParams::zeros_like(cfg);
  for (std::size_t k = 0; k < cfg.depth(); ++k) {
    const double bound = std::sqrt(6.0 / static_cast<double>(cfg.widths[k] + cfg.widths[k + 1]));
    for (double& v : p.weights[k].values()) v = rng.uniform(-bound, bound);
  }
  return p;
}

ForwardResult forward(const EncoderParams& params, const EncoderConfig& cfg, const AugmentedView& view) {
  check_shapes(params, cfg);
  if (view.features.cols() != cfg.input_dim())
    throw ShapeError("forward: view has " + std::to_string(view.features.cols()) + " feature columns, encoder expects " +
                     std::to_string(cfg.input_dim()));
  const bool gcn = cfg.kind == EncoderKind::gcn;
  if (gcn && view.adjacency.matrix.rows() != view.features.rows())
    throw ShapeError("forward: adjacency and feature row counts differ");

  ForwardResult result;
  result.tape.kind = cfg.kind;
  if (gcn) result.tape.adjacency = view.adjacency.matrix;
  result.tape.layers.resize(cfg.depth());

  DenseMatrix h = view.features;
  for (std::size_t k = 0; k < cfg.depth(); ++k) {
    auto& layer = result.tape.layers[k];
    DenseMatrix t;
    if (k == 0 && static_cast<double>(count_nonzero(h)) <= kSparseInputDensity * static_cast<double>(h.size())) {
      layer.input_sparse = CsrMatrix::from_dense(h);
      t = spmm(*layer.input_sparse, params.weights[k]);
    } else {
      t = dense_matmul(h, params.weights[k]);
      layer.input = std::move(h);
    }
    DenseMatrix p = gcn ? spmm(result.tape.adjacency, t) : std::move(t);
    if (cfg.bias) add_bias(p, params.biases[k]);
    const bool last = k + 1 == cfg.depth();
    h = last ? p : relu(p);
    layer.pre_activation = std::move(p);
  }
  result.embeddings = std::move(h);
  return result;
}

DenseMatrix encode(const EncoderParams& params, const EncoderConfig& cfg, const AugmentedView& view) {
  return forward(params, cfg, view).embeddings;
}

EncoderParams backward(const EncoderParams& params, const EncoderConfig& cfg, const ForwardTape& tape,
                       const DenseMatrix& grad_z) {
  check_shapes(params, cfg);
  if (tape.layers.size() != cfg.depth()) throw ShapeError("backward: tape depth does not match config");
  const auto& out = tape.layers.back().pre_activation;
  if (grad_z.rows() != out.rows() || grad_z.cols() != out.cols())
    throw ShapeError("backward: grad_Z shape does not match Z");

  EncoderParams grads = EncoderParams::zeros_like(cfg);
  DenseMatrix upstream = grad_z;  // dL/dH_{k+1}
  for (std::size_t k = cfg.depth(); k-- > 0;) {
    const auto& layer = tape.layers[k];
    // dL/dP_k: gate by the ReLU unless this is the output layer.
    DenseMatrix dp = std::move(upstream);
    if (k + 1 != cfg.depth()) {
      auto g = dp.values();
      const auto pre = layer.pre_activation.values();
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!(pre[i] > 0.0)) g[i] = 0.0;
    }
    if (cfg.bias) {
      auto& db = grads.biases[k];
      for (std::size_t r = 0; r < dp.rows(); ++r) {
        const auto row = dp.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) db(0, c) += row[c];
      }
    }
    DenseMatrix s = tape.kind == EncoderKind::gcn ? spmm_transpose(tape.adjacency, dp) : std::move(dp);
    grads.weights[k] =
        layer.input_sparse ? spmm_transpose(*layer.input_sparse, s) : dense_matmul_tn(layer.input, s);
    if (k > 0) upstream = dense_matmul_nt(s, params.weights[k]);
  }
  return grads;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  check_shapes(ckpt.params, ckpt.config);
  nlohmann::ordered_json header;
  header["format"] = "ccassg-checkpoint";
  header["encoder"] = {{"kind", to_string(ckpt.config.kind)}, {"widths", ckpt.config.widths}, {"bias", ckpt.config.bias}};
  header["metadata"] = nlohmann::ordered_json::parse(ckpt.metadata_json);
  const std::string blob = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u64(out, blob.size());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  for (std::size_t k = 0; k < ckpt.params.weights.size(); ++k) {
    put_block(out, ckpt.params.weights[k]);
    if (ckpt.config.bias) put_block(out, ckpt.params.biases[k]);
  }
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw IoError(path.string() + ": not a checkpoint");
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion)
    throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t len = get_u64(in);
  if (len > (1ULL << 30)) throw IoError(path.string() + ": implausible header length");
  std::string blob(len, '\0');
  if (!in.read(blob.data(), static_cast<std::streamsize>(len))) throw IoError(path.string() + ": truncated header");

  Checkpoint ckpt;
  try {
    const auto header = nlohmann::json::parse(blob);
    const auto& enc = header.at("encoder");
    ckpt.config.kind = parse_encoder_kind(enc.at("kind").get<std::string>());
    ckpt.config.widths = enc.at("widths").get<std::vector<std::size_t>>();
    ckpt.config.bias = enc.at("bias").get<bool>();
    ckpt.metadata_json = header.value("metadata", nlohmann::json::object()).dump();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": bad checkpoint header: " + e.what());
  }
  ckpt.params = EncoderParams::zeros_like(ckpt.config);
  for (std::size_t k = 0; k < ckpt.params.weights.size(); ++k) {
    get_block(in, ckpt.params.weights[k]);
    if (ckpt.config.bias) get_block(in, ckpt.params.biases[k]);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IoError(path.string() + ": trailing bytes after weights");
  return ckpt;
}

}  // namespace ccassg
