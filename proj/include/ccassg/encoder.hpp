#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ccassg/augment.hpp"
#include "ccassg/linalg.hpp"

namespace ccassg {

enum class EncoderKind { gcn, mlp };

std::string to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(const std::string& s);

/// Layer widths run from the input feature count to the embedding dimension:
/// {F, hidden..., D}. ReLU follows every layer except the last.
struct EncoderConfig {
  EncoderKind kind = EncoderKind::gcn;
  std::vector<std::size_t> widths;
  bool bias = false;

  std::size_t depth() const noexcept { return widths.empty() ? 0 : widths.size() - 1; }
  std::size_t input_dim() const noexcept { return widths.empty() ? 0 : widths.front(); }
  std::size_t output_dim() const noexcept { return widths.empty() ? 0 : widths.back(); }

  /// Throws ConfigError when there is no layer or a width is zero.
  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// One weight matrix per layer (widths[k] x widths[k+1]); `biases` holds a
/// 1 x widths[k+1] row per layer when the config enables them, else is empty.
/// Also used as the container for parameter gradients.
struct EncoderParams {
  std::vector<DenseMatrix> weights;
  std::vector<DenseMatrix> biases;

  /// Zero-filled params with the shapes `cfg` implies.
  static EncoderParams zeros_like(const EncoderConfig& cfg);
  std::size_t parameter_count() const noexcept;
  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

/// Intermediates kept for the backward pass.
struct ForwardTape {
  struct Layer {
    DenseMatrix input;                 // H_k; empty when input_sparse is used
    std::optional<CsrMatrix> input_sparse;  // sparse copy of a sparse first-layer input
    DenseMatrix pre_activation;        // P_k
  };
  EncoderKind kind = EncoderKind::gcn;
  CsrMatrix adjacency;  // Â of the view (GCN only)
  std::vector<Layer> layers;
};

struct ForwardResult {
  DenseMatrix embeddings;  // Z, N x D
  ForwardTape tape;
};

/// Glorot-uniform weights in ±sqrt(6 / (fan_in + fan_out)); zero biases.
EncoderParams glorot_init(const EncoderConfig& cfg, SeededRng& rng);

/// GCN layer: H_{k+1} = act(Â H_k W_k + b_k); MLP layers skip Â.
ForwardResult forward(const EncoderParams& params, const EncoderConfig& cfg, const AugmentedView& view);
/// Forward without a tape, for inference.
DenseMatrix encode(const EncoderParams& params, const EncoderConfig& cfg, const AugmentedView& view);

/// dL/dθ given dL/dZ. The ReLU derivative at exactly 0 is taken as 0.
EncoderParams backward(const EncoderParams& params, const EncoderConfig& cfg, const ForwardTape& tape,
                       const DenseMatrix& grad_z);

/// Binary checkpoint: "CCASSGCK", u32 version, u64 JSON length, JSON header
/// (encoder config plus caller metadata), then little-endian f64 blocks for
/// each layer's weights followed by its bias when present.
struct Checkpoint {
  EncoderConfig config;
  EncoderParams params;
  std::string metadata_json = "{}";
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ccassg
