#pragma once

#include <array>
#include <optional>

#include "lulcseg/nn.hpp"

namespace lulcseg {

struct StageSettings {
  i64 channels = 0;   // fused width C_i
  i64 depth = 0;      // block count
  i64 heads = 0;
  i64 reduction = 1;  // attention K/V spatial reduction ratio
};

// Channel share of the spectral branch, kept rational so the split is exact.
struct SplitRatio {
  i64 num = 3, den = 4;
  i64 spectral_part(i64 channels) const { return (channels * num + den - 1) / den; }
  i64 sar_part(i64 channels) const { return channels - spectral_part(channels); }
};

struct NetConfig {
  i64 in_spectral = 10;
  i64 in_sar = 2;
  i64 n_classes = 9;
  std::array<StageSettings, 4> stages{
      StageSettings{16, 2, 1, 8}, StageSettings{32, 2, 2, 4},
      StageSettings{48, 2, 3, 2}, StageSettings{64, 2, 4, 1}};
  i64 mlp_ratio = 4;
  SplitRatio split;
  i64 decoder_dim = 64;
  i64 gate_reduction = 4;  // squeeze factor of the fusion gate MLPs

  // Ablation switches.
  bool cross_attention = true;
  bool efficient_sa = true;  // false forces reduction ratio 1 everywhere
  bool mmam = true;          // false replaces gated fusion with plain concat

  i64 spectral_channels(int stage) const { return split.spectral_part(stages[static_cast<size_t>(stage)].channels); }
  i64 sar_channels(int stage) const { return split.sar_part(stages[static_cast<size_t>(stage)].channels); }
  i64 effective_reduction(int stage) const {
    return efficient_sa ? stages[static_cast<size_t>(stage)].reduction : 1;
  }

  // Rejects configs whose shapes cannot flow: branch widths must be positive
  // and divisible by the stage head count, fused widths divisible by the
  // gate squeeze factor, and every stage resolution divisible by its
  // reduction ratio for the given input extent.
  void validate(i64 in_h, i64 in_w) const;

  // Stage resolutions for a given input extent (1/4, 1/8, 1/16, 1/32 chain).
  std::array<std::pair<i64, i64>, 4> stage_resolutions(i64 in_h, i64 in_w) const;

  static NetConfig desk();
  // MiT-B2-sized reconstruction used by the parameter/FLOP counter.
  static NetConfig full_size();
};

// Scaled dot-product multi-head attention over token sequences.
// q [b,n,c], k/v [b,m,c]; heads must divide c. Logits scaled by
// 1/sqrt(c/heads).
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, i64 heads);

// Strided overlapping convolution plus layer norm; produces the token grid
// of the next resolution level.
struct OverlapPatchEmbed {
  Conv2d proj;
  LayerNorm norm;

  static OverlapPatchEmbed make(ParamStore& ps, const std::string& name, i64 in_ch, i64 out_ch,
                                i64 kernel, int stride, int pad);
  // map [b,c,h,w] -> tokens [b, h'*w', out_ch]; writes the new extents.
  Tensor forward(const Tensor& map, i64* out_h, i64* out_w) const;
  i64 flops(i64 in_h, i64 in_w) const;
};

// Self-attention whose K/V sequence is shortened by a reduction conv
// (kernel=R, stride=R) followed by layer norm. R=1 skips the reduction
// entirely and is exactly standard multi-head self-attention.
struct EfficientSelfAttention {
  Linear query, key, value, out;
  std::optional<Conv2d> reduce;
  std::optional<LayerNorm> reduce_norm;
  i64 channels = 0, heads = 0, reduction = 1;

  static EfficientSelfAttention make(ParamStore& ps, const std::string& name, i64 channels,
                                     i64 heads, i64 reduction);
  Tensor forward(const Tensor& tokens, i64 h, i64 w) const;
  i64 flops(i64 h, i64 w) const;
};

// Injects an auxiliary branch into a primary one:
//   primary + Attention(norm(primary), reduce(adjust(aux)))
// The adjust MLP maps the auxiliary width onto the primary width; the
// residual lives inside this module.
struct CrossAttention {
  LayerNorm primary_norm;
  Linear adjust;
  std::optional<Conv2d> reduce;
  std::optional<LayerNorm> reduce_norm;
  Linear query, key, value, out;
  i64 primary_ch = 0, aux_ch = 0, heads = 0, reduction = 1;

  static CrossAttention make(ParamStore& ps, const std::string& name, i64 primary_ch,
                             i64 aux_ch, i64 heads, i64 reduction);
  Tensor forward(const Tensor& primary, const Tensor& aux, i64 h, i64 w) const;
  i64 flops(i64 h, i64 w) const;
};

// Feed-forward block with a depth-wise 3x3 conv between the two linear
// layers; position information comes from the conv's zero padding, so the
// model carries no positional encodings. Norm and residual live inside.
struct MixFfn {
  LayerNorm norm;
  Linear expand;
  Conv2d depthwise;
  Linear project;
  i64 channels = 0, hidden = 0;

  static MixFfn make(ParamStore& ps, const std::string& name, i64 channels, i64 mlp_ratio);
  Tensor forward(const Tensor& tokens, i64 h, i64 w) const;
  i64 flops(i64 h, i64 w) const;
};

struct BranchTokens {
  Tensor spectral, sar;  // [b, n, c_spectral] / [b, n, c_sar]
};

// Both branch maps of one stage, [b,c,h,w] each sharing (b,h,w).
struct BranchFeatures {
  Tensor spectral, sar;
};

// One dual-branch block: per-branch self-attention, both cross directions
// computed simultaneously from the post-self-attention features, then
// per-branch Mix-FFN.
struct EncoderBlock {
  LayerNorm norm_attn_spectral, norm_attn_sar;
  EfficientSelfAttention attn_spectral, attn_sar;
  std::optional<CrossAttention> cross_spectral;  // aux = sar
  std::optional<CrossAttention> cross_sar;       // aux = spectral
  MixFfn ffn_spectral, ffn_sar;

  static EncoderBlock make(ParamStore& ps, const std::string& name, i64 spectral_ch, i64 sar_ch,
                           i64 heads, i64 reduction, i64 mlp_ratio, bool cross);
  BranchTokens forward(const BranchTokens& in, i64 h, i64 w) const;
  i64 flops(i64 h, i64 w) const;
};

struct EncoderStage {
  std::vector<EncoderBlock> blocks;

  static EncoderStage make(ParamStore& ps, const std::string& name, const NetConfig& cfg,
                           int stage);
  BranchTokens forward(const BranchTokens& in, i64 h, i64 w) const;
  // Map-level wrapper matching the stage contract: spatial dims unchanged.
  BranchFeatures forward_maps(const BranchFeatures& in) const;
  i64 flops(i64 h, i64 w) const;
};

}  // namespace lulcseg
