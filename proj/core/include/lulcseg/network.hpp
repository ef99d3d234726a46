#pragma once

#include <memory>
#include <optional>

#include "lulcseg/decoder.hpp"
#include "lulcseg/fusion.hpp"

namespace lulcseg {

struct CostReport {
  struct Item {
    std::string component;
    i64 params = 0;
    i64 flops = 0;
  };
  std::vector<Item> items;
  i64 total_params = 0;
  i64 total_flops = 0;
};

// The whole dual-branch segmentation model: per-modality stage-1 embeddings,
// four dual-branch encoder stages with per-stage fusion, patch-merging
// transitions that re-split channels for the next stage, and the all-MLP
// decoder over the fused pyramid.
class Network {
 public:
  Network(const NetConfig& cfg, DType dtype, std::uint64_t seed);

  // spectral [b,n_spectral,S,S], sar [b,n_sar,S,S] -> logits [b,ncls,S',S']
  // where S' is the stage-1 resolution (S/4 when 4 | S).
  Tensor forward(const Tensor& spectral, const Tensor& sar);

  // The four fused per-stage maps feeding the decoder.
  std::array<Tensor, 4> forward_pyramid(const Tensor& spectral, const Tensor& sar);

  const NetConfig& config() const { return cfg_; }
  ParamStore& params() { return *params_; }
  const ParamStore& params() const { return *params_; }

  // Analytic parameter/FLOP counts per component at the given input extent.
  // Convention: one multiply-accumulate = 2 FLOPs, bias adds included,
  // norms/activations/upsampling excluded; attention counts the QK and AV
  // contractions.
  CostReport count_costs(i64 in_h, i64 in_w) const;

 private:
  Tensor fuse_stage(int stage, const BranchTokens& tokens, i64 h, i64 w) const;

  NetConfig cfg_;
  std::unique_ptr<ParamStore> params_;
  OverlapPatchEmbed embed_spectral_, embed_sar_;
  std::array<EncoderStage, 4> stages_;
  std::array<std::optional<GatedFusion>, 4> fusions_;
  std::array<std::optional<StageTransition>, 3> transitions_;
  Decoder decoder_;
};

}  // namespace lulcseg
