#pragma once

#include "lulcseg/encoder.hpp"

namespace lulcseg {

// Channel-gated fusion of the two branch maps. Global average pooling of the
// concatenated maps drives two parallel gate MLPs (squeeze C -> C/r, GELU,
// expand to the branch width, sigmoid); each branch is scaled per channel by
// its gate before the final concat. Gates are per-channel scalars: that is
// the only shape a pooled descriptor can produce.
struct GatedFusion {
  Linear squeeze_spectral, expand_spectral;
  Linear squeeze_sar, expand_sar;
  i64 spectral_ch = 0, sar_ch = 0;

  static GatedFusion make(ParamStore& ps, const std::string& name, i64 spectral_ch, i64 sar_ch,
                          i64 gate_reduction);
  // spectral [b,cs,h,w], sar [b,ca,h,w] -> [b,cs+ca,h,w]
  Tensor forward(const Tensor& spectral, const Tensor& sar) const;
  i64 flops(i64 h, i64 w) const;
};

// Plain concat used when the gated fusion is ablated away.
Tensor concat_fusion(const Tensor& spectral, const Tensor& sar);

// Patch merging into the next stage: overlapping 3x3 stride-2 conv over the
// fused map, layer norm, then the channel split feeding the two branches.
struct StageTransition {
  OverlapPatchEmbed merge;
  i64 spectral_ch = 0, sar_ch = 0;

  static StageTransition make(ParamStore& ps, const std::string& name, i64 in_ch, i64 out_ch,
                              i64 spectral_ch, i64 sar_ch);
  // fused map [b,C,h,w] -> branch tokens at the next resolution.
  BranchTokens forward(const Tensor& fused, i64* out_h, i64* out_w) const;
  i64 flops(i64 in_h, i64 in_w) const;
};

}  // namespace lulcseg
