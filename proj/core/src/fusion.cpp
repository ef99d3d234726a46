#include "lulcseg/fusion.hpp"

namespace lulcseg {

GatedFusion GatedFusion::make(ParamStore& ps, const std::string& name, i64 spectral_ch,
                              i64 sar_ch, i64 gate_reduction) {
  i64 total = spectral_ch + sar_ch;
  if (total % gate_reduction != 0)
    throw ConfigError("gated fusion at '" + name + "': squeeze factor " +
                      std::to_string(gate_reduction) + " does not divide " +
                      std::to_string(total));
  GatedFusion f;
  f.spectral_ch = spectral_ch;
  f.sar_ch = sar_ch;
  i64 squeezed = total / gate_reduction;
  f.squeeze_spectral = Linear::make(ps, name + ".g1a", total, squeezed);
  f.expand_spectral = Linear::make(ps, name + ".g1b", squeezed, spectral_ch);
  f.squeeze_sar = Linear::make(ps, name + ".g2a", total, squeezed);
  f.expand_sar = Linear::make(ps, name + ".g2b", squeezed, sar_ch);
  return f;
}

Tensor GatedFusion::forward(const Tensor& spectral, const Tensor& sar) const {
  if (spectral.rank() != 4 || sar.rank() != 4 || spectral.dim(0) != sar.dim(0) ||
      spectral.dim(2) != sar.dim(2) || spectral.dim(3) != sar.dim(3))
    throw ShapeError("gated fusion: spatial extents differ, " + shape_str(spectral.shape()) +
                     " vs " + shape_str(sar.shape()));
  Tensor both = concat({spectral, sar}, 1);
  Tensor pooled = mean_axes(both, {2, 3});  // [b, C]
  Tensor gate_s = sigmoid(expand_spectral.forward(gelu(squeeze_spectral.forward(pooled))));
  Tensor gate_a = sigmoid(expand_sar.forward(gelu(squeeze_sar.forward(pooled))));
  return concat({scale_channels(spectral, gate_s), scale_channels(sar, gate_a)}, 1);
}

i64 GatedFusion::flops(i64, i64) const {
  // Gate MLPs act on one pooled row per example; pooling itself is excluded
  // by the counting convention.
  return squeeze_spectral.flops(1) + expand_spectral.flops(1) + squeeze_sar.flops(1) +
         expand_sar.flops(1);
}

Tensor concat_fusion(const Tensor& spectral, const Tensor& sar) {
  if (spectral.dim(0) != sar.dim(0) || spectral.dim(2) != sar.dim(2) ||
      spectral.dim(3) != sar.dim(3))
    throw ShapeError("concat fusion: spatial extents differ");
  return concat({spectral, sar}, 1);
}

StageTransition StageTransition::make(ParamStore& ps, const std::string& name, i64 in_ch,
                                      i64 out_ch, i64 spectral_ch, i64 sar_ch) {
  if (spectral_ch + sar_ch != out_ch)
    throw ConfigError("stage transition at '" + name + "': split " +
                      std::to_string(spectral_ch) + "+" + std::to_string(sar_ch) +
                      " does not cover " + std::to_string(out_ch) + " channels");
  StageTransition t;
  t.merge = OverlapPatchEmbed::make(ps, name + ".merge", in_ch, out_ch, 3, 2, 1);
  t.spectral_ch = spectral_ch;
  t.sar_ch = sar_ch;
  return t;
}

BranchTokens StageTransition::forward(const Tensor& fused, i64* out_h, i64* out_w) const {
  Tensor tokens = merge.forward(fused, out_h, out_w);
  std::vector<Tensor> parts = split(tokens, {spectral_ch, sar_ch}, 2);
  return BranchTokens{parts[0], parts[1]};
}

i64 StageTransition::flops(i64 in_h, i64 in_w) const { return merge.flops(in_h, in_w); }

}  // namespace lulcseg
