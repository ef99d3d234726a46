#include "lulcseg/network.hpp"

namespace lulcseg {

Network::Network(const NetConfig& cfg, DType dtype, std::uint64_t seed)
    : cfg_(cfg), params_(std::make_unique<ParamStore>(dtype, seed)) {
  ParamStore& ps = *params_;
  embed_spectral_ = OverlapPatchEmbed::make(ps, "embed1.spectral", cfg.in_spectral,
                                            cfg.spectral_channels(0), 7, 4, 3);
  embed_sar_ = OverlapPatchEmbed::make(ps, "embed1.sar", cfg.in_sar, cfg.sar_channels(0), 7, 4,
                                       3);
  for (int i = 0; i < 4; ++i) {
    std::string sname = "s" + std::to_string(i + 1);
    stages_[static_cast<size_t>(i)] = EncoderStage::make(ps, sname, cfg, i);
    if (cfg.mmam)
      fusions_[static_cast<size_t>(i)] =
          GatedFusion::make(ps, "fuse" + std::to_string(i + 1), cfg.spectral_channels(i),
                            cfg.sar_channels(i), cfg.gate_reduction);
    if (i < 3)
      transitions_[static_cast<size_t>(i)] = StageTransition::make(
          ps, "trans" + std::to_string(i + 2), cfg.stages[static_cast<size_t>(i)].channels,
          cfg.stages[static_cast<size_t>(i + 1)].channels, cfg.spectral_channels(i + 1),
          cfg.sar_channels(i + 1));
  }
  decoder_ = Decoder::make(
      ps, "dec",
      {cfg.stages[0].channels, cfg.stages[1].channels, cfg.stages[2].channels,
       cfg.stages[3].channels},
      cfg.decoder_dim, cfg.n_classes);
}

Tensor Network::fuse_stage(int stage, const BranchTokens& tokens, i64 h, i64 w) const {
  Tensor spectral = tokens_to_map(tokens.spectral, h, w);
  Tensor sar = tokens_to_map(tokens.sar, h, w);
  if (fusions_[static_cast<size_t>(stage)])
    return fusions_[static_cast<size_t>(stage)]->forward(spectral, sar);
  return concat_fusion(spectral, sar);
}

std::array<Tensor, 4> Network::forward_pyramid(const Tensor& spectral, const Tensor& sar) {
  if (spectral.rank() != 4 || sar.rank() != 4)
    throw ShapeError("network: expected [b,c,h,w] inputs");
  if (spectral.dim(1) != cfg_.in_spectral || sar.dim(1) != cfg_.in_sar)
    throw ShapeError("network: band counts " + shape_str(spectral.shape()) + "/" +
                     shape_str(sar.shape()) + " do not match the configured " +
                     std::to_string(cfg_.in_spectral) + "+" + std::to_string(cfg_.in_sar));
  if (spectral.dim(0) != sar.dim(0) || spectral.dim(2) != sar.dim(2) ||
      spectral.dim(3) != sar.dim(3))
    throw ShapeError("network: modality rasters disagree, " + shape_str(spectral.shape()) +
                     " vs " + shape_str(sar.shape()));

  std::array<Tensor, 4> pyramid;
  i64 h = 0, w = 0, hs = 0, ws = 0;
  BranchTokens tokens;
  tokens.spectral = embed_spectral_.forward(spectral, &h, &w);
  tokens.sar = embed_sar_.forward(sar, &hs, &ws);
  for (int i = 0; i < 4; ++i) {
    tokens = stages_[static_cast<size_t>(i)].forward(tokens, h, w);
    Tensor fused = fuse_stage(i, tokens, h, w);
    pyramid[static_cast<size_t>(i)] = fused;
    if (i < 3) tokens = transitions_[static_cast<size_t>(i)]->forward(fused, &h, &w);
  }
  return pyramid;
}

Tensor Network::forward(const Tensor& spectral, const Tensor& sar) {
  return decoder_.forward(forward_pyramid(spectral, sar));
}

CostReport Network::count_costs(i64 in_h, i64 in_w) const {
  cfg_.validate(in_h, in_w);
  CostReport report;
  auto res = cfg_.stage_resolutions(in_h, in_w);

  auto params_with_prefix = [&](const std::string& prefix) {
    i64 total = 0;
    for (const ParamStore::Entry& e : params_->entries())
      if (e.name.rfind(prefix, 0) == 0) total += e.tensor.numel();
    return total;
  };
  auto push = [&](const std::string& component, const std::string& prefix, i64 flops) {
    report.items.push_back({component, params_with_prefix(prefix), flops});
  };

  push("embed.stage1", "embed1.",
       embed_spectral_.flops(in_h, in_w) + embed_sar_.flops(in_h, in_w));
  for (int i = 0; i < 4; ++i) {
    auto [h, w] = res[static_cast<size_t>(i)];
    std::string tag = std::to_string(i + 1);
    push("encoder.stage" + tag, "s" + tag + ".", stages_[static_cast<size_t>(i)].flops(h, w));
    if (fusions_[static_cast<size_t>(i)])
      push("fusion.stage" + tag, "fuse" + tag + ".",
           fusions_[static_cast<size_t>(i)]->flops(h, w));
    if (i < 3)
      push("transition.stage" + std::to_string(i + 2), "trans" + std::to_string(i + 2) + ".",
           transitions_[static_cast<size_t>(i)]->flops(h, w));
  }
  push("decoder", "dec.", decoder_.flops(res));

  for (const CostReport::Item& item : report.items) {
    report.total_params += item.params;
    report.total_flops += item.flops;
  }
  return report;
}

}  // namespace lulcseg
