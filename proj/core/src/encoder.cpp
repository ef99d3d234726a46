#include "lulcseg/encoder.hpp"

#include <cmath>

namespace lulcseg {

namespace {

// [b,n,c] -> [b*heads, n, c/heads]
Tensor split_heads(const Tensor& t, i64 heads) {
  i64 b = t.dim(0), n = t.dim(1), c = t.dim(2);
  Tensor r = reshape(t, {b, n, heads, c / heads});
  return reshape(permute(r, {0, 2, 1, 3}), {b * heads, n, c / heads});
}

// [b*heads, n, d] -> [b, n, heads*d]
Tensor merge_heads(const Tensor& t, i64 b, i64 heads) {
  i64 n = t.dim(1), d = t.dim(2);
  Tensor r = reshape(t, {b, heads, n, d});
  return reshape(permute(r, {0, 2, 1, 3}), {b, n, heads * d});
}

i64 attention_matrix_flops(i64 n, i64 m, i64 c) {
  // QK^T and AV contractions, one multiply-accumulate = 2 FLOPs.
  return 2 * 2 * n * m * c;
}

}  // namespace

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, i64 heads) {
  if (q.rank() != 3 || k.rank() != 3 || v.rank() != 3)
    throw ShapeError("attention: expected [b,n,c] tokens");
  if (q.dim(2) % heads != 0)
    throw ShapeError("attention: heads " + std::to_string(heads) +
                     " do not divide channels " + std::to_string(q.dim(2)));
  if (k.shape() != v.shape() || q.dim(0) != k.dim(0) || q.dim(2) != k.dim(2))
    throw ShapeError("attention: query " + shape_str(q.shape()) + " incompatible with key " +
                     shape_str(k.shape()));
  i64 b = q.dim(0);
  i64 d = q.dim(2) / heads;
  Tensor qh = split_heads(q, heads);
  Tensor kh = split_heads(k, heads);
  Tensor vh = split_heads(v, heads);
  Tensor scores = mul_scalar(matmul(qh, permute(kh, {0, 2, 1})), 1.0 / std::sqrt(static_cast<double>(d)));
  Tensor attn = softmax(scores, -1);
  return merge_heads(matmul(attn, vh), b, heads);
}

// --------------------------------------------------------------------------

OverlapPatchEmbed OverlapPatchEmbed::make(ParamStore& ps, const std::string& name, i64 in_ch,
                                          i64 out_ch, i64 kernel, int stride, int pad) {
  OverlapPatchEmbed e;
  e.proj = Conv2d::make(ps, name + ".proj", in_ch, out_ch, kernel, stride, pad);
  e.norm = LayerNorm::make(ps, name + ".norm", out_ch);
  return e;
}

Tensor OverlapPatchEmbed::forward(const Tensor& map, i64* out_h, i64* out_w) const {
  Tensor y = proj.forward(map);
  *out_h = y.dim(2);
  *out_w = y.dim(3);
  return norm.forward(map_to_tokens(y));
}

i64 OverlapPatchEmbed::flops(i64 in_h, i64 in_w) const {
  i64 oh = conv_out_extent(in_h, proj.kernel, proj.stride, proj.pad);
  i64 ow = conv_out_extent(in_w, proj.kernel, proj.stride, proj.pad);
  return proj.flops(oh, ow);
}

// --------------------------------------------------------------------------

EfficientSelfAttention EfficientSelfAttention::make(ParamStore& ps, const std::string& name,
                                                    i64 channels, i64 heads, i64 reduction) {
  if (channels % heads != 0)
    throw ConfigError("attention at '" + name + "': heads " + std::to_string(heads) +
                      " do not divide " + std::to_string(channels) + " channels");
  EfficientSelfAttention a;
  a.channels = channels;
  a.heads = heads;
  a.reduction = reduction;
  a.query = Linear::make(ps, name + ".q", channels, channels);
  a.key = Linear::make(ps, name + ".k", channels, channels);
  a.value = Linear::make(ps, name + ".v", channels, channels);
  a.out = Linear::make(ps, name + ".o", channels, channels);
  if (reduction > 1) {
    a.reduce = Conv2d::make(ps, name + ".sr", channels, channels, reduction,
                            static_cast<int>(reduction), 0);
    a.reduce_norm = LayerNorm::make(ps, name + ".srn", channels);
  }
  return a;
}

Tensor EfficientSelfAttention::forward(const Tensor& tokens, i64 h, i64 w) const {
  Tensor q = query.forward(tokens);
  Tensor kv_src = tokens;
  if (reduce) {
    if (h % reduction != 0 || w % reduction != 0)
      throw ShapeError("attention reduction " + std::to_string(reduction) +
                       " does not divide token grid " + std::to_string(h) + "x" +
                       std::to_string(w));
    kv_src = reduce_norm->forward(map_to_tokens(reduce->forward(tokens_to_map(tokens, h, w))));
  }
  Tensor k = key.forward(kv_src);
  Tensor v = value.forward(kv_src);
  return out.forward(multi_head_attention(q, k, v, heads));
}

i64 EfficientSelfAttention::flops(i64 h, i64 w) const {
  i64 n = h * w;
  i64 m = reduce ? (h / reduction) * (w / reduction) : n;
  i64 total = query.flops(n) + key.flops(m) + value.flops(m) + out.flops(n);
  if (reduce) total += reduce->flops(h / reduction, w / reduction);
  total += attention_matrix_flops(n, m, channels);
  return total;
}

// --------------------------------------------------------------------------

CrossAttention CrossAttention::make(ParamStore& ps, const std::string& name, i64 primary_ch,
                                    i64 aux_ch, i64 heads, i64 reduction) {
  if (primary_ch % heads != 0)
    throw ConfigError("cross attention at '" + name + "': heads do not divide channels");
  CrossAttention c;
  c.primary_ch = primary_ch;
  c.aux_ch = aux_ch;
  c.heads = heads;
  c.reduction = reduction;
  c.primary_norm = LayerNorm::make(ps, name + ".pn", primary_ch);
  c.adjust = Linear::make(ps, name + ".adj", aux_ch, primary_ch);
  if (reduction > 1) {
    c.reduce = Conv2d::make(ps, name + ".sr", primary_ch, primary_ch, reduction,
                            static_cast<int>(reduction), 0);
    c.reduce_norm = LayerNorm::make(ps, name + ".srn", primary_ch);
  }
  c.query = Linear::make(ps, name + ".q", primary_ch, primary_ch);
  c.key = Linear::make(ps, name + ".k", primary_ch, primary_ch);
  c.value = Linear::make(ps, name + ".v", primary_ch, primary_ch);
  c.out = Linear::make(ps, name + ".o", primary_ch, primary_ch);
  return c;
}

Tensor CrossAttention::forward(const Tensor& primary, const Tensor& aux, i64 h, i64 w) const {
  if (primary.dim(1) != aux.dim(1))
    throw ShapeError("cross attention: token counts differ between modalities, " +
                     shape_str(primary.shape()) + " vs " + shape_str(aux.shape()));
  Tensor q_src = primary_norm.forward(primary);
  Tensor kv_src = adjust.forward(aux);
  if (reduce) {
    if (h % reduction != 0 || w % reduction != 0)
      throw ShapeError("cross attention reduction does not divide token grid");
    kv_src = reduce_norm->forward(map_to_tokens(reduce->forward(tokens_to_map(kv_src, h, w))));
  }
  Tensor q = query.forward(q_src);
  Tensor k = key.forward(kv_src);
  Tensor v = value.forward(kv_src);
  Tensor injected = out.forward(multi_head_attention(q, k, v, heads));
  return add(primary, injected);
}

i64 CrossAttention::flops(i64 h, i64 w) const {
  i64 n = h * w;
  i64 m = reduce ? (h / reduction) * (w / reduction) : n;
  i64 total = adjust.flops(n) + query.flops(n) + key.flops(m) + value.flops(m) + out.flops(n);
  if (reduce) total += reduce->flops(h / reduction, w / reduction);
  total += attention_matrix_flops(n, m, primary_ch);
  return total;
}

// --------------------------------------------------------------------------

MixFfn MixFfn::make(ParamStore& ps, const std::string& name, i64 channels, i64 mlp_ratio) {
  MixFfn f;
  f.channels = channels;
  f.hidden = channels * mlp_ratio;
  f.norm = LayerNorm::make(ps, name + ".norm", channels);
  f.expand = Linear::make(ps, name + ".fc1", channels, f.hidden);
  f.depthwise = Conv2d::make(ps, name + ".dw", f.hidden, f.hidden, 3, 1, 1,
                             static_cast<int>(f.hidden));
  f.project = Linear::make(ps, name + ".fc2", f.hidden, channels);
  return f;
}

Tensor MixFfn::forward(const Tensor& tokens, i64 h, i64 w) const {
  if (tokens.dim(1) != h * w)
    throw ShapeError("mix_ffn: " + std::to_string(tokens.dim(1)) +
                     " tokens do not form a " + std::to_string(h) + "x" + std::to_string(w) +
                     " grid");
  Tensor y = norm.forward(tokens);
  y = expand.forward(y);
  y = map_to_tokens(depthwise.forward(tokens_to_map(y, h, w)));
  y = gelu(y);
  y = project.forward(y);
  return add(tokens, y);
}

i64 MixFfn::flops(i64 h, i64 w) const {
  i64 n = h * w;
  return expand.flops(n) + depthwise.flops(h, w) + project.flops(n);
}

// --------------------------------------------------------------------------

EncoderBlock EncoderBlock::make(ParamStore& ps, const std::string& name, i64 spectral_ch,
                                i64 sar_ch, i64 heads, i64 reduction, i64 mlp_ratio,
                                bool cross) {
  EncoderBlock b;
  b.norm_attn_spectral = LayerNorm::make(ps, name + ".n1s", spectral_ch);
  b.attn_spectral = EfficientSelfAttention::make(ps, name + ".sa_s", spectral_ch, heads,
                                                 reduction);
  b.norm_attn_sar = LayerNorm::make(ps, name + ".n1a", sar_ch);
  b.attn_sar = EfficientSelfAttention::make(ps, name + ".sa_a", sar_ch, heads, reduction);
  if (cross) {
    b.cross_spectral = CrossAttention::make(ps, name + ".ca_s", spectral_ch, sar_ch, heads,
                                            reduction);
    b.cross_sar = CrossAttention::make(ps, name + ".ca_a", sar_ch, spectral_ch, heads,
                                       reduction);
  }
  b.ffn_spectral = MixFfn::make(ps, name + ".ffn_s", spectral_ch, mlp_ratio);
  b.ffn_sar = MixFfn::make(ps, name + ".ffn_a", sar_ch, mlp_ratio);
  return b;
}

BranchTokens EncoderBlock::forward(const BranchTokens& in, i64 h, i64 w) const {
  BranchTokens t;
  t.spectral = add(in.spectral, attn_spectral.forward(norm_attn_spectral.forward(in.spectral), h, w));
  t.sar = add(in.sar, attn_sar.forward(norm_attn_sar.forward(in.sar), h, w));
  if (cross_spectral) {
    // Both directions read the same post-self-attention features.
    Tensor s = cross_spectral->forward(t.spectral, t.sar, h, w);
    Tensor a = cross_sar->forward(t.sar, t.spectral, h, w);
    t.spectral = s;
    t.sar = a;
  }
  t.spectral = ffn_spectral.forward(t.spectral, h, w);
  t.sar = ffn_sar.forward(t.sar, h, w);
  return t;
}

i64 EncoderBlock::flops(i64 h, i64 w) const {
  i64 total = attn_spectral.flops(h, w) + attn_sar.flops(h, w) + ffn_spectral.flops(h, w) +
              ffn_sar.flops(h, w);
  if (cross_spectral) total += cross_spectral->flops(h, w) + cross_sar->flops(h, w);
  return total;
}

// --------------------------------------------------------------------------

EncoderStage EncoderStage::make(ParamStore& ps, const std::string& name, const NetConfig& cfg,
                                int stage) {
  EncoderStage s;
  const StageSettings& st = cfg.stages[static_cast<size_t>(stage)];
  for (i64 d = 0; d < st.depth; ++d)
    s.blocks.push_back(EncoderBlock::make(ps, name + ".b" + std::to_string(d),
                                          cfg.spectral_channels(stage), cfg.sar_channels(stage),
                                          st.heads, cfg.effective_reduction(stage),
                                          cfg.mlp_ratio, cfg.cross_attention));
  return s;
}

BranchTokens EncoderStage::forward(const BranchTokens& in, i64 h, i64 w) const {
  BranchTokens t = in;
  for (const EncoderBlock& b : blocks) t = b.forward(t, h, w);
  return t;
}

BranchFeatures EncoderStage::forward_maps(const BranchFeatures& in) const {
  i64 h = in.spectral.dim(2), w = in.spectral.dim(3);
  if (in.sar.dim(2) != h || in.sar.dim(3) != w || in.sar.dim(0) != in.spectral.dim(0))
    throw ShapeError("encoder stage: branch maps disagree, " + shape_str(in.spectral.shape()) +
                     " vs " + shape_str(in.sar.shape()));
  BranchTokens t{map_to_tokens(in.spectral), map_to_tokens(in.sar)};
  t = forward(t, h, w);
  return BranchFeatures{tokens_to_map(t.spectral, h, w), tokens_to_map(t.sar, h, w)};
}

i64 EncoderStage::flops(i64 h, i64 w) const {
  i64 total = 0;
  for (const EncoderBlock& b : blocks) total += b.flops(h, w);
  return total;
}

// --------------------------------------------------------------------------

std::array<std::pair<i64, i64>, 4> NetConfig::stage_resolutions(i64 in_h, i64 in_w) const {
  std::array<std::pair<i64, i64>, 4> res;
  i64 h = conv_out_extent(in_h, 7, 4, 3);
  i64 w = conv_out_extent(in_w, 7, 4, 3);
  res[0] = {h, w};
  for (int i = 1; i < 4; ++i) {
    h = conv_out_extent(h, 3, 2, 1);
    w = conv_out_extent(w, 3, 2, 1);
    res[static_cast<size_t>(i)] = {h, w};
  }
  return res;
}

void NetConfig::validate(i64 in_h, i64 in_w) const {
  if (in_spectral <= 0 || in_sar <= 0) throw ConfigError("input band counts must be positive");
  if (n_classes < 1 || n_classes > 255) throw ConfigError("n_classes out of range");
  if (mlp_ratio < 1) throw ConfigError("mlp_ratio must be >= 1");
  if (decoder_dim < 1) throw ConfigError("decoder_dim must be >= 1");
  if (split.num <= 0 || split.den <= 0 || split.num >= split.den)
    throw ConfigError("split ratio must be a proper fraction");
  if (in_h < 7 || in_w < 7)
    throw ConfigError("input extent " + std::to_string(in_h) + "x" + std::to_string(in_w) +
                      " smaller than the stage-1 kernel");
  auto res = stage_resolutions(in_h, in_w);
  for (int i = 0; i < 4; ++i) {
    const StageSettings& st = stages[static_cast<size_t>(i)];
    if (st.channels < 2 || st.depth < 0 || st.heads < 1 || st.reduction < 1)
      throw ConfigError("stage " + std::to_string(i + 1) + " settings out of range");
    i64 cs = spectral_channels(i);
    i64 ca = sar_channels(i);
    if (cs <= 0 || ca <= 0)
      throw ConfigError("stage " + std::to_string(i + 1) + " split ratio leaves a branch empty");
    if (cs % st.heads != 0 || ca % st.heads != 0)
      throw ConfigError("stage " + std::to_string(i + 1) + ": heads " +
                        std::to_string(st.heads) + " do not divide branch widths " +
                        std::to_string(cs) + "/" + std::to_string(ca));
    if (mmam && st.channels % gate_reduction != 0)
      throw ConfigError("stage " + std::to_string(i + 1) + ": gate squeeze factor " +
                        std::to_string(gate_reduction) + " does not divide " +
                        std::to_string(st.channels) + " channels");
    i64 r = effective_reduction(i);
    auto [h, w] = res[static_cast<size_t>(i)];
    if (h < 1 || w < 1)
      throw ConfigError("input too small: stage " + std::to_string(i + 1) + " has no tokens");
    if (r > 1 && (h % r != 0 || w % r != 0))
      throw ConfigError("stage " + std::to_string(i + 1) + ": reduction " + std::to_string(r) +
                        " does not divide the " + std::to_string(h) + "x" + std::to_string(w) +
                        " token grid");
  }
}

NetConfig NetConfig::desk() { return NetConfig{}; }

NetConfig NetConfig::full_size() {
  NetConfig cfg;
  cfg.stages = {StageSettings{64, 3, 1, 8}, StageSettings{128, 4, 2, 4},
                StageSettings{320, 6, 5, 2}, StageSettings{512, 3, 8, 1}};
  cfg.decoder_dim = 768;
  return cfg;
}

}  // namespace lulcseg
