#include <doctest.h>

#include <cmath>

#include "lulcseg/network.hpp"
#include "lulcseg/rng.hpp"
#include "oracles.hpp"

using namespace lulcseg;

namespace {

Tensor random_f64(Shape shape, SplitMix64& rng, double scale = 1.0) {
  Tensor t = Tensor::zeros(shape, DType::f64);
  for (i64 i = 0; i < t.numel(); ++i) t.set_value_at(i, rng.normal() * scale);
  return t;
}

std::vector<double> weights_of(const Tensor& t) { return t.to_vector(); }

void zero_param(Tensor t) {
  for (i64 i = 0; i < t.numel(); ++i) t.set_value_at(i, 0.0);
}

}  // namespace

TEST_CASE("stage-1 embedding halves resolution twice: 64 -> 16, then 8, 4, 2") {
  NetConfig cfg = NetConfig::desk();
  auto res = cfg.stage_resolutions(64, 64);
  CHECK(res[0] == std::pair<i64, i64>{16, 16});
  CHECK(res[1] == std::pair<i64, i64>{8, 8});
  CHECK(res[2] == std::pair<i64, i64>{4, 4});
  CHECK(res[3] == std::pair<i64, i64>{2, 2});
}

TEST_CASE("a 510x510 input reaches 128x128 after the stage-1 embedding") {
  NetConfig cfg = NetConfig::full_size();
  auto res = cfg.stage_resolutions(510, 510);
  CHECK(res[0] == std::pair<i64, i64>{128, 128});
}

TEST_CASE("constant input through zero embedding kernels gives zero tokens") {
  ParamStore ps(DType::f64, 5);
  OverlapPatchEmbed embed = OverlapPatchEmbed::make(ps, "e", 3, 8, 7, 4, 3);
  zero_param(embed.proj.weight);
  zero_param(embed.proj.bias);
  Tensor x = Tensor::full({1, 3, 16, 16}, 2.5, DType::f64);
  i64 h = 0, w = 0;
  Tensor tokens = embed.forward(x, &h, &w);
  CHECK(h == 4);
  CHECK(w == 4);
  // Layer norm of the all-zero rows keeps beta = 0.
  for (i64 i = 0; i < tokens.numel(); ++i) CHECK(tokens.value_at(i) == 0.0);
}

TEST_CASE("attention with R=1 matches the dense scalar-loop oracle") {
  SplitMix64 rng(31337);
  for (int instance = 0; instance < 10; ++instance) {
    i64 channels = (instance % 2) ? 6 : 4;
    i64 heads = (instance % 2) ? 2 : 1;
    i64 n = 3 + instance % 5;
    ParamStore ps(DType::f64, 1000 + static_cast<std::uint64_t>(instance));
    auto attn = EfficientSelfAttention::make(ps, "sa", channels, heads, 1);
    Tensor x = random_f64({1, n, channels}, rng);

    Tensor y = attn.forward(x, 1, n);  // grid shape is irrelevant at R=1

    oracles::DenseAttentionRef ref;
    ref.channels = channels;
    ref.heads = heads;
    ref.wq = weights_of(attn.query.weight);
    ref.bq = weights_of(attn.query.bias);
    ref.wk = weights_of(attn.key.weight);
    ref.bk = weights_of(attn.key.bias);
    ref.wv = weights_of(attn.value.weight);
    ref.bv = weights_of(attn.value.bias);
    ref.wo = weights_of(attn.out.weight);
    ref.bo = weights_of(attn.out.bias);
    std::vector<std::vector<double>> tokens;
    for (i64 t = 0; t < n; ++t) {
      std::vector<double> row;
      for (i64 c = 0; c < channels; ++c) row.push_back(x.value_at(t * channels + c));
      tokens.push_back(row);
    }
    auto expect = ref.run(tokens, tokens);
    for (i64 t = 0; t < n; ++t)
      for (i64 c = 0; c < channels; ++c)
        CHECK(std::fabs(y.value_at(t * channels + c) -
                        expect[static_cast<size_t>(t)][static_cast<size_t>(c)]) < 1e-12);
  }
}

TEST_CASE("the reduction conv shortens the key/value sequence by R per side") {
  ParamStore ps(DType::f64, 77);
  auto attn = EfficientSelfAttention::make(ps, "sa", 8, 2, 4);
  // 64x64 grid = 4096 tokens; kernel=stride=4 leaves a 16x16 = 256-token
  // K/V sequence.
  CHECK(attn.reduce.has_value());
  CHECK(attn.reduce->kernel == 4);
  CHECK(attn.reduce->stride == 4);
  CHECK(conv_out_extent(64, 4, 4, 0) * conv_out_extent(64, 4, 4, 0) == 256);
  // And the flop model agrees with that sequence length.
  i64 flops_r4 = attn.flops(64, 64);
  ParamStore ps1(DType::f64, 78);
  auto dense = EfficientSelfAttention::make(ps1, "sa", 8, 2, 1);
  CHECK(flops_r4 < dense.flops(64, 64));
}

TEST_CASE("a single token attends only to itself") {
  SplitMix64 rng(4);
  ParamStore ps(DType::f64, 21);
  auto attn = EfficientSelfAttention::make(ps, "sa", 4, 1, 1);
  Tensor x = random_f64({1, 1, 4}, rng);
  Tensor y = attn.forward(x, 1, 1);
  // softmax over one logit is 1, so the result is out(v(x)).
  Tensor v = attn.value.forward(x);
  Tensor expect = attn.out.forward(v);
  for (i64 i = 0; i < y.numel(); ++i)
    CHECK(y.value_at(i) == doctest::Approx(expect.value_at(i)).epsilon(1e-14));
}

TEST_CASE("cross attention with a zeroed value projection is the identity") {
  SplitMix64 rng(8);
  ParamStore ps(DType::f64, 33);
  auto cross = CrossAttention::make(ps, "ca", 6, 2, 2, 1);
  zero_param(cross.value.weight);
  zero_param(cross.value.bias);
  zero_param(cross.out.bias);
  Tensor primary = random_f64({2, 9, 6}, rng);
  Tensor aux = random_f64({2, 9, 2}, rng);
  Tensor y = cross.forward(primary, aux, 3, 3);
  for (i64 i = 0; i < y.numel(); ++i) CHECK(y.value_at(i) == primary.value_at(i));
}

TEST_CASE("cross attention of an all-zero auxiliary branch is the identity") {
  SplitMix64 rng(9);
  ParamStore ps(DType::f64, 34);
  auto cross = CrossAttention::make(ps, "ca", 6, 2, 2, 1);
  // Freshly built modules have zero biases, so a zero auxiliary keeps zero
  // keys and values all the way through.
  Tensor primary = random_f64({1, 4, 6}, rng);
  Tensor aux = Tensor::zeros({1, 4, 2}, DType::f64);
  Tensor y = cross.forward(primary, aux, 2, 2);
  for (i64 i = 0; i < y.numel(); ++i) CHECK(y.value_at(i) == primary.value_at(i));
}

TEST_CASE("cross attention small instance matches the dense oracle") {
  SplitMix64 rng(10);
  ParamStore ps(DType::f64, 35);
  auto cross = CrossAttention::make(ps, "ca", 2, 3, 1, 1);
  Tensor primary = random_f64({1, 4, 2}, rng);
  Tensor aux = random_f64({1, 4, 3}, rng);
  Tensor y = cross.forward(primary, aux, 2, 2);

  // Reference: primary + attention(norm(primary), adjust(aux)).
  auto norm_row = [&](std::vector<double> row) {
    double mu = 0;
    for (double v : row) mu += v;
    mu /= static_cast<double>(row.size());
    double var = 0;
    for (double v : row) var += (v - mu) * (v - mu);
    var /= static_cast<double>(row.size());
    double rstd = 1.0 / std::sqrt(var + 1e-5);
    std::vector<double> out;
    for (size_t i = 0; i < row.size(); ++i) {
      double xhat = (row[i] - mu) * rstd;
      out.push_back(xhat * cross.primary_norm.gamma.value_at(static_cast<i64>(i)) +
                    cross.primary_norm.beta.value_at(static_cast<i64>(i)));
    }
    return out;
  };

  oracles::DenseAttentionRef ref;
  ref.channels = 2;
  ref.heads = 1;
  ref.wq = weights_of(cross.query.weight);
  ref.bq = weights_of(cross.query.bias);
  ref.wk = weights_of(cross.key.weight);
  ref.bk = weights_of(cross.key.bias);
  ref.wv = weights_of(cross.value.weight);
  ref.bv = weights_of(cross.value.bias);
  ref.wo = weights_of(cross.out.weight);
  ref.bo = weights_of(cross.out.bias);

  std::vector<std::vector<double>> q_tokens, kv_tokens;
  std::vector<double> adj_w = weights_of(cross.adjust.weight);
  std::vector<double> adj_b = weights_of(cross.adjust.bias);
  for (i64 t = 0; t < 4; ++t) {
    std::vector<double> prow{primary.value_at(t * 2), primary.value_at(t * 2 + 1)};
    q_tokens.push_back(norm_row(prow));
    std::vector<double> arow{aux.value_at(t * 3), aux.value_at(t * 3 + 1),
                             aux.value_at(t * 3 + 2)};
    kv_tokens.push_back(oracles::DenseAttentionRef::apply_linear(adj_w, adj_b, arow, 3, 2));
  }
  auto attn_out = ref.run(q_tokens, kv_tokens);
  for (i64 t = 0; t < 4; ++t)
    for (i64 c = 0; c < 2; ++c)
      CHECK(std::fabs(y.value_at(t * 2 + c) - (primary.value_at(t * 2 + c) +
                                               attn_out[static_cast<size_t>(t)][static_cast<size_t>(c)])) <
            1e-12);
}

TEST_CASE("mix_ffn with zeroed projections reproduces its input") {
  SplitMix64 rng(11);
  ParamStore ps(DType::f64, 36);
  auto ffn = MixFfn::make(ps, "ffn", 5, 4);
  zero_param(ffn.project.weight);
  zero_param(ffn.project.bias);
  Tensor x = random_f64({2, 9, 5}, rng);
  Tensor y = ffn.forward(x, 3, 3);
  for (i64 i = 0; i < y.numel(); ++i) CHECK(y.value_at(i) == x.value_at(i));
}

TEST_CASE("mix_ffn hidden width is mlp_ratio times the channel count") {
  ParamStore ps(DType::f64, 37);
  auto ffn = MixFfn::make(ps, "ffn", 6, 4);
  CHECK(ffn.hidden == 24);
  CHECK(ffn.expand.weight.shape() == Shape{6, 24});
  CHECK(ffn.depthwise.groups == 24);
  // Parameter count from the expansion convention.
  i64 expected = 2 * 6                    // norm
                 + 6 * 24 + 24            // expand
                 + 24 * 9 + 24            // depth-wise 3x3
                 + 24 * 6 + 6;            // project
  i64 total = 0;
  for (const auto& e : ps.entries()) total += e.tensor.numel();
  CHECK(total == expected);
}

TEST_CASE("mix_ffn rejects token counts that do not form the grid") {
  ParamStore ps(DType::f64, 38);
  auto ffn = MixFfn::make(ps, "ffn", 4, 2);
  Tensor x = Tensor::zeros({1, 10, 4}, DType::f64);
  CHECK_THROWS_AS(ffn.forward(x, 3, 3), ShapeError);
}

TEST_CASE("a depth-0 stage is the identity on both branches") {
  NetConfig cfg = NetConfig::desk();
  cfg.stages[0].depth = 0;
  ParamStore ps(DType::f64, 40);
  EncoderStage stage = EncoderStage::make(ps, "s1", cfg, 0);
  SplitMix64 rng(12);
  BranchFeatures in{random_f64({1, cfg.spectral_channels(0), 4, 4}, rng),
                    random_f64({1, cfg.sar_channels(0), 4, 4}, rng)};
  BranchFeatures out = stage.forward_maps(in);
  for (i64 i = 0; i < in.spectral.numel(); ++i)
    CHECK(out.spectral.value_at(i) == in.spectral.value_at(i));
  for (i64 i = 0; i < in.sar.numel(); ++i) CHECK(out.sar.value_at(i) == in.sar.value_at(i));
}

TEST_CASE("desk config splits channels 3/4 to 1/4 through all four stages") {
  NetConfig cfg = NetConfig::desk();
  i64 expect_spec[] = {12, 24, 36, 48};
  i64 expect_sar[] = {4, 8, 12, 16};
  for (int i = 0; i < 4; ++i) {
    CHECK(cfg.spectral_channels(i) == expect_spec[i]);
    CHECK(cfg.sar_channels(i) == expect_sar[i]);
  }
}

TEST_CASE("without cross attention the two branches are independent encoders") {
  NetConfig cfg = NetConfig::desk();
  cfg.cross_attention = false;
  cfg.stages[0].depth = 2;
  ParamStore ps(DType::f64, 41);
  EncoderStage stage = EncoderStage::make(ps, "s1", cfg, 0);
  SplitMix64 rng(13);
  Tensor spectral = random_f64({1, cfg.spectral_channels(0), 8, 8}, rng);
  Tensor sar_a = random_f64({1, cfg.sar_channels(0), 8, 8}, rng);
  Tensor sar_b = random_f64({1, cfg.sar_channels(0), 8, 8}, rng);
  BranchFeatures out_a = stage.forward_maps({spectral, sar_a});
  BranchFeatures out_b = stage.forward_maps({spectral, sar_b});
  for (i64 i = 0; i < out_a.spectral.numel(); ++i)
    CHECK(out_a.spectral.value_at(i) == out_b.spectral.value_at(i));
}

TEST_CASE("stage resolutions follow the exact halving chain for 32|H") {
  NetConfig cfg = NetConfig::desk();
  for (i64 h : {32, 64, 96}) {
    auto res = cfg.stage_resolutions(h, h);
    CHECK(res[0].first == h / 4);
    CHECK(res[1].first == h / 8);
    CHECK(res[2].first == h / 16);
    CHECK(res[3].first == h / 32);
  }
}

TEST_CASE("permuting batch elements permutes network outputs identically") {
  NetConfig cfg = NetConfig::desk();
  Network net(cfg, DType::f32, 55);
  SplitMix64 rng(14);
  Tensor spectral = Tensor::zeros({2, cfg.in_spectral, 32, 32});
  Tensor sar = Tensor::zeros({2, cfg.in_sar, 32, 32});
  for (i64 i = 0; i < spectral.numel(); ++i) spectral.set_value_at(i, rng.uniform(0, 1));
  for (i64 i = 0; i < sar.numel(); ++i) sar.set_value_at(i, rng.uniform(0, 1));
  NoGradGuard no_grad;
  Tensor out = net.forward(spectral, sar);

  // Swap the two examples.
  auto swap_batch = [](const Tensor& t) {
    i64 per = t.numel() / 2;
    Tensor s = Tensor::zeros(t.shape(), t.dtype());
    for (i64 i = 0; i < per; ++i) {
      s.set_value_at(i, t.value_at(per + i));
      s.set_value_at(per + i, t.value_at(i));
    }
    return s;
  };
  Tensor out_swapped = net.forward(swap_batch(spectral), swap_batch(sar));
  i64 per = out.numel() / 2;
  for (i64 i = 0; i < per; ++i) {
    CHECK(out_swapped.value_at(i) == out.value_at(per + i));
    CHECK(out_swapped.value_at(per + i) == out.value_at(i));
  }
}

TEST_CASE("configs whose widths or grids cannot flow are rejected at build") {
  NetConfig cfg = NetConfig::desk();
  cfg.stages[1].heads = 5;  // 24 and 8 are not divisible by 5
  CHECK_THROWS_AS(cfg.validate(64, 64), ConfigError);

  NetConfig odd = NetConfig::desk();
  CHECK_THROWS_AS(odd.validate(40, 40), ConfigError);  // stage-1 grid 10, R=8 does not divide
  odd.efficient_sa = false;                            // forcing R=1 makes the same grid legal
  odd.validate(40, 40);

  NetConfig tiny = NetConfig::desk();
  CHECK_THROWS_AS(tiny.validate(4, 4), ConfigError);
}
