#include "lulcseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "lulcseg/decoder.hpp"
#include "lulcseg/loss.hpp"
#include "lulcseg/network.hpp"
#include "lulcseg/rng.hpp"

namespace lulcseg {

double gradient_rel_err(double analytic, double numeric) {
  double scale = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / scale;
}

GradCheckResult check_gradients(const std::string& name,
                                const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                                std::vector<Tensor> inputs, const GradCheckOptions& opts) {
  GradCheckResult result;
  result.name = name;

  for (Tensor& t : inputs) t.zero_grad();
  Tensor out = fn(inputs);
  if (out.numel() != 1)
    throw ShapeError("gradient check '" + name + "': function must return a scalar");
  backward(out);

  SplitMix64 rng(opts.seed);
  for (Tensor& t : inputs) {
    if (!t.requires_grad()) continue;
    Tensor analytic = t.grad();
    i64 n = t.numel();
    std::vector<i64> coords;
    if (n <= opts.max_coords) {
      for (i64 i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (i64 k = 0; k < opts.max_coords; ++k)
        coords.push_back(static_cast<i64>(rng.uniform_int(static_cast<std::uint64_t>(n))));
      std::sort(coords.begin(), coords.end());
      coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    }
    for (i64 c : coords) {
      double saved = t.value_at(c);
      double numeric;
      {
        NoGradGuard no_grad;
        t.set_value_at(c, saved + opts.step);
        double up = fn(inputs).scalar_value();
        t.set_value_at(c, saved - opts.step);
        double down = fn(inputs).scalar_value();
        t.set_value_at(c, saved);
        numeric = (up - down) / (2.0 * opts.step);
      }
      double a = analytic.defined() ? analytic.value_at(c) : 0.0;
      double err = gradient_rel_err(a, numeric);
      result.max_rel_err = std::max(result.max_rel_err, err);
      result.coords_checked++;
    }
  }
  result.pass = result.max_rel_err < opts.tolerance;
  return result;
}

namespace {

Tensor random_tensor(Shape shape, SplitMix64& rng, double scale = 1.0) {
  Tensor t = Tensor::zeros(shape, DType::f64, /*requires_grad=*/true);
  for (i64 i = 0; i < t.numel(); ++i) t.set_value_at(i, rng.normal() * scale);
  return t;
}

Tensor random_positive(Shape shape, SplitMix64& rng, double lo, double hi) {
  Tensor t = Tensor::zeros(shape, DType::f64, /*requires_grad=*/true);
  for (i64 i = 0; i < t.numel(); ++i) t.set_value_at(i, rng.uniform(lo, hi));
  return t;
}

// Scalarize through a fixed random projection so every output coordinate
// influences the loss.
Tensor project(const Tensor& out, const Tensor& weights) { return sum_all(mul(out, weights)); }

Tensor fixed_weights(Shape shape, SplitMix64& rng) {
  Tensor w = Tensor::zeros(shape, DType::f64);
  for (i64 i = 0; i < w.numel(); ++i) w.set_value_at(i, rng.uniform(-1.0, 1.0));
  return w;
}

}  // namespace

std::vector<GradCheckResult> run_op_gradient_suite(std::uint64_t seed) {
  std::vector<GradCheckResult> results;
  SplitMix64 rng(seed);
  GradCheckOptions opts;
  opts.seed = seed ^ 0x5eed;

  const std::vector<Shape> shapes = {{5}, {3, 4}, {2, 3, 4}};

  auto check_unary = [&](const std::string& name, const std::function<Tensor(const Tensor&)>& op,
                         bool positive_domain = false) {
    for (const Shape& s : shapes) {
      Tensor x = positive_domain ? random_positive(s, rng, 0.1, 2.0) : random_tensor(s, rng);
      Tensor w = fixed_weights(s, rng);
      results.push_back(check_gradients(
          name + " " + shape_str(s),
          [&op, w](const std::vector<Tensor>& in) { return project(op(in[0]), w); }, {x}, opts));
    }
  };

  check_unary("neg", [](const Tensor& x) { return neg(x); });
  check_unary("add_scalar", [](const Tensor& x) { return add_scalar(x, 0.7); });
  check_unary("mul_scalar", [](const Tensor& x) { return mul_scalar(x, -1.3); });
  check_unary("scalar_sub", [](const Tensor& x) { return scalar_sub(2.0, x); });
  check_unary("exp", [](const Tensor& x) { return exp(x); });
  check_unary("log", [](const Tensor& x) { return log(x); }, true);
  check_unary("gelu", [](const Tensor& x) { return gelu(x); });
  check_unary("sigmoid", [](const Tensor& x) { return sigmoid(x); });
  check_unary("softplus", [](const Tensor& x) { return softplus(x); });
  check_unary("pow_const 1.7", [](const Tensor& x) { return pow_const(x, 1.7); }, true);
  check_unary("pow_const 2", [](const Tensor& x) { return pow_const(x, 2.0); });

  for (const Shape& s : shapes) {
    Tensor x = random_tensor(s, rng);
    results.push_back(check_gradients(
        "mean_all " + shape_str(s),
        [](const std::vector<Tensor>& in) { return mean_all(in[0]); }, {x}, opts));
    Tensor y = random_tensor(s, rng);
    results.push_back(check_gradients(
        "sum_all " + shape_str(s),
        [](const std::vector<Tensor>& in) { return sum_all(in[0]); }, {y}, opts));
  }

  for (const Shape& s : shapes) {
    Tensor a = random_tensor(s, rng), b = random_tensor(s, rng);
    Tensor w = fixed_weights(s, rng);
    for (const char* name : {"add", "sub", "mul"}) {
      std::string n = name;
      results.push_back(check_gradients(
          n + " " + shape_str(s),
          [n, w](const std::vector<Tensor>& in) {
            Tensor r = n == "add" ? add(in[0], in[1])
                                  : (n == "sub" ? sub(in[0], in[1]) : mul(in[0], in[1]));
            return project(r, w);
          },
          {a, b}, opts));
    }
  }

  // softmax / log_softmax over several axes
  for (const Shape& s : std::vector<Shape>{{7}, {3, 5}, {2, 3, 4}}) {
    Tensor x = random_tensor(s, rng);
    Tensor w = fixed_weights(s, rng);
    int axis = static_cast<int>(s.size()) - 1;
    results.push_back(check_gradients(
        "softmax " + shape_str(s),
        [axis, w](const std::vector<Tensor>& in) { return project(softmax(in[0], axis), w); },
        {x}, opts));
    results.push_back(check_gradients(
        "log_softmax " + shape_str(s),
        [axis, w](const std::vector<Tensor>& in) { return project(log_softmax(in[0], axis), w); },
        {x}, opts));
  }
  {
    Tensor x = random_tensor({2, 4, 3}, rng);
    Tensor w = fixed_weights({2, 4, 3}, rng);
    results.push_back(check_gradients(
        "softmax axis0",
        [w](const std::vector<Tensor>& in) { return project(softmax(in[0], 0), w); }, {x}, opts));
  }

  // reshape / permute / concat / split
  for (int variant = 0; variant < 3; ++variant) {
    Tensor x = random_tensor({2, 3, 4}, rng);
    if (variant == 0) {
      Tensor w = fixed_weights({4, 6}, rng);
      results.push_back(check_gradients(
          "reshape",
          [w](const std::vector<Tensor>& in) { return project(reshape(in[0], {4, 6}), w); }, {x},
          opts));
    } else if (variant == 1) {
      Tensor w = fixed_weights({4, 2, 3}, rng);
      results.push_back(check_gradients(
          "permute",
          [w](const std::vector<Tensor>& in) { return project(permute(in[0], {2, 0, 1}), w); },
          {x}, opts));
    } else {
      Tensor y = random_tensor({2, 2, 4}, rng);
      Tensor w = fixed_weights({2, 5, 4}, rng);
      results.push_back(check_gradients(
          "concat",
          [w](const std::vector<Tensor>& in) {
            return project(concat({in[0], in[1]}, 1), w);
          },
          {x, y}, opts));
      Tensor w0 = fixed_weights({2, 3, 1}, rng);
      Tensor w1 = fixed_weights({2, 3, 3}, rng);
      results.push_back(check_gradients(
          "split",
          [w0, w1](const std::vector<Tensor>& in) {
            auto parts = split(in[0], {1, 3}, 2);
            return add(project(parts[0], w0), project(parts[1], w1));
          },
          {x}, opts));
    }
  }

  {
    Tensor x = random_tensor({2, 3, 4, 5}, rng);
    Tensor w = fixed_weights({2, 3}, rng);
    results.push_back(check_gradients(
        "mean_axes",
        [w](const std::vector<Tensor>& in) { return project(mean_axes(in[0], {2, 3}), w); }, {x},
        opts));
    Tensor w2 = fixed_weights({3, 5}, rng);
    results.push_back(check_gradients(
        "mean_axes 0,2",
        [w2](const std::vector<Tensor>& in) { return project(mean_axes(in[0], {0, 2}), w2); },
        {x}, opts));
    Tensor w3 = fixed_weights({2, 3, 5}, rng);
    results.push_back(check_gradients(
        "mean_axes 2",
        [w3](const std::vector<Tensor>& in) { return project(mean_axes(in[0], {2}), w3); }, {x},
        opts));
  }

  // matmul variants
  {
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 5}, rng);
    Tensor w = fixed_weights({3, 5}, rng);
    results.push_back(check_gradients(
        "matmul 2d",
        [w](const std::vector<Tensor>& in) { return project(matmul(in[0], in[1]), w); }, {a, b},
        opts));
  }
  {
    Tensor a = random_tensor({2, 3, 4}, rng), b = random_tensor({2, 4, 5}, rng);
    Tensor w = fixed_weights({2, 3, 5}, rng);
    results.push_back(check_gradients(
        "matmul batched",
        [w](const std::vector<Tensor>& in) { return project(matmul(in[0], in[1]), w); }, {a, b},
        opts));
  }
  {
    Tensor a = random_tensor({2, 3, 4}, rng), b = random_tensor({4, 5}, rng);
    Tensor w = fixed_weights({2, 3, 5}, rng);
    results.push_back(check_gradients(
        "matmul shared rhs",
        [w](const std::vector<Tensor>& in) { return project(matmul(in[0], in[1]), w); }, {a, b},
        opts));
  }
  {
    Tensor x = random_tensor({2, 3, 4}, rng), b = random_tensor({4}, rng);
    Tensor w = fixed_weights({2, 3, 4}, rng);
    results.push_back(check_gradients(
        "add_bias",
        [w](const std::vector<Tensor>& in) { return project(add_bias(in[0], in[1]), w); }, {x, b},
        opts));
  }

  // conv2d variants: padded stride-1, strided stage-1 geometry, depth-wise
  {
    Tensor x = random_tensor({2, 3, 6, 6}, rng);
    Tensor w = random_tensor({4, 3, 3, 3}, rng, 0.5);
    Tensor b = random_tensor({4}, rng);
    Tensor pw = fixed_weights({2, 4, 6, 6}, rng);
    results.push_back(check_gradients(
        "conv2d 3x3 pad1",
        [pw](const std::vector<Tensor>& in) {
          return project(conv2d(in[0], in[1], in[2], 1, 1, 1), pw);
        },
        {x, w, b}, opts));
  }
  {
    Tensor x = random_tensor({1, 2, 9, 9}, rng);
    Tensor w = random_tensor({3, 2, 7, 7}, rng, 0.2);
    Tensor b = random_tensor({3}, rng);
    Tensor pw = fixed_weights({1, 3, 3, 3}, rng);
    results.push_back(check_gradients(
        "conv2d 7x7 stride4",
        [pw](const std::vector<Tensor>& in) {
          return project(conv2d(in[0], in[1], in[2], 4, 3, 1), pw);
        },
        {x, w, b}, opts));
  }
  {
    Tensor x = random_tensor({2, 4, 5, 5}, rng);
    Tensor w = random_tensor({4, 1, 3, 3}, rng, 0.5);
    Tensor b = random_tensor({4}, rng);
    Tensor pw = fixed_weights({2, 4, 5, 5}, rng);
    results.push_back(check_gradients(
        "conv2d depthwise",
        [pw](const std::vector<Tensor>& in) {
          return project(conv2d(in[0], in[1], in[2], 1, 1, 4), pw);
        },
        {x, w, b}, opts));
  }

  // layer_norm over three widths
  for (i64 width : {3, 8, 16}) {
    Tensor x = random_tensor({4, width}, rng);
    Tensor g = random_positive({width}, rng, 0.5, 1.5);
    Tensor b = random_tensor({width}, rng);
    Tensor w = fixed_weights({4, width}, rng);
    results.push_back(check_gradients(
        "layer_norm w" + std::to_string(width),
        [w](const std::vector<Tensor>& in) {
          return project(layer_norm(in[0], in[1], in[2], 1e-5), w);
        },
        {x, g, b}, opts));
  }

  // bilinear upsample: enlarge, shrink, identity
  for (auto [oh, ow] : std::vector<std::pair<i64, i64>>{{7, 9}, {2, 3}, {4, 4}}) {
    Tensor x = random_tensor({1, 2, 4, 4}, rng);
    Tensor w = fixed_weights({1, 2, oh, ow}, rng);
    i64 toh = oh, tow = ow;
    results.push_back(check_gradients(
        "bilinear_upsample " + std::to_string(oh) + "x" + std::to_string(ow),
        [w, toh, tow](const std::vector<Tensor>& in) {
          return project(bilinear_upsample(in[0], toh, tow), w);
        },
        {x}, opts));
  }

  {
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    Tensor g = random_positive({2, 3}, rng, 0.1, 0.9);
    Tensor w = fixed_weights({2, 3, 4, 4}, rng);
    results.push_back(check_gradients(
        "scale_channels",
        [w](const std::vector<Tensor>& in) { return project(scale_channels(in[0], in[1]), w); },
        {x, g}, opts));
  }

  {
    Labels labels({2, 3, 3});
    for (size_t i = 0; i < labels.data.size(); ++i)
      labels.data[i] = static_cast<std::uint8_t>(rng.uniform_int(4));
    Tensor x = random_tensor({2, 4, 3, 3}, rng);
    Tensor w = fixed_weights({2, 3, 3}, rng);
    results.push_back(check_gradients(
        "gather_class",
        [w, labels](const std::vector<Tensor>& in) {
          return project(gather_class(in[0], labels), w);
        },
        {x}, opts));
  }

  // losses
  for (i64 hw : {2, 3, 4}) {
    Labels labels({1, hw, hw});
    for (size_t i = 0; i < labels.data.size(); ++i)
      labels.data[i] = static_cast<std::uint8_t>(rng.uniform_int(5));
    Tensor logits = random_tensor({1, 5, hw, hw}, rng);
    FocalConfig focal;
    focal.gamma = 2.0;
    focal.alpha = {0.5, 1.5, 1.0, 0.7, 1.3};
    results.push_back(check_gradients(
        "focal_loss " + std::to_string(hw) + "x" + std::to_string(hw),
        [labels, focal](const std::vector<Tensor>& in) {
          return focal_loss(in[0], labels, focal);
        },
        {logits}, opts));
    results.push_back(check_gradients(
        "ce_loss " + std::to_string(hw) + "x" + std::to_string(hw),
        [labels](const std::vector<Tensor>& in) { return ce_loss(in[0], labels); }, {logits},
        opts));
    results.push_back(check_gradients(
        "bce_loss " + std::to_string(hw) + "x" + std::to_string(hw),
        [labels](const std::vector<Tensor>& in) { return bce_loss(in[0], labels); }, {logits},
        opts));
  }

  // architectural blocks, parameters included in the checked inputs
  auto params_of = [](ParamStore& ps) {
    std::vector<Tensor> all;
    for (const ParamStore::Entry& e : ps.entries()) all.push_back(e.tensor);
    return all;
  };

  for (i64 reduction : {1, 2}) {
    for (i64 grid : std::vector<i64>{2, 4}) {
      if (grid % reduction != 0) continue;
      ParamStore ps(DType::f64, seed + static_cast<std::uint64_t>(reduction * 10 + grid));
      auto attn = EfficientSelfAttention::make(ps, "sa", 6, 2, reduction);
      Tensor x = random_tensor({2, grid * grid, 6}, rng, 0.5);
      Tensor w = fixed_weights({2, grid * grid, 6}, rng);
      std::vector<Tensor> inputs{x};
      for (Tensor& p : params_of(ps)) inputs.push_back(p);
      results.push_back(check_gradients(
          "efficient_self_attention R" + std::to_string(reduction) + " g" + std::to_string(grid),
          [&attn, w, grid](const std::vector<Tensor>& in) {
            return project(attn.forward(in[0], grid, grid), w);
          },
          inputs, opts));
    }
  }

  for (i64 grid : std::vector<i64>{2, 3, 4}) {
    ParamStore ps(DType::f64, seed + static_cast<std::uint64_t>(grid) * 77);
    auto cross = CrossAttention::make(ps, "ca", 6, 4, 2, grid % 2 == 0 ? 2 : 1);
    Tensor primary = random_tensor({1, grid * grid, 6}, rng, 0.5);
    Tensor aux = random_tensor({1, grid * grid, 4}, rng, 0.5);
    Tensor w = fixed_weights({1, grid * grid, 6}, rng);
    std::vector<Tensor> inputs{primary, aux};
    for (Tensor& p : params_of(ps)) inputs.push_back(p);
    results.push_back(check_gradients(
        "cross_attention g" + std::to_string(grid),
        [&cross, w, grid](const std::vector<Tensor>& in) {
          return project(cross.forward(in[0], in[1], grid, grid), w);
        },
        inputs, opts));
  }

  for (i64 grid : std::vector<i64>{2, 3, 8}) {
    ParamStore ps(DType::f64, seed + static_cast<std::uint64_t>(grid) * 131);
    auto ffn = MixFfn::make(ps, "ffn", 5, 2);
    Tensor x = random_tensor({1, grid * grid, 5}, rng, 0.5);
    Tensor w = fixed_weights({1, grid * grid, 5}, rng);
    std::vector<Tensor> inputs{x};
    for (Tensor& p : params_of(ps)) inputs.push_back(p);
    results.push_back(check_gradients(
        "mix_ffn g" + std::to_string(grid),
        [&ffn, w, grid](const std::vector<Tensor>& in) {
          return project(ffn.forward(in[0], grid, grid), w);
        },
        inputs, opts));
  }

  for (i64 grid : std::vector<i64>{1, 2, 4}) {
    ParamStore ps(DType::f64, seed + static_cast<std::uint64_t>(grid) * 191);
    auto fuse = GatedFusion::make(ps, "gf", 3, 1, 4);
    Tensor spectral = random_tensor({2, 3, grid, grid}, rng, 0.5);
    Tensor sar = random_tensor({2, 1, grid, grid}, rng, 0.5);
    Tensor w = fixed_weights({2, 4, grid, grid}, rng);
    std::vector<Tensor> inputs{spectral, sar};
    for (Tensor& p : params_of(ps)) inputs.push_back(p);
    results.push_back(check_gradients(
        "gated_fusion g" + std::to_string(grid),
        [&fuse, w](const std::vector<Tensor>& in) {
          return project(fuse.forward(in[0], in[1]), w);
        },
        inputs, opts));
  }

  return results;
}

GradCheckResult run_network_gradient_check(std::uint64_t seed) {
  NetConfig cfg = NetConfig::desk();
  cfg.validate(32, 32);
  Network net(cfg, DType::f64, seed);
  SplitMix64 rng(seed ^ 0xabcdef);
  Tensor spectral = random_positive({1, cfg.in_spectral, 32, 32}, rng, 0.0, 1.0);
  Tensor sar = random_positive({1, cfg.in_sar, 32, 32}, rng, 0.2, 1.5);
  Labels labels({1, 8, 8});
  for (size_t i = 0; i < labels.data.size(); ++i)
    labels.data[i] = static_cast<std::uint8_t>(rng.uniform_int(static_cast<std::uint64_t>(cfg.n_classes)));
  FocalConfig focal;
  focal.gamma = 2.0;

  GradCheckOptions opts;
  opts.seed = seed ^ 0xfeed;
  opts.max_coords = 2;  // two sampled coordinates per parameter tensor

  std::vector<Tensor> inputs{spectral, sar};
  for (const ParamStore::Entry& e : net.params().entries()) inputs.push_back(e.tensor);

  return check_gradients(
      "network 32x32",
      [&net, &labels, &focal](const std::vector<Tensor>& in) {
        Tensor logits = net.forward(in[0], in[1]);
        return focal_loss(logits, labels, focal);
      },
      inputs, opts);
}

}  // namespace lulcseg
