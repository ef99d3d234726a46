#pragma once

#include <string>
#include <vector>

#include "lulcseg/ops.hpp"
#include "lulcseg/rng.hpp"
#include "lulcseg/tensor.hpp"

namespace lulcseg {

enum class Init : std::uint8_t {
  kZeros,
  kOnes,
  kTruncNormal,  // truncated normal, std 0.02, clipped at 2 sigma
  kConvFanOut,   // normal with std sqrt(2 / fan_out)
};

// Owns every trainable tensor of a model. Parameters are initialized at
// registration time from a single SplitMix64 stream, so creation order alone
// fixes every initial value.
class ParamStore {
 public:
  ParamStore(DType dtype, std::uint64_t seed) : dtype_(dtype), rng_(seed) {}

  struct Entry {
    std::string name;
    Tensor tensor;
  };

  Tensor create(const std::string& name, Shape shape, Init init, double fan_out = 0.0);

  const std::vector<Entry>& entries() const { return entries_; }
  Tensor find(const std::string& name) const;  // undefined tensor if missing
  i64 total_params() const;
  DType dtype() const { return dtype_; }
  void zero_grad();

 private:
  DType dtype_;
  SplitMix64 rng_;
  std::vector<Entry> entries_;
};

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
  i64 in = 0, out = 0;

  static Linear make(ParamStore& ps, const std::string& name, i64 in, i64 out);
  Tensor forward(const Tensor& x) const { return add_bias(matmul(x, weight), bias); }
  i64 param_count() const { return in * out + out; }
  i64 flops(i64 rows) const { return rows * (2 * in + 1) * out; }
};

struct Conv2d {
  Tensor weight;  // [out, in/groups, k, k]
  Tensor bias;    // [out]
  i64 in = 0, out = 0, kernel = 0;
  int stride = 1, pad = 0, groups = 1;

  static Conv2d make(ParamStore& ps, const std::string& name, i64 in, i64 out, i64 kernel,
                     int stride, int pad, int groups = 1);
  Tensor forward(const Tensor& x) const {
    return conv2d(x, weight, bias, stride, pad, groups);
  }
  i64 param_count() const { return out * (in / groups) * kernel * kernel + out; }
  i64 flops(i64 out_h, i64 out_w) const {
    return out_h * out_w * out * (2 * (in / groups) * kernel * kernel + 1);
  }
};

struct LayerNorm {
  Tensor gamma;  // [dim]
  Tensor beta;   // [dim]
  i64 dim = 0;
  double eps = 1e-5;

  static LayerNorm make(ParamStore& ps, const std::string& name, i64 dim);
  Tensor forward(const Tensor& x) const { return layer_norm(x, gamma, beta, eps); }
  i64 param_count() const { return 2 * dim; }
};

// [b,c,h,w] <-> [b, h*w, c] token layout conversions.
Tensor map_to_tokens(const Tensor& map);
Tensor tokens_to_map(const Tensor& tokens, i64 h, i64 w);

}  // namespace lulcseg
