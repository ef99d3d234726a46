#include "lulcseg/nn.hpp"

#include <cmath>

namespace lulcseg {

Tensor ParamStore::create(const std::string& name, Shape shape, Init init, double fan_out) {
  for (const Entry& e : entries_)
    if (e.name == name) throw ConfigError("duplicate parameter name: " + name);
  Tensor t = Tensor::zeros(shape, dtype_, /*requires_grad=*/true);
  i64 n = t.numel();
  switch (init) {
    case Init::kZeros:
      break;
    case Init::kOnes:
      for (i64 i = 0; i < n; ++i) t.set_value_at(i, 1.0);
      break;
    case Init::kTruncNormal:
      for (i64 i = 0; i < n; ++i) t.set_value_at(i, rng_.truncated_normal(0.02));
      break;
    case Init::kConvFanOut: {
      if (fan_out <= 0) throw ConfigError("conv init needs positive fan_out for " + name);
      double std = std::sqrt(2.0 / fan_out);
      for (i64 i = 0; i < n; ++i) t.set_value_at(i, rng_.normal() * std);
      break;
    }
  }
  entries_.push_back({name, t});
  return t;
}

Tensor ParamStore::find(const std::string& name) const {
  for (const Entry& e : entries_)
    if (e.name == name) return e.tensor;
  return Tensor();
}

i64 ParamStore::total_params() const {
  i64 total = 0;
  for (const Entry& e : entries_) total += e.tensor.numel();
  return total;
}

void ParamStore::zero_grad() {
  for (const Entry& e : entries_) e.tensor.impl()->grad = nullptr;
}

Linear Linear::make(ParamStore& ps, const std::string& name, i64 in, i64 out) {
  Linear l;
  l.in = in;
  l.out = out;
  l.weight = ps.create(name + ".w", {in, out}, Init::kTruncNormal);
  l.bias = ps.create(name + ".b", {out}, Init::kZeros);
  return l;
}

Conv2d Conv2d::make(ParamStore& ps, const std::string& name, i64 in, i64 out, i64 kernel,
                    int stride, int pad, int groups) {
  Conv2d c;
  c.in = in;
  c.out = out;
  c.kernel = kernel;
  c.stride = stride;
  c.pad = pad;
  c.groups = groups;
  double fan_out = static_cast<double>(kernel * kernel * out) / static_cast<double>(groups);
  c.weight = ps.create(name + ".w", {out, in / groups, kernel, kernel}, Init::kConvFanOut,
                       fan_out);
  c.bias = ps.create(name + ".b", {out}, Init::kZeros);
  return c;
}

LayerNorm LayerNorm::make(ParamStore& ps, const std::string& name, i64 dim) {
  LayerNorm ln;
  ln.dim = dim;
  ln.gamma = ps.create(name + ".g", {dim}, Init::kOnes);
  ln.beta = ps.create(name + ".b", {dim}, Init::kZeros);
  return ln;
}

Tensor map_to_tokens(const Tensor& map) {
  if (map.rank() != 4) throw ShapeError("map_to_tokens: expected [b,c,h,w]");
  i64 b = map.dim(0), c = map.dim(1), h = map.dim(2), w = map.dim(3);
  return reshape(permute(map, {0, 2, 3, 1}), {b, h * w, c});
}

Tensor tokens_to_map(const Tensor& tokens, i64 h, i64 w) {
  if (tokens.rank() != 3) throw ShapeError("tokens_to_map: expected [b,n,c]");
  i64 b = tokens.dim(0), n = tokens.dim(1), c = tokens.dim(2);
  if (n != h * w)
    throw ShapeError("tokens_to_map: " + std::to_string(n) + " tokens cannot form a " +
                     std::to_string(h) + "x" + std::to_string(w) + " map");
  return permute(reshape(tokens, {b, h, w, c}), {0, 3, 1, 2});
}

}  // namespace lulcseg
