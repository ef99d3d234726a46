#include "lulcseg/loss.hpp"

#include <algorithm>

namespace lulcseg {

namespace {
void check_loss_shapes(const Tensor& logits, const Labels& labels) {
  if (logits.rank() != 4)
    throw ShapeError("loss: expected logits [b,C,h,w], got " + shape_str(logits.shape()));
  if (labels.shape.size() != 3 || labels.shape[0] != logits.dim(0) ||
      labels.shape[1] != logits.dim(2) || labels.shape[2] != logits.dim(3))
    throw ShapeError("loss: labels " + shape_str(labels.shape) + " do not match logits " +
                     shape_str(logits.shape()));
  i64 c = logits.dim(1);
  for (std::uint8_t l : labels.data)
    if (l >= c)
      throw DataError("loss: label " + std::to_string(l) + " out of range for " +
                      std::to_string(c) + " classes");
}
}  // namespace

Tensor focal_loss(const Tensor& logits, const Labels& labels, const FocalConfig& cfg) {
  check_loss_shapes(logits, labels);
  if (cfg.gamma < 0) throw ConfigError("focal loss: gamma must be >= 0");
  i64 c = logits.dim(1);
  if (!cfg.alpha.empty()) {
    if (static_cast<i64>(cfg.alpha.size()) != c)
      throw ConfigError("focal loss: alpha has " + std::to_string(cfg.alpha.size()) +
                        " weights for " + std::to_string(c) + " classes");
    for (double a : cfg.alpha)
      if (a <= 0) throw ConfigError("focal loss: alpha weights must be positive");
  }

  Tensor log_probs = log_softmax(logits, 1);
  Tensor true_logp = gather_class(log_probs, labels);       // [b,h,w]
  Tensor pt = exp(true_logp);
  Tensor modulator = pow_const(scalar_sub(1.0, pt), cfg.gamma);
  Tensor per_pixel = mul(modulator, neg(true_logp));
  if (!cfg.alpha.empty()) {
    Tensor weights = Tensor::zeros({labels.shape[0], labels.shape[1], labels.shape[2]},
                                   logits.dtype());
    for (i64 i = 0; i < weights.numel(); ++i)
      weights.set_value_at(i, cfg.alpha[labels.data[static_cast<size_t>(i)]]);
    per_pixel = mul(weights, per_pixel);
  }
  return mean_all(per_pixel);
}

Tensor ce_loss(const Tensor& logits, const Labels& labels) {
  FocalConfig plain;
  plain.gamma = 0.0;
  // gamma = 0 turns the modulator into exact ones and no alpha weighting is
  // applied, so this is the literal mean of -log p_t on the same code path
  // the focal loss uses.
  return focal_loss(logits, labels, plain);
}

Tensor bce_loss(const Tensor& logits, const Labels& labels) {
  check_loss_shapes(logits, labels);
  i64 b = logits.dim(0), c = logits.dim(1), hw = logits.dim(2) * logits.dim(3);
  // -[y log s(z) + (1-y) log(1-s(z))] == softplus(z) - y*z
  Tensor onehot = Tensor::zeros(logits.shape(), logits.dtype());
  for (i64 bi = 0; bi < b; ++bi)
    for (i64 i = 0; i < hw; ++i) {
      i64 cls = labels.data[static_cast<size_t>(bi * hw + i)];
      onehot.set_value_at((bi * c + cls) * hw + i, 1.0);
    }
  return mean_all(sub(softplus(logits), mul(onehot, logits)));
}

std::vector<double> inverse_frequency_alpha(const std::vector<i64>& class_counts) {
  size_t n = class_counts.size();
  if (n == 0) throw ConfigError("inverse_frequency_alpha: no classes");
  i64 min_present = 0;
  for (i64 cnt : class_counts)
    if (cnt > 0 && (min_present == 0 || cnt < min_present)) min_present = cnt;
  if (min_present == 0) throw DataError("inverse_frequency_alpha: all class counts are zero");
  std::vector<double> alpha(n);
  for (size_t i = 0; i < n; ++i)
    alpha[i] = 1.0 / static_cast<double>(class_counts[i] > 0 ? class_counts[i] : min_present);
  double mean = 0;
  for (double a : alpha) mean += a;
  mean /= static_cast<double>(n);
  for (double& a : alpha) a /= mean;
  return alpha;
}

}  // namespace lulcseg
