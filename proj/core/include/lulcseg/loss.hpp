#pragma once

#include <vector>

#include "lulcseg/ops.hpp"

namespace lulcseg {

struct FocalConfig {
  double gamma = 2.0;
  // One weight per class; empty means all ones. Must be positive.
  std::vector<double> alpha;
};

// Mean over all scored pixels of alpha_t * (1 - p_t)^gamma * (-log p_t),
// with p_t the softmax probability of the true class. gamma = 0 with unit
// alpha degenerates to plain cross-entropy, bit for bit.
Tensor focal_loss(const Tensor& logits, const Labels& labels, const FocalConfig& cfg);

// Mean softmax cross-entropy.
Tensor ce_loss(const Tensor& logits, const Labels& labels);

// One-vs-all binary cross-entropy on logits against one-hot targets,
// averaged over pixels and classes.
Tensor bce_loss(const Tensor& logits, const Labels& labels);

// Inverse-frequency class weights normalized to mean 1. Classes absent from
// the counts get the weight of the rarest present class.
std::vector<double> inverse_frequency_alpha(const std::vector<i64>& class_counts);

}  // namespace lulcseg
