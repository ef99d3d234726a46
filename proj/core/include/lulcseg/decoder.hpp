#pragma once

#include <array>

#include "lulcseg/nn.hpp"

namespace lulcseg {

// All-MLP decoder. Each pyramid level is linearly projected to a shared
// width, bilinearly upsampled to the stage-1 resolution, concatenated in
// fixed stage order 1..4, fused by one linear layer and classified by
// another.
struct Decoder {
  std::array<Linear, 4> project;
  Linear fuse;
  Linear classify;
  i64 decoder_dim = 0, n_classes = 0;
  std::array<i64, 4> stage_channels{};

  static Decoder make(ParamStore& ps, const std::string& name,
                      const std::array<i64, 4>& stage_channels, i64 decoder_dim, i64 n_classes);
  // pyramid[i] is [b, C_i, h_i, w_i] with the 1/4..1/32 halving chain;
  // returns logits [b, n_classes, h_0, w_0].
  Tensor forward(const std::array<Tensor, 4>& pyramid) const;
  i64 flops(const std::array<std::pair<i64, i64>, 4>& resolutions) const;
};

// Per-pixel argmax over the class axis; exact ties resolve to the lowest
// class index.
Labels logits_to_labels(const Tensor& logits);  // [b,C,h,w] -> [b,h,w]

// Nearest-neighbour resampling with half-pixel centers.
Labels resize_labels_nearest(const Labels& in, i64 out_h, i64 out_w);

}  // namespace lulcseg
