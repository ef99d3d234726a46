#pragma once

#include <vector>

#include "lulcseg/tensor.hpp"

namespace lulcseg {

// All ops are pure: they allocate a fresh output and, when recording is
// active and an input requires grad, attach a tape node. Binary ops require
// matching shapes and dtypes unless stated otherwise.

// --- elementwise ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor add_scalar(const Tensor& x, double c);
Tensor mul_scalar(const Tensor& x, double c);
Tensor scalar_sub(double c, const Tensor& x);  // c - x
Tensor pow_const(const Tensor& x, double p);   // p == 0 gives exact ones
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor gelu(const Tensor& x);  // exact Gaussian-CDF form
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);  // numerically stable log(1+e^x)

// --- shape ---
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& axes);
Tensor concat(const std::vector<Tensor>& xs, int axis);
std::vector<Tensor> split(const Tensor& x, const std::vector<i64>& sizes, int axis);

// --- reductions ---
Tensor sum_all(const Tensor& x);   // scalar
Tensor mean_all(const Tensor& x);  // scalar
Tensor mean_axes(const Tensor& x, std::vector<int> axes);  // reduced axes removed

// --- contractions ---
// a [..,m,k] x b [..,k,n] -> [..,m,n]. Batch extents must match exactly, or
// b may omit them entirely (shared right operand).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add_bias(const Tensor& x, const Tensor& bias);  // bias over trailing extent

// --- neural net primitives ---
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad,
              int groups);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
Tensor softmax(const Tensor& x, int axis);
Tensor log_softmax(const Tensor& x, int axis);
Tensor bilinear_upsample(const Tensor& x, i64 out_h, i64 out_w);
// x [b,c,h,w] scaled per channel by gates [b,c].
Tensor scale_channels(const Tensor& x, const Tensor& gates);
// x [b,C,h,w], labels [b,h,w] -> [b,h,w]; picks x[b, labels[b,y,x], y, x].
Tensor gather_class(const Tensor& x, const Labels& labels);

// Conv output extent: floor((in + 2*pad - k) / stride) + 1.
i64 conv_out_extent(i64 in, i64 k, i64 stride, i64 pad);

}  // namespace lulcseg
