#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lulcseg/tensor.hpp"

namespace lulcseg {

struct GradCheckOptions {
  double step = 1e-5;        // central-difference step
  double tolerance = 1e-4;   // max relative error accepted
  i64 max_coords = 16;       // sampled coordinates per tensor
  std::uint64_t seed = 1234; // coordinate sampling stream
};

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0;
  i64 coords_checked = 0;
  bool pass = true;
};

// |a - d| / max(1, |a|, |d|): relative for large values, absolute near zero.
double gradient_rel_err(double analytic, double numeric);

// Compares reverse-mode gradients of a scalar-valued function against
// central finite differences over sampled coordinates of every input that
// requires grad. The numeric side only ever evaluates the forward pass.
GradCheckResult check_gradients(const std::string& name,
                                const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                                std::vector<Tensor> inputs, const GradCheckOptions& opts);

// Gradient checks for every differentiable op and architectural block, in
// float64, each over at least three input shapes.
std::vector<GradCheckResult> run_op_gradient_suite(std::uint64_t seed);

// End-to-end check of the desk-scale network (32x32 input) through the
// focal loss, covering the inputs and every parameter tensor.
GradCheckResult run_network_gradient_check(std::uint64_t seed);

}  // namespace lulcseg
