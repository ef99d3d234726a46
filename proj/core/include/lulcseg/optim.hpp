#pragma once

#include <vector>

#include "lulcseg/tensor.hpp"

namespace lulcseg {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// AdamW with decoupled weight decay: the decay term multiplies the parameter
// directly and never enters the moment estimates. Update math runs in double
// regardless of parameter dtype; results are rounded on write-back.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWConfig cfg);

  // One update using the gradients currently stored on the parameters.
  // lr == 0 is a valid no-op step; negative lr is rejected.
  void step(double lr);
  void zero_grad();
  i64 steps_taken() const { return t_; }

 private:
  struct Slot {
    Tensor param;
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  AdamWConfig cfg_;
  i64 t_ = 0;
};

// Cosine annealing from lr0 at step 0 to 0 at total_steps.
double cosine_lr(i64 step, i64 total_steps, double lr0);

}  // namespace lulcseg
