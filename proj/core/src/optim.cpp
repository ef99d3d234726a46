#include "lulcseg/optim.hpp"

#include <cmath>

namespace lulcseg {

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig cfg) : cfg_(cfg) {
  if (cfg.beta1 < 0 || cfg.beta1 >= 1 || cfg.beta2 < 0 || cfg.beta2 >= 1)
    throw ConfigError("adamw: betas must lie in [0,1)");
  if (cfg.eps <= 0) throw ConfigError("adamw: eps must be positive");
  if (cfg.weight_decay < 0) throw ConfigError("adamw: negative weight decay");
  slots_.reserve(params.size());
  for (Tensor& p : params) {
    Slot s;
    s.param = p;
    s.m.assign(static_cast<size_t>(p.numel()), 0.0);
    s.v.assign(static_cast<size_t>(p.numel()), 0.0);
    slots_.push_back(std::move(s));
  }
}

void AdamW::step(double lr) {
  if (lr < 0) throw ConfigError("adamw: learning rate must be >= 0");
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (Slot& s : slots_) {
    Tensor g = s.param.grad();
    i64 n = s.param.numel();
    for (i64 i = 0; i < n; ++i) {
      double gi = g.defined() ? g.value_at(i) : 0.0;
      double& m = s.m[static_cast<size_t>(i)];
      double& v = s.v[static_cast<size_t>(i)];
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * gi;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * gi * gi;
      double mhat = m / bc1;
      double vhat = v / bc2;
      double p = s.param.value_at(i);
      p -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p);
      s.param.set_value_at(i, p);
    }
  }
}

void AdamW::zero_grad() {
  for (Slot& s : slots_) s.param.zero_grad();
}

double cosine_lr(i64 step, i64 total_steps, double lr0) {
  if (total_steps <= 0) throw ConfigError("cosine_lr: total_steps must be positive");
  if (step < 0 || step > total_steps)
    throw ConfigError("cosine_lr: step " + std::to_string(step) + " outside [0, " +
                      std::to_string(total_steps) + "]");
  if (step == total_steps) return 0.0;
  double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr0 * 0.5 * (1.0 + std::cos(3.14159265358979323846 * frac));
}

}  // namespace lulcseg
