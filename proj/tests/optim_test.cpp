#include <doctest.h>

#include <cmath>

#include "lulcseg/optim.hpp"
#include "lulcseg/ops.hpp"
#include "oracles.hpp"

using namespace lulcseg;

TEST_CASE("zero gradient and zero decay leave the parameter unchanged") {
  Tensor p = Tensor::from_f64({3}, {1.0, -2.0, 0.5}).set_requires_grad(true);
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  AdamW opt({p}, cfg);
  opt.step(0.1);  // no grad buffer at all
  CHECK(p.value_at(0) == 1.0);
  CHECK(p.value_at(1) == -2.0);
  CHECK(p.value_at(2) == 0.5);
}

TEST_CASE("one step on f(w)=w^2 moves w downhill") {
  Tensor w = Tensor::from_f64({1}, {1.0}).set_requires_grad(true);
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  AdamW opt({w}, cfg);
  backward(sum_all(mul(w, w)));
  opt.step(0.05);
  CHECK(w.value_at(0) < 1.0);
  CHECK(w.value_at(0) > 0.0);
}

TEST_CASE("trajectory on a quadratic matches the hand-coded reference rule") {
  Tensor w = Tensor::from_f64({1}, {1.0}).set_requires_grad(true);
  AdamWConfig cfg;  // defaults incl. decoupled decay 0.01
  AdamW opt({w}, cfg);
  oracles::AdamWRef ref;
  double w_ref = 1.0;
  for (int step = 0; step < 25; ++step) {
    w.zero_grad();
    backward(sum_all(mul(w, w)));
    double grad_ref = 2.0 * w_ref;
    double lr = cosine_lr(step, 25, 0.1);
    opt.step(lr);
    w_ref = ref.step(w_ref, grad_ref, lr);
    CHECK(w.value_at(0) == doctest::Approx(w_ref).epsilon(1e-12));
  }
}

TEST_CASE("decoupled decay multiplies the parameter, not the gradient") {
  // With zero gradient and nonzero decay the update is exactly p *= (1-lr*wd).
  Tensor p = Tensor::from_f64({1}, {2.0}).set_requires_grad(true);
  AdamWConfig cfg;
  cfg.weight_decay = 0.5;
  AdamW opt({p}, cfg);
  opt.step(0.1);
  CHECK(p.value_at(0) == doctest::Approx(2.0 * (1.0 - 0.1 * 0.5)).epsilon(1e-15));
}

TEST_CASE("negative learning rates are rejected, zero is a no-op step") {
  Tensor p = Tensor::from_f64({1}, {1.0}).set_requires_grad(true);
  AdamW opt({p}, AdamWConfig{});
  CHECK_THROWS_AS(opt.step(-0.001), ConfigError);
  backward(sum_all(mul(p, p)));
  opt.step(0.0);
  CHECK(p.value_at(0) == 1.0);
}

TEST_CASE("cosine schedule hits its anchor points") {
  CHECK(cosine_lr(0, 100, 0.0005) == 0.0005);  // initial learning rate
  CHECK(cosine_lr(100, 100, 0.0005) == 0.0);
  CHECK(cosine_lr(50, 100, 0.0005) == doctest::Approx(0.00025).epsilon(1e-12));
  // monotone nonincreasing
  double prev = cosine_lr(0, 64, 1.0);
  for (i64 s = 1; s <= 64; ++s) {
    double cur = cosine_lr(s, 64, 1.0);
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }
  CHECK_THROWS_AS(cosine_lr(-1, 10, 1.0), ConfigError);
  CHECK_THROWS_AS(cosine_lr(11, 10, 1.0), ConfigError);
}

TEST_CASE("identical seeds give bit-identical parameters after k steps") {
  auto run = [] {
    Tensor w = Tensor::from_f64({4}, {1.0, -1.0, 2.0, 0.1}).set_requires_grad(true);
    AdamW opt({w}, AdamWConfig{});
    for (int s = 0; s < 10; ++s) {
      w.zero_grad();
      backward(sum_all(mul(w, w)));
      opt.step(cosine_lr(s, 10, 0.05));
    }
    return w.to_vector();
  };
  auto a = run(), b = run();
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}
