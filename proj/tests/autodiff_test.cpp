#include <doctest.h>

#include <cmath>

#include "lulcseg/gradcheck.hpp"
#include "lulcseg/ops.hpp"
#include "lulcseg/rng.hpp"
#include "oracles.hpp"

using namespace lulcseg;

TEST_CASE("grad of sum(x) is all ones") {
  Tensor x = Tensor::zeros({3, 2}, DType::f64, true);
  backward(sum_all(x));
  for (i64 i = 0; i < x.numel(); ++i) CHECK(x.grad().value_at(i) == 1.0);
}

TEST_CASE("grad of sum(x*x) is 2x") {
  Tensor x = Tensor::from_f64({4}, {0.5, -1.0, 2.0, 3.25}).set_requires_grad(true);
  backward(sum_all(mul(x, x)));
  for (i64 i = 0; i < 4; ++i)
    CHECK(x.grad().value_at(i) == doctest::Approx(2.0 * x.value_at(i)).epsilon(1e-15));
}

TEST_CASE("backward rejects non-scalar roots") {
  Tensor x = Tensor::zeros({2, 2}, DType::f64, true);
  Tensor y = mul(x, x);
  CHECK_THROWS_AS(backward(y), ShapeError);
}

TEST_CASE("gradients accumulate additively when a tensor feeds several ops") {
  Tensor x = Tensor::from_f64({2}, {1.5, -0.5}).set_requires_grad(true);
  // y = sum(x) + sum(x*x): dy/dx = 1 + 2x
  Tensor loss = add(sum_all(x), sum_all(mul(x, x)));
  backward(loss);
  CHECK(x.grad().value_at(0) == doctest::Approx(1.0 + 3.0).epsilon(1e-15));
  CHECK(x.grad().value_at(1) == doctest::Approx(1.0 - 1.0).epsilon(1e-15));
}

TEST_CASE("diamond-shaped graphs visit each node once and stay correct") {
  Tensor x = Tensor::from_f64({1}, {0.7}).set_requires_grad(true);
  Tensor a = mul_scalar(x, 2.0);
  Tensor b = mul_scalar(x, 3.0);
  Tensor loss = sum_all(mul(a, b));  // 6x^2, d/dx = 12x
  backward(loss);
  CHECK(x.grad().value_at(0) == doctest::Approx(12.0 * 0.7).epsilon(1e-12));
}

TEST_CASE("no gradients are recorded under NoGradGuard") {
  Tensor x = Tensor::zeros({2}, DType::f64, true);
  {
    NoGradGuard guard;
    Tensor y = mul(x, x);
    CHECK_FALSE(y.impl()->node);
  }
  Tensor y = mul(x, x);
  CHECK(y.impl()->node != nullptr);
}

TEST_CASE("detach cuts the tape") {
  Tensor x = Tensor::from_f64({2}, {1.0, 2.0}).set_requires_grad(true);
  Tensor y = mul(x, x).detach();
  CHECK_FALSE(y.requires_grad());
  Tensor z = sum_all(y);
  CHECK_FALSE(z.requires_grad());
}

TEST_CASE("a composite graph matches central finite differences in float64") {
  SplitMix64 rng(2024);
  Tensor x = Tensor::zeros({3, 4}, DType::f64, true);
  for (i64 i = 0; i < x.numel(); ++i) x.set_value_at(i, rng.normal());
  Tensor w = Tensor::zeros({4, 3}, DType::f64, true);
  for (i64 i = 0; i < w.numel(); ++i) w.set_value_at(i, 0.5 * rng.normal());

  auto forward = [&]() {
    Tensor h = gelu(matmul(x, w));                       // [3,3]
    Tensor p = softmax(h, 1);
    Tensor q = mul(p, sigmoid(h));
    return mean_all(mul(q, q));
  };
  Tensor loss = forward();
  backward(loss);
  auto eval = [&]() { return forward().scalar_value(); };

  double max_err = 0;
  for (i64 coord = 0; coord < x.numel(); ++coord) {
    double fd = oracles::central_difference(eval, x, coord, 1e-5);
    max_err = std::max(max_err, oracles::rel_err(x.grad().value_at(coord), fd));
  }
  for (i64 coord = 0; coord < w.numel(); ++coord) {
    double fd = oracles::central_difference(eval, w, coord, 1e-5);
    max_err = std::max(max_err, oracles::rel_err(w.grad().value_at(coord), fd));
  }
  CHECK(max_err < 1e-4);
}

TEST_CASE("the op-level gradient suite passes in float64") {
  // Full sweep: every differentiable op over at least three shapes.
  auto results = run_op_gradient_suite(91);
  for (const auto& r : results) {
    INFO(r.name, " max_rel_err=", r.max_rel_err);
    CHECK(r.pass);
  }
  CHECK(results.size() > 60);  // 3+ shapes per op keeps the sweep honest
}
