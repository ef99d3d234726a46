#include <doctest.h>

#include <cmath>

#include "lulcseg/ops.hpp"
#include "lulcseg/rng.hpp"
#include "oracles.hpp"

using namespace lulcseg;

TEST_CASE("matmul by the identity leaves the operand unchanged") {
  Tensor eye = Tensor::from_f64({2, 2}, {1, 0, 0, 1});
  Tensor x = Tensor::from_f64({2, 2}, {3.5, -1, 2, 0.25});
  Tensor y = matmul(eye, x);
  for (i64 i = 0; i < 4; ++i) CHECK(y.value_at(i) == x.value_at(i));
}

TEST_CASE("matmul hand-checked 2x2 by 2x1") {
  Tensor a = Tensor::from_f64({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_f64({2, 1}, {1, 1});
  Tensor c = matmul(a, b);
  CHECK(c.shape() == Shape{2, 1});
  CHECK(c.value_at(0) == 3.0);
  CHECK(c.value_at(1) == 7.0);
}

TEST_CASE("matmul gradient of sum(A*B) w.r.t. A is B^T broadcast across rows") {
  SplitMix64 rng(7);
  Tensor a = Tensor::zeros({3, 4}, DType::f64, true);
  Tensor b = Tensor::zeros({4, 2}, DType::f64);
  for (i64 i = 0; i < a.numel(); ++i) a.set_value_at(i, rng.normal());
  for (i64 i = 0; i < b.numel(); ++i) b.set_value_at(i, rng.normal());
  Tensor loss = sum_all(matmul(a, b));
  backward(loss);
  Tensor ga = a.grad();
  // d/dA sum(AB) has rows equal to the column sums of B.
  for (i64 r = 0; r < 3; ++r)
    for (i64 k = 0; k < 4; ++k) {
      double expected = b.value_at(k * 2 + 0) + b.value_at(k * 2 + 1);
      CHECK(std::fabs(ga.value_at(r * 4 + k) - expected) < 1e-12);
    }
  // Same statement via the finite-difference oracle.
  auto f = [&]() { return sum_all(matmul(a, b)).scalar_value(); };
  for (i64 coord : {0L, 5L, 11L}) {
    double fd = oracles::central_difference(f, a, coord);
    CHECK(oracles::rel_err(ga.value_at(coord), fd) < 1e-9);
  }
}

TEST_CASE("matmul names both shapes in its mismatch error") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 2});
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2, 3]") != std::string::npos);
    CHECK(msg.find("[4, 2]") != std::string::npos);
  }
}

TEST_CASE("conv output geometry follows floor((in+2p-k)/s)+1") {
  CHECK(conv_out_extent(64, 7, 4, 3) == 16);
  CHECK(conv_out_extent(510, 7, 4, 3) == 128);
  CHECK(conv_out_extent(16, 3, 2, 1) == 8);
  Tensor x = Tensor::zeros({1, 2, 64, 64});
  Tensor w = Tensor::zeros({4, 2, 7, 7});
  Tensor b = Tensor::zeros({4});
  Tensor y = conv2d(x, w, b, 4, 3, 1);
  CHECK(y.shape() == Shape{1, 4, 16, 16});
}

TEST_CASE("1x1 identity kernels pass the input through") {
  Tensor x = Tensor::zeros({1, 3, 5, 5});
  SplitMix64 rng(3);
  for (i64 i = 0; i < x.numel(); ++i) x.set_value_at(i, rng.normal());
  Tensor w = Tensor::zeros({3, 3, 1, 1});
  for (i64 c = 0; c < 3; ++c) w.set_value_at(c * 3 + c, 1.0);
  Tensor y = conv2d(x, w, Tensor::zeros({3}), 1, 0, 1);
  for (i64 i = 0; i < x.numel(); ++i) CHECK(y.value_at(i) == x.value_at(i));
}

TEST_CASE("all-zero conv weights and bias produce all-zero output") {
  Tensor x = Tensor::full({2, 3, 8, 8}, 1.7);
  Tensor y = conv2d(x, Tensor::zeros({5, 3, 3, 3}), Tensor::zeros({5}), 1, 1, 1);
  for (i64 i = 0; i < y.numel(); ++i) CHECK(y.value_at(i) == 0.0);
}

TEST_CASE("conv rejects kernels larger than the padded input") {
  Tensor x = Tensor::zeros({1, 1, 4, 4});
  Tensor w = Tensor::zeros({1, 1, 7, 7});
  CHECK_THROWS_AS(conv2d(x, w, Tensor::zeros({1}), 1, 1, 1), ShapeError);
  Tensor wg = Tensor::zeros({4, 2, 3, 3});
  CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 3, 8, 8}), wg, Tensor::zeros({4}), 1, 1, 2),
                  ShapeError);
}

TEST_CASE("layer_norm of a constant row is all zeros") {
  Tensor x = Tensor::full({2, 4}, 3.0, DType::f64);
  Tensor y = layer_norm(x, Tensor::full({4}, 1.0, DType::f64), Tensor::zeros({4}, DType::f64),
                        1e-5);
  for (i64 i = 0; i < y.numel(); ++i) CHECK(std::fabs(y.value_at(i)) < 1e-12);
}

TEST_CASE("layer_norm of [1,3] with eps 0 is [-1,1]") {
  Tensor x = Tensor::from_f64({1, 2}, {1.0, 3.0});
  Tensor y = layer_norm(x, Tensor::full({2}, 1.0, DType::f64), Tensor::zeros({2}, DType::f64),
                        0.0);
  CHECK(y.value_at(0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(y.value_at(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("layer_norm with zero gamma returns beta") {
  Tensor x = Tensor::from_f64({1, 3}, {0.3, -2.0, 5.5});
  Tensor y = layer_norm(x, Tensor::zeros({3}, DType::f64), Tensor::full({3}, 5.0, DType::f64),
                        1e-5);
  for (i64 i = 0; i < 3; ++i) CHECK(y.value_at(i) == 5.0);
}

TEST_CASE("layer_norm standardizes each token before the affine map") {
  SplitMix64 rng(11);
  Tensor x = Tensor::zeros({6, 16}, DType::f64);
  for (i64 i = 0; i < x.numel(); ++i) x.set_value_at(i, 2.0 + 3.0 * rng.normal());
  Tensor y = layer_norm(x, Tensor::full({16}, 1.0, DType::f64), Tensor::zeros({16}, DType::f64),
                        1e-12);
  for (i64 r = 0; r < 6; ++r) {
    double mu = 0, var = 0;
    for (i64 c = 0; c < 16; ++c) mu += y.value_at(r * 16 + c);
    mu /= 16;
    for (i64 c = 0; c < 16; ++c) {
      double d = y.value_at(r * 16 + c) - mu;
      var += d * d;
    }
    var /= 16;
    CHECK(std::fabs(mu) < 1e-10);
    CHECK(std::fabs(var - 1.0) < 1e-6);
  }
}

TEST_CASE("softmax of equal logits is uniform") {
  Tensor x = Tensor::from_f64({2}, {0.0, 0.0});
  Tensor y = softmax(x, 0);
  CHECK(y.value_at(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(y.value_at(1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("softmax rows are nonnegative and sum to one") {
  SplitMix64 rng(5);
  Tensor x = Tensor::zeros({4, 9}, DType::f64);
  for (i64 i = 0; i < x.numel(); ++i) x.set_value_at(i, 10.0 * rng.normal());
  Tensor y = softmax(x, 1);
  for (i64 r = 0; r < 4; ++r) {
    double sum = 0;
    for (i64 c = 0; c < 9; ++c) {
      CHECK(y.value_at(r * 9 + c) >= 0.0);
      sum += y.value_at(r * 9 + c);
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-6);
  }
}

TEST_CASE("bilinear upsample of a constant map stays constant") {
  Tensor x = Tensor::full({1, 2, 2, 2}, 3.0);
  Tensor y = bilinear_upsample(x, 4, 4);
  CHECK(y.shape() == Shape{1, 2, 4, 4});
  for (i64 i = 0; i < y.numel(); ++i) CHECK(y.value_at(i) == 3.0);
}

TEST_CASE("gelu exact Gaussian-CDF values") {
  Tensor x = Tensor::from_f64({3}, {0.0, 1.0, -1.0});
  Tensor y = gelu(x);
  CHECK(y.value_at(0) == 0.0);
  CHECK(y.value_at(1) == doctest::Approx(0.841344746068543).epsilon(1e-12));
  CHECK(y.value_at(2) == doctest::Approx(-0.158655253931457).epsilon(1e-12));
}

TEST_CASE("sigmoid and softplus agree with closed forms") {
  Tensor x = Tensor::from_f64({3}, {0.0, 2.0, -40.0});
  Tensor s = sigmoid(x);
  CHECK(s.value_at(0) == 0.5);
  CHECK(s.value_at(1) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-15));
  CHECK(s.value_at(2) > 0.0);
  Tensor sp = softplus(x);
  CHECK(sp.value_at(0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(std::isfinite(sp.value_at(2)));
}

TEST_CASE("mean over axes implements global average pooling") {
  Tensor x = Tensor::from_f64({1, 2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
  Tensor y = mean_axes(x, {2, 3});
  CHECK(y.shape() == Shape{1, 2});
  CHECK(y.value_at(0) == 2.5);
  CHECK(y.value_at(1) == 25.0);
}

TEST_CASE("gather_class rejects labels outside the class range") {
  Tensor logits = Tensor::zeros({1, 3, 2, 2});
  Labels labels({1, 2, 2});
  labels.data = {0, 1, 2, 3};
  CHECK_THROWS_AS(gather_class(logits, labels), DataError);
}
