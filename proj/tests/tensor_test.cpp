#include <doctest.h>

#include "lulcseg/nn.hpp"
#include "lulcseg/ops.hpp"
#include "lulcseg/rng.hpp"

using namespace lulcseg;

TEST_CASE("tensor data length always matches its shape") {
  Tensor t = Tensor::zeros({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK(t.shape() == Shape{2, 3, 4});
  CHECK_THROWS_AS(Tensor::from_f32({2, 2}, {1.f, 2.f, 3.f}), ShapeError);
  Tensor s = Tensor::scalar(7.5);
  CHECK(s.numel() == 1);
  CHECK(s.rank() == 0);
  CHECK(s.scalar_value() == 7.5);
}

TEST_CASE("gradient buffers share shape and dtype with their tensor") {
  Tensor t = Tensor::zeros({3, 2}, DType::f64, true);
  Tensor loss = sum_all(t);
  backward(loss);
  REQUIRE(t.grad().defined());
  CHECK(t.grad().shape() == t.shape());
  CHECK(t.grad().dtype() == t.dtype());
}

TEST_CASE("astype round trips values") {
  Tensor t = Tensor::from_f64({3}, {0.5, -1.25, 2.0});
  Tensor f = t.astype(DType::f32);
  CHECK(f.dtype() == DType::f32);
  for (i64 i = 0; i < 3; ++i) CHECK(f.value_at(i) == t.value_at(i));
}

TEST_CASE("split of a concat returns the original pieces bit-exactly") {
  SplitMix64 rng(99);
  for (int axis = 0; axis < 3; ++axis) {
    Shape sa{2, 3, 4}, sb{2, 3, 4};
    sa[static_cast<size_t>(axis)] = 2;
    sb[static_cast<size_t>(axis)] = 5;
    Tensor a = Tensor::zeros(sa), b = Tensor::zeros(sb);
    for (i64 i = 0; i < a.numel(); ++i) a.set_value_at(i, rng.normal());
    for (i64 i = 0; i < b.numel(); ++i) b.set_value_at(i, rng.normal());
    Tensor joined = concat({a, b}, axis);
    auto parts = split(joined, {sa[static_cast<size_t>(axis)], sb[static_cast<size_t>(axis)]}, axis);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].shape() == a.shape());
    for (i64 i = 0; i < a.numel(); ++i) CHECK(parts[0].value_at(i) == a.value_at(i));
    for (i64 i = 0; i < b.numel(); ++i) CHECK(parts[1].value_at(i) == b.value_at(i));
  }
}

TEST_CASE("split rejects sizes that do not cover the axis") {
  Tensor t = Tensor::zeros({2, 6});
  CHECK_THROWS_AS(split(t, {2, 3}, 1), ShapeError);
  CHECK_THROWS_AS(concat({}, 0), ShapeError);
}

TEST_CASE("permute moves axes and composes back to identity") {
  Tensor t = Tensor::from_f32({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor p = permute(t, {1, 0});
  CHECK(p.shape() == Shape{3, 2});
  CHECK(p.value_at(0) == 1);  // (0,0) <- (0,0)
  CHECK(p.value_at(1) == 4);  // (0,1) <- (1,0)
  Tensor back = permute(p, {1, 0});
  for (i64 i = 0; i < t.numel(); ++i) CHECK(back.value_at(i) == t.value_at(i));
}

TEST_CASE("parameter initialization is a pure function of seed and order") {
  ParamStore a(DType::f32, 42), b(DType::f32, 42), c(DType::f32, 43);
  Tensor ta = a.create("w", {16, 16}, Init::kTruncNormal);
  Tensor tb = b.create("w", {16, 16}, Init::kTruncNormal);
  Tensor tc = c.create("w", {16, 16}, Init::kTruncNormal);
  bool same = true, differs = false;
  for (i64 i = 0; i < ta.numel(); ++i) {
    same = same && (ta.value_at(i) == tb.value_at(i));
    differs = differs || (ta.value_at(i) != tc.value_at(i));
  }
  CHECK(same);
  CHECK(differs);
  // Truncated normal with std 0.02 stays within 2 sigma.
  for (i64 i = 0; i < ta.numel(); ++i) CHECK(std::fabs(ta.value_at(i)) <= 0.04 + 1e-9);
}

TEST_CASE("duplicate parameter names are rejected") {
  ParamStore ps(DType::f32, 1);
  ps.create("w", {2}, Init::kZeros);
  CHECK_THROWS_AS(ps.create("w", {2}, Init::kZeros), ConfigError);
}
