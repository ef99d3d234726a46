#include "lulcseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace lulcseg {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void check_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape " + shape_str(a.shape()) +
                     " does not match " + shape_str(b.shape()));
  if (a.dtype() != b.dtype())
    throw ShapeError(std::string(op) + ": dtype mismatch");
}

int normalize_axis(int axis, int rank, const char* op) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank)
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for rank " + std::to_string(rank));
  return axis;
}

// Collapse a shape around `axis` into (outer, extent, inner) strides.
struct AxisView {
  i64 outer, extent, inner;
};
AxisView axis_view(const Shape& s, int axis) {
  AxisView v{1, s[static_cast<size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) v.outer *= s[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

template <class T, class FwdFn>
void map_unary(const Tensor& x, Tensor& out, FwdFn fn) {
  const T* src = data_ptr<T>(x);
  T* dst = data_ptr<T>(out);
  i64 n = x.numel();
  for (i64 i = 0; i < n; ++i) dst[i] = fn(src[i]);
}

// Unary elementwise op with dy/dx expressed from the input value.
Tensor unary_op(const Tensor& x, const char* name, double (*fwd)(double),
                double (*dfdx)(double)) {
  Tensor out = make_op_result(x.shape(), x.dtype(), name, {x}, nullptr);
  dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    map_unary<T>(x, out, [&](T v) { return static_cast<T>(fwd(static_cast<double>(v))); });
  });
  if (out.impl()->node) {
    Tensor xin = x;
    out.impl()->node->backward = [xin, dfdx](const Tensor& o) {
      Tensor gx = Tensor::zeros(xin.shape(), xin.dtype());
      dispatch(xin.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* g = data_ptr<T>(o.grad());
        const T* xv = data_ptr<T>(xin);
        T* dst = data_ptr<T>(gx);
        i64 n = xin.numel();
        for (i64 i = 0; i < n; ++i)
          dst[i] = static_cast<T>(static_cast<double>(g[i]) * dfdx(static_cast<double>(xv[i])));
      });
      accumulate_grad(xin, gx);
    };
  }
  return out;
}

}  // namespace

i64 conv_out_extent(i64 in, i64 k, i64 stride, i64 pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// --------------------------------------------------------------------------
// elementwise
// --------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same(a, b, "add");
  Tensor out = make_op_result(a.shape(), a.dtype(), "add", {a, b}, nullptr);
  dispatch(a.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    const T* pa = data_ptr<T>(a);
    const T* pb = data_ptr<T>(b);
    T* po = data_ptr<T>(out);
    for (i64 i = 0; i < a.numel(); ++i) po[i] = pa[i] + pb[i];
  });
  if (out.impl()->node) {
    Tensor ta = a, tb = b;
    out.impl()->node->backward = [ta, tb](const Tensor& o) {
      accumulate_grad(ta, o.grad());
      accumulate_grad(tb, o.grad());
    };
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same(a, b, "sub");
  Tensor out = make_op_result(a.shape(), a.dtype(), "sub", {a, b}, nullptr);
  dispatch(a.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    const T* pa = data_ptr<T>(a);
    const T* pb = data_ptr<T>(b);
    T* po = data_ptr<T>(out);
    for (i64 i = 0; i < a.numel(); ++i) po[i] = pa[i] - pb[i];
  });
  if (out.impl()->node) {
    Tensor ta = a, tb = b;
    out.impl()->node->backward = [ta, tb](const Tensor& o) {
      accumulate_grad(ta, o.grad());
      Tensor gb = Tensor::zeros(tb.shape(), tb.dtype());
      dispatch(tb.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* g = data_ptr<T>(o.grad());
        T* dst = data_ptr<T>(gb);
        for (i64 i = 0; i < tb.numel(); ++i) dst[i] = -g[i];
      });
      accumulate_grad(tb, gb);
    };
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same(a, b, "mul");
  Tensor out = make_op_result(a.shape(), a.dtype(), "mul", {a, b}, nullptr);
  dispatch(a.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    const T* pa = data_ptr<T>(a);
    const T* pb = data_ptr<T>(b);
    T* po = data_ptr<T>(out);
    for (i64 i = 0; i < a.numel(); ++i) po[i] = pa[i] * pb[i];
  });
  if (out.impl()->node) {
    Tensor ta = a, tb = b;
    out.impl()->node->backward = [ta, tb](const Tensor& o) {
      dispatch(ta.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* g = data_ptr<T>(o.grad());
        const T* pa = data_ptr<T>(ta);
        const T* pb = data_ptr<T>(tb);
        Tensor ga = Tensor::zeros(ta.shape(), ta.dtype());
        Tensor gb = Tensor::zeros(tb.shape(), tb.dtype());
        T* pga = data_ptr<T>(ga);
        T* pgb = data_ptr<T>(gb);
        for (i64 i = 0; i < ta.numel(); ++i) {
          pga[i] = g[i] * pb[i];
          pgb[i] = g[i] * pa[i];
        }
        accumulate_grad(ta, ga);
        accumulate_grad(tb, gb);
      });
    };
  }
  return out;
}

Tensor neg(const Tensor& x) {
  return unary_op(
      x, "neg", [](double v) { return -v; }, [](double) { return -1.0; });
}

Tensor add_scalar(const Tensor& x, double c) {
  Tensor out = make_op_result(x.shape(), x.dtype(), "add_scalar", {x}, nullptr);
  dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    map_unary<T>(x, out, [&](T v) { return static_cast<T>(v + static_cast<T>(c)); });
  });
  if (out.impl()->node) {
    Tensor xin = x;
    out.impl()->node->backward = [xin](const Tensor& o) { accumulate_grad(xin, o.grad()); };
  }
  return out;
}

Tensor mul_scalar(const Tensor& x, double c) {
  Tensor out = make_op_result(x.shape(), x.dtype(), "mul_scalar", {x}, nullptr);
  dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    map_unary<T>(x, out, [&](T v) { return static_cast<T>(v * static_cast<T>(c)); });
  });
  if (out.impl()->node) {
    Tensor xin = x;
    out.impl()->node->backward = [xin, c](const Tensor& o) {
      Tensor gx = Tensor::zeros(xin.shape(), xin.dtype());
      dispatch(xin.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* g = data_ptr<T>(o.grad());
        T* dst = data_ptr<T>(gx);
        for (i64 i = 0; i < xin.numel(); ++i) dst[i] = static_cast<T>(g[i] * static_cast<T>(c));
      });
      accumulate_grad(xin, gx);
    };
  }
  return out;
}

Tensor scalar_sub(double c, const Tensor& x) {
  Tensor out = make_op_result(x.shape(), x.dtype(), "scalar_sub", {x}, nullptr);
  dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    map_unary<T>(x, out, [&](T v) { return static_cast<T>(static_cast<T>(c) - v); });
  });
  if (out.impl()->node) {
    Tensor xin = x;
    out.impl()->node->backward = [xin](const Tensor& o) {
      Tensor gx = Tensor::zeros(xin.shape(), xin.dtype());
      dispatch(xin.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* g = data_ptr<T>(o.grad());
        T* dst = data_ptr<T>(gx);
        for (i64 i = 0; i < xin.numel(); ++i) dst[i] = -g[i];
      });
      accumulate_grad(xin, gx);
    };
  }
  return out;
}

Tensor pow_const(const Tensor& x, double p) {
  if (p == 0.0) {
    // x^0 == 1 exactly, derivative identically zero. Keeping this branch
    // exact makes focal(gamma=0) coincide bit-for-bit with cross-entropy.
    Tensor out = make_op_result(x.shape(), x.dtype(), "pow_const", {x}, nullptr);
    dispatch(x.dtype(), [&](auto tag) {
      using T = typename decltype(tag)::type;
      T* po = data_ptr<T>(out);
      for (i64 i = 0; i < x.numel(); ++i) po[i] = static_cast<T>(1);
    });
    if (out.impl()->node) {
      Tensor xin = x;
      out.impl()->node->backward = [xin](const Tensor&) {
        accumulate_grad(xin, Tensor::zeros(xin.shape(), xin.dtype()));
      };
    }
    return out;
  }
  Tensor out = make_op_result(x.shape(), x.dtype(), "pow_const", {x}, nullptr);
  dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    map_unary<T>(x, out,
                 [&](T v) { return static_cast<T>(std::pow(static_cast<double>(v), p)); });
  });
  if (out.impl()->node) {
    Tensor xin = x;
    out.impl()->node->backward = [xin, p](const Tensor& o) {
      Tensor gx = Tensor::zeros(xin.shape(), xin.dtype());
      dispatch(xin.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* g = data_ptr<T>(o.grad());
        const T* xv = data_ptr<T>(xin);
        T* dst = data_ptr<T>(gx);
        for (i64 i = 0; i < xin.numel(); ++i)
          dst[i] = static_cast<T>(static_cast<double>(g[i]) * p *
                                  std::pow(static_cast<double>(xv[i]), p - 1.0));
      });
      accumulate_grad(xin, gx);
    };
  }
  return out;
}

Tensor exp(const Tensor& x) {
  return unary_op(
      x, "exp", [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}

Tensor log(const Tensor& x) {
  return unary_op(
      x, "log", [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

Tensor gelu(const Tensor& x) {
  return unary_op(
      x, "gelu",
      [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [](double v) {
        double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        return cdf + v * pdf;
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      x, "sigmoid",
      [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double v) {
        double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 - s);
      });
}

Tensor softplus(const Tensor& x) {
  return unary_op(
      x, "softplus",
      [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::fabs(v))); },
      [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

// --------------------------------------------------------------------------
// shape
// --------------------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel_of(shape) != x.numel())
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(shape));
  Tensor out = make_op_result(shape, x.dtype(), "reshape", {x}, nullptr);
  dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    std::memcpy(data_ptr<T>(out), data_ptr<T>(x), sizeof(T) * static_cast<size_t>(x.numel()));
  });
  if (out.impl()->node) {
    Tensor xin = x;
    out.impl()->node->backward = [xin](const Tensor& o) {
      Tensor g = o.grad();
      Tensor gx = Tensor::zeros(xin.shape(), xin.dtype());
      dispatch(xin.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        std::memcpy(data_ptr<T>(gx), data_ptr<T>(g),
                    sizeof(T) * static_cast<size_t>(xin.numel()));
      });
      accumulate_grad(xin, gx);
    };
  }
  return out;
}

namespace {
// dst[i] = src[perm_map(i)] for a permutation of axes.
template <class T>
void permute_kernel(const T* src, T* dst, const Shape& in_shape, const std::vector<int>& axes) {
  int rank = static_cast<int>(in_shape.size());
  Shape out_shape(static_cast<size_t>(rank));
  for (int i = 0; i < rank; ++i) out_shape[static_cast<size_t>(i)] = in_shape[static_cast<size_t>(axes[static_cast<size_t>(i)])];
  std::vector<i64> in_strides(static_cast<size_t>(rank), 1);
  for (int i = rank - 2; i >= 0; --i)
    in_strides[static_cast<size_t>(i)] = in_strides[static_cast<size_t>(i) + 1] * in_shape[static_cast<size_t>(i) + 1];
  std::vector<i64> step(static_cast<size_t>(rank));
  for (int i = 0; i < rank; ++i) step[static_cast<size_t>(i)] = in_strides[static_cast<size_t>(axes[static_cast<size_t>(i)])];

  std::vector<i64> idx(static_cast<size_t>(rank), 0);
  i64 n = numel_of(in_shape);
  i64 src_off = 0;
  for (i64 flat = 0; flat < n; ++flat) {
    dst[flat] = src[src_off];
    for (int d = rank - 1; d >= 0; --d) {
      idx[static_cast<size_t>(d)]++;
      src_off += step[static_cast<size_t>(d)];
      if (idx[static_cast<size_t>(d)] < out_shape[static_cast<size_t>(d)]) break;
      src_off -= step[static_cast<size_t>(d)] * out_shape[static_cast<size_t>(d)];
      idx[static_cast<size_t>(d)] = 0;
    }
  }
}
}  // namespace

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
  int rank = x.rank();
  if (static_cast<int>(axes.size()) != rank)
    throw ShapeError("permute: got " + std::to_string(axes.size()) + " axes for rank " +
                     std::to_string(rank));
  std::vector<bool> used(static_cast<size_t>(rank), false);
  Shape out_shape(static_cast<size_t>(rank));
  for (int i = 0; i < rank; ++i) {
    int a = normalize_axis(axes[static_cast<size_t>(i)], rank, "permute");
    if (used[static_cast<size_t>(a)]) throw ShapeError("permute: repeated axis");
    used[static_cast<size_t>(a)] = true;
    out_shape[static_cast<size_t>(i)] = x.dim(a);
  }
  Tensor out = make_op_result(out_shape, x.dtype(), "permute", {x}, nullptr);
  dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    permute_kernel<T>(data_ptr<T>(x), data_ptr<T>(out), x.shape(), axes);
  });
  if (out.impl()->node) {
    Tensor xin = x;
    std::vector<int> inverse(axes.size());
    for (int i = 0; i < rank; ++i) inverse[static_cast<size_t>(axes[static_cast<size_t>(i)])] = i;
    Shape oshape = out_shape;
    out.impl()->node->backward = [xin, inverse, oshape](const Tensor& o) {
      Tensor g = o.grad();
      Tensor gx = Tensor::zeros(xin.shape(), xin.dtype());
      dispatch(xin.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        permute_kernel<T>(data_ptr<T>(g), data_ptr<T>(gx), oshape, inverse);
      });
      accumulate_grad(xin, gx);
    };
  }
  return out;
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  int rank = xs[0].rank();
  int ax = normalize_axis(axis, rank, "concat");
  Shape out_shape = xs[0].shape();
  i64 total = 0;
  for (const Tensor& t : xs) {
    if (t.rank() != rank || t.dtype() != xs[0].dtype())
      throw ShapeError("concat: mismatched rank or dtype");
    for (int d = 0; d < rank; ++d)
      if (d != ax && t.dim(d) != xs[0].dim(d))
        throw ShapeError("concat: shape " + shape_str(t.shape()) + " incompatible with " +
                         shape_str(xs[0].shape()));
    total += t.dim(ax);
  }
  out_shape[static_cast<size_t>(ax)] = total;

  Tensor out = make_op_result(out_shape, xs[0].dtype(), "concat", xs, nullptr);
  AxisView v = axis_view(out_shape, ax);
  dispatch(out.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    T* dst = data_ptr<T>(out);
    i64 offset = 0;
    for (const Tensor& t : xs) {
      i64 ext = t.dim(ax);
      const T* src = data_ptr<T>(t);
      for (i64 o = 0; o < v.outer; ++o)
        std::memcpy(dst + (o * v.extent + offset) * v.inner, src + o * ext * v.inner,
                    sizeof(T) * static_cast<size_t>(ext * v.inner));
      offset += ext;
    }
  });
  if (out.impl()->node) {
    std::vector<Tensor> inputs = xs;
    AxisView view = v;
    i64 ax_copy = ax;
    out.impl()->node->backward = [inputs, view, ax_copy](const Tensor& o) {
      Tensor g = o.grad();
      dispatch(g.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* src = data_ptr<T>(g);
        i64 offset = 0;
        for (const Tensor& t : inputs) {
          i64 ext = t.shape()[static_cast<size_t>(ax_copy)];
          Tensor gt = Tensor::zeros(t.shape(), t.dtype());
          T* dst = data_ptr<T>(gt);
          for (i64 oo = 0; oo < view.outer; ++oo)
            std::memcpy(dst + oo * ext * view.inner,
                        src + (oo * view.extent + offset) * view.inner,
                        sizeof(T) * static_cast<size_t>(ext * view.inner));
          offset += ext;
          accumulate_grad(t, gt);
        }
      });
    };
  }
  return out;
}

std::vector<Tensor> split(const Tensor& x, const std::vector<i64>& sizes, int axis) {
  int ax = normalize_axis(axis, x.rank(), "split");
  i64 sum = 0;
  for (i64 s : sizes) {
    if (s <= 0) throw ShapeError("split: sizes must be positive");
    sum += s;
  }
  if (sum != x.dim(ax))
    throw ShapeError("split: sizes sum to " + std::to_string(sum) + " but axis extent is " +
                     std::to_string(x.dim(ax)) + " in " + shape_str(x.shape()));

  AxisView v = axis_view(x.shape(), ax);
  std::vector<Tensor> outs;
  i64 offset = 0;
  for (i64 s : sizes) {
    Shape shp = x.shape();
    shp[static_cast<size_t>(ax)] = s;
    Tensor out = make_op_result(shp, x.dtype(), "split", {x}, nullptr);
    dispatch(x.dtype(), [&](auto tag) {
      using T = typename decltype(tag)::type;
      const T* src = data_ptr<T>(x);
      T* dst = data_ptr<T>(out);
      for (i64 o = 0; o < v.outer; ++o)
        std::memcpy(dst + o * s * v.inner, src + (o * v.extent + offset) * v.inner,
                    sizeof(T) * static_cast<size_t>(s * v.inner));
    });
    if (out.impl()->node) {
      Tensor xin = x;
      i64 off = offset, ext = s;
      AxisView view = v;
      out.impl()->node->backward = [xin, off, ext, view](const Tensor& o) {
        Tensor g = o.grad();
        Tensor gx = Tensor::zeros(xin.shape(), xin.dtype());
        dispatch(xin.dtype(), [&](auto tag) {
          using T = typename decltype(tag)::type;
          const T* src = data_ptr<T>(g);
          T* dst = data_ptr<T>(gx);
          for (i64 oo = 0; oo < view.outer; ++oo)
            std::memcpy(dst + (oo * view.extent + off) * view.inner, src + oo * ext * view.inner,
                        sizeof(T) * static_cast<size_t>(ext * view.inner));
        });
        accumulate_grad(xin, gx);
      };
    }
    outs.push_back(out);
    offset += s;
  }
  return outs;
}

// --------------------------------------------------------------------------
// reductions
// --------------------------------------------------------------------------

namespace {
Tensor reduce_all(const Tensor& x, bool take_mean) {
  Tensor out = make_op_result(Shape{}, x.dtype(), take_mean ? "mean_all" : "sum_all", {x},
                              nullptr);
  double denom = take_mean ? static_cast<double>(x.numel()) : 1.0;
  dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    const T* src = data_ptr<T>(x);
    T acc = 0;
    for (i64 i = 0; i < x.numel(); ++i) acc += src[i];
    data_ptr<T>(out)[0] = static_cast<T>(acc / static_cast<T>(denom));
  });
  if (out.impl()->node) {
    Tensor xin = x;
    out.impl()->node->backward = [xin, denom](const Tensor& o) {
      double g = o.grad().value_at(0) / denom;
      accumulate_grad(xin, Tensor::full(xin.shape(), g, xin.dtype()));
    };
  }
  return out;
}
}  // namespace

Tensor sum_all(const Tensor& x) { return reduce_all(x, false); }
Tensor mean_all(const Tensor& x) { return reduce_all(x, true); }

Tensor mean_axes(const Tensor& x, std::vector<int> axes) {
  int rank = x.rank();
  std::vector<bool> reduce(static_cast<size_t>(rank), false);
  for (int a : axes) reduce[static_cast<size_t>(normalize_axis(a, rank, "mean_axes"))] = true;
  Shape out_shape;
  i64 count = 1;
  for (int d = 0; d < rank; ++d) {
    if (reduce[static_cast<size_t>(d)])
      count *= x.dim(d);
    else
      out_shape.push_back(x.dim(d));
  }
  if (count == 0) throw ShapeError("mean_axes: empty reduction");

  // Strides of the output index for each input axis (0 for reduced axes).
  std::vector<i64> out_stride(static_cast<size_t>(rank), 0);
  i64 run = 1;
  for (int d = rank - 1; d >= 0; --d) {
    if (!reduce[static_cast<size_t>(d)]) {
      out_stride[static_cast<size_t>(d)] = run;
      run *= x.dim(d);
    }
  }

  Tensor out = make_op_result(out_shape, x.dtype(), "mean_axes", {x}, nullptr);
  Shape in_shape = x.shape();
  dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    const T* src = data_ptr<T>(x);
    T* dst = data_ptr<T>(out);
    std::vector<i64> idx(static_cast<size_t>(rank), 0);
    i64 out_off = 0;
    for (i64 flat = 0; flat < x.numel(); ++flat) {
      dst[out_off] += src[flat];
      for (int d = rank - 1; d >= 0; --d) {
        idx[static_cast<size_t>(d)]++;
        out_off += out_stride[static_cast<size_t>(d)];
        if (idx[static_cast<size_t>(d)] < in_shape[static_cast<size_t>(d)]) break;
        out_off -= out_stride[static_cast<size_t>(d)] * in_shape[static_cast<size_t>(d)];
        idx[static_cast<size_t>(d)] = 0;
      }
    }
    for (i64 i = 0; i < out.numel(); ++i) dst[i] = static_cast<T>(dst[i] / static_cast<T>(count));
  });
  if (out.impl()->node) {
    Tensor xin = x;
    std::vector<i64> ostride = out_stride;
    i64 cnt = count;
    out.impl()->node->backward = [xin, ostride, cnt](const Tensor& o) {
      Tensor g = o.grad();
      Tensor gx = Tensor::zeros(xin.shape(), xin.dtype());
      const Shape& in_shape = xin.shape();
      int rank = static_cast<int>(in_shape.size());
      dispatch(xin.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* src = data_ptr<T>(g);
        T* dst = data_ptr<T>(gx);
        std::vector<i64> idx(static_cast<size_t>(rank), 0);
        i64 out_off = 0;
        for (i64 flat = 0; flat < xin.numel(); ++flat) {
          dst[flat] = static_cast<T>(src[out_off] / static_cast<T>(cnt));
          for (int d = rank - 1; d >= 0; --d) {
            idx[static_cast<size_t>(d)]++;
            out_off += ostride[static_cast<size_t>(d)];
            if (idx[static_cast<size_t>(d)] < in_shape[static_cast<size_t>(d)]) break;
            out_off -= ostride[static_cast<size_t>(d)] * in_shape[static_cast<size_t>(d)];
            idx[static_cast<size_t>(d)] = 0;
          }
        }
      });
      accumulate_grad(xin, gx);
    };
  }
  return out;
}

// --------------------------------------------------------------------------
// matmul
// --------------------------------------------------------------------------

namespace {

// C[m,n] += A[m,k] * B[k,n]; i-k-j order so the inner loop streams rows.
template <class T>
void gemm_acc(const T* a, const T* b, T* c, i64 m, i64 k, i64 n) {
  for (i64 i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (i64 kk = 0; kk < k; ++kk) {
      T aik = arow[kk];
      if (aik == T(0)) continue;
      const T* brow = b + kk * n;
      for (i64 j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

template <class T>
void transpose2d(const T* src, T* dst, i64 rows, i64 cols) {
  for (i64 r = 0; r < rows; ++r)
    for (i64 c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

struct MatmulDims {
  i64 batch, m, k, n;
  bool b_batched;
};

MatmulDims matmul_dims(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2)
    throw ShapeError("matmul: operands must have rank >= 2, got " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  MatmulDims d;
  d.m = a.dim(a.rank() - 2);
  d.k = a.dim(a.rank() - 1);
  i64 bk = b.dim(b.rank() - 2);
  d.n = b.dim(b.rank() - 1);
  if (d.k != bk)
    throw ShapeError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  i64 a_batch = 1;
  for (int i = 0; i < a.rank() - 2; ++i) a_batch *= a.dim(i);
  i64 b_batch = 1;
  for (int i = 0; i < b.rank() - 2; ++i) b_batch *= b.dim(i);
  if (b.rank() == 2) {
    d.batch = a_batch;
    d.b_batched = false;
  } else if (a.rank() == b.rank() &&
             std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin())) {
    d.batch = a_batch;
    d.b_batched = true;
  } else {
    throw ShapeError("matmul: batch extents of " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()) + " are not compatible");
  }
  (void)b_batch;
  return d;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dtype() != b.dtype()) throw ShapeError("matmul: dtype mismatch");
  MatmulDims d = matmul_dims(a, b);
  Shape out_shape(a.shape().begin(), a.shape().end() - 2);
  out_shape.push_back(d.m);
  out_shape.push_back(d.n);

  Tensor out = make_op_result(out_shape, a.dtype(), "matmul", {a, b}, nullptr);
  dispatch(a.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    const T* pa = data_ptr<T>(a);
    const T* pb = data_ptr<T>(b);
    T* po = data_ptr<T>(out);
    for (i64 bi = 0; bi < d.batch; ++bi)
      gemm_acc(pa + bi * d.m * d.k, pb + (d.b_batched ? bi * d.k * d.n : 0), po + bi * d.m * d.n,
               d.m, d.k, d.n);
  });

  if (out.impl()->node) {
    Tensor ta = a, tb = b;
    MatmulDims dims = d;
    out.impl()->node->backward = [ta, tb, dims](const Tensor& o) {
      Tensor g = o.grad();
      dispatch(ta.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* pg = data_ptr<T>(g);
        const T* pa = data_ptr<T>(ta);
        const T* pb = data_ptr<T>(tb);
        Tensor ga = Tensor::zeros(ta.shape(), ta.dtype());
        Tensor gb = Tensor::zeros(tb.shape(), tb.dtype());
        T* pga = data_ptr<T>(ga);
        T* pgb = data_ptr<T>(gb);
        // dA = dC * B^T, dB = A^T * dC (summed over batch if B is shared).
        std::vector<T> bt(static_cast<size_t>(dims.k * dims.n));
        std::vector<T> at(static_cast<size_t>(dims.m * dims.k));
        for (i64 bi = 0; bi < dims.batch; ++bi) {
          const T* gb_mat = pb + (dims.b_batched ? bi * dims.k * dims.n : 0);
          transpose2d(gb_mat, bt.data(), dims.k, dims.n);  // bt: [n,k]
          gemm_acc(pg + bi * dims.m * dims.n, bt.data(), pga + bi * dims.m * dims.k, dims.m,
                   dims.n, dims.k);
          transpose2d(pa + bi * dims.m * dims.k, at.data(), dims.m, dims.k);  // at: [k,m]
          gemm_acc(at.data(), pg + bi * dims.m * dims.n,
                   pgb + (dims.b_batched ? bi * dims.k * dims.n : 0), dims.k, dims.m, dims.n);
        }
        accumulate_grad(ta, ga);
        accumulate_grad(tb, gb);
      });
    };
  }
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.rank() != 1 || bias.dim(0) != x.dim(x.rank() - 1))
    throw ShapeError("add_bias: bias " + shape_str(bias.shape()) +
                     " does not match trailing extent of " + shape_str(x.shape()));
  if (bias.dtype() != x.dtype()) throw ShapeError("add_bias: dtype mismatch");
  Tensor out = make_op_result(x.shape(), x.dtype(), "add_bias", {x, bias}, nullptr);
  i64 cols = bias.dim(0);
  i64 rows = x.numel() / cols;
  dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    const T* px = data_ptr<T>(x);
    const T* pb = data_ptr<T>(bias);
    T* po = data_ptr<T>(out);
    for (i64 r = 0; r < rows; ++r)
      for (i64 c = 0; c < cols; ++c) po[r * cols + c] = px[r * cols + c] + pb[c];
  });
  if (out.impl()->node) {
    Tensor tx = x, tb = bias;
    out.impl()->node->backward = [tx, tb, rows, cols](const Tensor& o) {
      Tensor g = o.grad();
      accumulate_grad(tx, g);
      Tensor gb = Tensor::zeros(tb.shape(), tb.dtype());
      dispatch(tb.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* pg = data_ptr<T>(g);
        T* pgb = data_ptr<T>(gb);
        for (i64 r = 0; r < rows; ++r)
          for (i64 c = 0; c < cols; ++c) pgb[c] += pg[r * cols + c];
      });
      accumulate_grad(tb, gb);
    };
  }
  return out;
}

// --------------------------------------------------------------------------
// normalization and softmax
// --------------------------------------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  i64 c = x.dim(x.rank() - 1);
  if (gamma.rank() != 1 || gamma.dim(0) != c || beta.rank() != 1 || beta.dim(0) != c)
    throw ShapeError("layer_norm: affine params " + shape_str(gamma.shape()) + "/" +
                     shape_str(beta.shape()) + " do not match trailing extent of " +
                     shape_str(x.shape()));
  i64 rows = x.numel() / c;
  Tensor out = make_op_result(x.shape(), x.dtype(), "layer_norm", {x, gamma, beta}, nullptr);
  // Per-row statistics saved for the backward pass.
  auto mean = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
  auto rstd = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
  dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    const T* px = data_ptr<T>(x);
    const T* pgm = data_ptr<T>(gamma);
    const T* pbt = data_ptr<T>(beta);
    T* po = data_ptr<T>(out);
    for (i64 r = 0; r < rows; ++r) {
      const T* row = px + r * c;
      double mu = 0;
      for (i64 i = 0; i < c; ++i) mu += static_cast<double>(row[i]);
      mu /= static_cast<double>(c);
      double var = 0;
      for (i64 i = 0; i < c; ++i) {
        double d = static_cast<double>(row[i]) - mu;
        var += d * d;
      }
      var /= static_cast<double>(c);
      double rs = 1.0 / std::sqrt(var + eps);
      (*mean)[static_cast<size_t>(r)] = mu;
      (*rstd)[static_cast<size_t>(r)] = rs;
      for (i64 i = 0; i < c; ++i) {
        double xhat = (static_cast<double>(row[i]) - mu) * rs;
        po[r * c + i] = static_cast<T>(xhat * static_cast<double>(pgm[i]) +
                                       static_cast<double>(pbt[i]));
      }
    }
  });
  if (out.impl()->node) {
    Tensor tx = x, tg = gamma, tb = beta;
    out.impl()->node->backward = [tx, tg, tb, mean, rstd, rows, c](const Tensor& o) {
      Tensor g = o.grad();
      Tensor gx = Tensor::zeros(tx.shape(), tx.dtype());
      Tensor gg = Tensor::zeros(tg.shape(), tg.dtype());
      Tensor gb = Tensor::zeros(tb.shape(), tb.dtype());
      dispatch(tx.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* px = data_ptr<T>(tx);
        const T* pgm = data_ptr<T>(tg);
        const T* pg = data_ptr<T>(g);
        T* pgx = data_ptr<T>(gx);
        T* pgg = data_ptr<T>(gg);
        T* pgb = data_ptr<T>(gb);
        for (i64 r = 0; r < rows; ++r) {
          double mu = (*mean)[static_cast<size_t>(r)];
          double rs = (*rstd)[static_cast<size_t>(r)];
          const T* row = px + r * c;
          const T* grow = pg + r * c;
          double sum_dxhat = 0, sum_dxhat_xhat = 0;
          for (i64 i = 0; i < c; ++i) {
            double xhat = (static_cast<double>(row[i]) - mu) * rs;
            double dxhat = static_cast<double>(grow[i]) * static_cast<double>(pgm[i]);
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
            pgg[i] += static_cast<T>(static_cast<double>(grow[i]) * xhat);
            pgb[i] += grow[i];
          }
          double inv_c = 1.0 / static_cast<double>(c);
          for (i64 i = 0; i < c; ++i) {
            double xhat = (static_cast<double>(row[i]) - mu) * rs;
            double dxhat = static_cast<double>(grow[i]) * static_cast<double>(pgm[i]);
            pgx[r * c + i] = static_cast<T>(
                rs * (dxhat - inv_c * sum_dxhat - xhat * inv_c * sum_dxhat_xhat));
          }
        }
      });
      accumulate_grad(tx, gx);
      accumulate_grad(tg, gg);
      accumulate_grad(tb, gb);
    };
  }
  return out;
}

namespace {
template <class T>
void softmax_rows(const T* src, T* dst, i64 outer, i64 extent, i64 inner, bool log_form) {
  for (i64 o = 0; o < outer; ++o)
    for (i64 in = 0; in < inner; ++in) {
      const T* s = src + o * extent * inner + in;
      T* d = dst + o * extent * inner + in;
      double mx = -1e308;
      for (i64 e = 0; e < extent; ++e) mx = std::max(mx, static_cast<double>(s[e * inner]));
      double denom = 0;
      for (i64 e = 0; e < extent; ++e) denom += std::exp(static_cast<double>(s[e * inner]) - mx);
      if (log_form) {
        double lden = std::log(denom);
        for (i64 e = 0; e < extent; ++e)
          d[e * inner] = static_cast<T>(static_cast<double>(s[e * inner]) - mx - lden);
      } else {
        for (i64 e = 0; e < extent; ++e)
          d[e * inner] =
              static_cast<T>(std::exp(static_cast<double>(s[e * inner]) - mx) / denom);
      }
    }
}
}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  int ax = normalize_axis(axis, x.rank(), "softmax");
  AxisView v = axis_view(x.shape(), ax);
  Tensor out = make_op_result(x.shape(), x.dtype(), "softmax", {x}, nullptr);
  dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    softmax_rows<T>(data_ptr<T>(x), data_ptr<T>(out), v.outer, v.extent, v.inner, false);
  });
  if (out.impl()->node) {
    Tensor tx = x;
    AxisView view = v;
    out.impl()->node->backward = [tx, view](const Tensor& o) {
      Tensor g = o.grad();
      Tensor gx = Tensor::zeros(tx.shape(), tx.dtype());
      dispatch(tx.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* py = data_ptr<T>(o);
        const T* pg = data_ptr<T>(g);
        T* pgx = data_ptr<T>(gx);
        for (i64 oo = 0; oo < view.outer; ++oo)
          for (i64 in = 0; in < view.inner; ++in) {
            i64 base = oo * view.extent * view.inner + in;
            double dot = 0;
            for (i64 e = 0; e < view.extent; ++e)
              dot += static_cast<double>(pg[base + e * view.inner]) *
                     static_cast<double>(py[base + e * view.inner]);
            for (i64 e = 0; e < view.extent; ++e) {
              i64 at = base + e * view.inner;
              pgx[at] = static_cast<T>(static_cast<double>(py[at]) *
                                       (static_cast<double>(pg[at]) - dot));
            }
          }
      });
      accumulate_grad(tx, gx);
    };
  }
  return out;
}

Tensor log_softmax(const Tensor& x, int axis) {
  int ax = normalize_axis(axis, x.rank(), "log_softmax");
  AxisView v = axis_view(x.shape(), ax);
  Tensor out = make_op_result(x.shape(), x.dtype(), "log_softmax", {x}, nullptr);
  dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    softmax_rows<T>(data_ptr<T>(x), data_ptr<T>(out), v.outer, v.extent, v.inner, true);
  });
  if (out.impl()->node) {
    Tensor tx = x;
    AxisView view = v;
    out.impl()->node->backward = [tx, view](const Tensor& o) {
      Tensor g = o.grad();
      Tensor gx = Tensor::zeros(tx.shape(), tx.dtype());
      dispatch(tx.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* py = data_ptr<T>(o);  // log-probabilities
        const T* pg = data_ptr<T>(g);
        T* pgx = data_ptr<T>(gx);
        for (i64 oo = 0; oo < view.outer; ++oo)
          for (i64 in = 0; in < view.inner; ++in) {
            i64 base = oo * view.extent * view.inner + in;
            double gsum = 0;
            for (i64 e = 0; e < view.extent; ++e)
              gsum += static_cast<double>(pg[base + e * view.inner]);
            for (i64 e = 0; e < view.extent; ++e) {
              i64 at = base + e * view.inner;
              pgx[at] = static_cast<T>(static_cast<double>(pg[at]) -
                                       std::exp(static_cast<double>(py[at])) * gsum);
            }
          }
      });
      accumulate_grad(tx, gx);
    };
  }
  return out;
}

// --------------------------------------------------------------------------
// resampling / gating / gathering
// --------------------------------------------------------------------------

Tensor bilinear_upsample(const Tensor& x, i64 out_h, i64 out_w) {
  if (x.rank() != 4)
    throw ShapeError("bilinear_upsample: expected [b,c,h,w], got " + shape_str(x.shape()));
  if (out_h <= 0 || out_w <= 0) throw ShapeError("bilinear_upsample: bad target size");
  i64 b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor out = make_op_result({b, c, out_h, out_w}, x.dtype(), "bilinear_upsample", {x},
                              nullptr);
  // Half-pixel centers, clamped at the borders.
  double sy = static_cast<double>(h) / static_cast<double>(out_h);
  double sx = static_cast<double>(w) / static_cast<double>(out_w);
  struct Tap {
    i64 lo, hi;
    double t;
  };
  std::vector<Tap> ty(static_cast<size_t>(out_h)), tx(static_cast<size_t>(out_w));
  auto make_tap = [](i64 o, double scale, i64 in_extent) {
    double pos = (static_cast<double>(o) + 0.5) * scale - 0.5;
    pos = std::max(0.0, std::min(pos, static_cast<double>(in_extent - 1)));
    i64 lo = static_cast<i64>(pos);
    i64 hi = std::min(lo + 1, in_extent - 1);
    return Tap{lo, hi, pos - static_cast<double>(lo)};
  };
  for (i64 oy = 0; oy < out_h; ++oy) ty[static_cast<size_t>(oy)] = make_tap(oy, sy, h);
  for (i64 ox = 0; ox < out_w; ++ox) tx[static_cast<size_t>(ox)] = make_tap(ox, sx, w);

  dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    const T* src = data_ptr<T>(x);
    T* dst = data_ptr<T>(out);
    for (i64 bc = 0; bc < b * c; ++bc) {
      const T* plane = src + bc * h * w;
      T* oplane = dst + bc * out_h * out_w;
      for (i64 oy = 0; oy < out_h; ++oy) {
        const Tap& yt = ty[static_cast<size_t>(oy)];
        for (i64 ox = 0; ox < out_w; ++ox) {
          const Tap& xt = tx[static_cast<size_t>(ox)];
          double v00 = static_cast<double>(plane[yt.lo * w + xt.lo]);
          double v01 = static_cast<double>(plane[yt.lo * w + xt.hi]);
          double v10 = static_cast<double>(plane[yt.hi * w + xt.lo]);
          double v11 = static_cast<double>(plane[yt.hi * w + xt.hi]);
          double top = v00 + (v01 - v00) * xt.t;
          double bot = v10 + (v11 - v10) * xt.t;
          oplane[oy * out_w + ox] = static_cast<T>(top + (bot - top) * yt.t);
        }
      }
    }
  });
  if (out.impl()->node) {
    Tensor tin = x;
    auto typ = std::make_shared<std::vector<Tap>>(ty);
    auto txp = std::make_shared<std::vector<Tap>>(tx);
    out.impl()->node->backward = [tin, typ, txp, b, c, h, w, out_h, out_w](const Tensor& o) {
      Tensor g = o.grad();
      Tensor gx = Tensor::zeros(tin.shape(), tin.dtype());
      dispatch(tin.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* pg = data_ptr<T>(g);
        T* dst = data_ptr<T>(gx);
        for (i64 bc = 0; bc < b * c; ++bc) {
          const T* gplane = pg + bc * out_h * out_w;
          T* iplane = dst + bc * h * w;
          for (i64 oy = 0; oy < out_h; ++oy) {
            const Tap& yt = (*typ)[static_cast<size_t>(oy)];
            for (i64 ox = 0; ox < out_w; ++ox) {
              const Tap& xt = (*txp)[static_cast<size_t>(ox)];
              double gv = static_cast<double>(gplane[oy * out_w + ox]);
              iplane[yt.lo * w + xt.lo] += static_cast<T>(gv * (1 - yt.t) * (1 - xt.t));
              iplane[yt.lo * w + xt.hi] += static_cast<T>(gv * (1 - yt.t) * xt.t);
              iplane[yt.hi * w + xt.lo] += static_cast<T>(gv * yt.t * (1 - xt.t));
              iplane[yt.hi * w + xt.hi] += static_cast<T>(gv * yt.t * xt.t);
            }
          }
        }
      });
      accumulate_grad(tin, gx);
    };
  }
  return out;
}

Tensor scale_channels(const Tensor& x, const Tensor& gates) {
  if (x.rank() != 4 || gates.rank() != 2 || gates.dim(0) != x.dim(0) ||
      gates.dim(1) != x.dim(1))
    throw ShapeError("scale_channels: gates " + shape_str(gates.shape()) +
                     " do not match maps " + shape_str(x.shape()));
  if (x.dtype() != gates.dtype()) throw ShapeError("scale_channels: dtype mismatch");
  i64 b = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor out = make_op_result(x.shape(), x.dtype(), "scale_channels", {x, gates}, nullptr);
  dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    const T* px = data_ptr<T>(x);
    const T* pgt = data_ptr<T>(gates);
    T* po = data_ptr<T>(out);
    for (i64 bc = 0; bc < b * c; ++bc) {
      T gv = pgt[bc];
      for (i64 i = 0; i < hw; ++i) po[bc * hw + i] = px[bc * hw + i] * gv;
    }
  });
  if (out.impl()->node) {
    Tensor tx = x, tg = gates;
    out.impl()->node->backward = [tx, tg, b, c, hw](const Tensor& o) {
      Tensor g = o.grad();
      Tensor gx = Tensor::zeros(tx.shape(), tx.dtype());
      Tensor gg = Tensor::zeros(tg.shape(), tg.dtype());
      dispatch(tx.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* pg = data_ptr<T>(g);
        const T* px = data_ptr<T>(tx);
        const T* pgt = data_ptr<T>(tg);
        T* pgx = data_ptr<T>(gx);
        T* pgg = data_ptr<T>(gg);
        for (i64 bc = 0; bc < b * c; ++bc) {
          T gv = pgt[bc];
          double acc = 0;
          for (i64 i = 0; i < hw; ++i) {
            pgx[bc * hw + i] = pg[bc * hw + i] * gv;
            acc += static_cast<double>(pg[bc * hw + i]) * static_cast<double>(px[bc * hw + i]);
          }
          pgg[bc] = static_cast<T>(acc);
        }
      });
      accumulate_grad(tx, gx);
      accumulate_grad(tg, gg);
    };
  }
  return out;
}

Tensor gather_class(const Tensor& x, const Labels& labels) {
  if (x.rank() != 4)
    throw ShapeError("gather_class: expected logits [b,C,h,w], got " + shape_str(x.shape()));
  if (labels.shape.size() != 3 || labels.shape[0] != x.dim(0) || labels.shape[1] != x.dim(2) ||
      labels.shape[2] != x.dim(3))
    throw ShapeError("gather_class: labels " + shape_str(labels.shape) +
                     " do not match logits " + shape_str(x.shape()));
  i64 b = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  for (std::uint8_t l : labels.data)
    if (l >= c)
      throw DataError("gather_class: label " + std::to_string(l) + " >= " + std::to_string(c) +
                      " classes");
  Tensor out = make_op_result({x.dim(0), x.dim(2), x.dim(3)}, x.dtype(), "gather_class", {x},
                              nullptr);
  auto lab = std::make_shared<std::vector<std::uint8_t>>(labels.data);
  dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    const T* px = data_ptr<T>(x);
    T* po = data_ptr<T>(out);
    for (i64 bi = 0; bi < b; ++bi)
      for (i64 i = 0; i < hw; ++i) {
        i64 cls = (*lab)[static_cast<size_t>(bi * hw + i)];
        po[bi * hw + i] = px[(bi * c + cls) * hw + i];
      }
  });
  if (out.impl()->node) {
    Tensor tx = x;
    out.impl()->node->backward = [tx, lab, b, c, hw](const Tensor& o) {
      Tensor g = o.grad();
      Tensor gx = Tensor::zeros(tx.shape(), tx.dtype());
      dispatch(tx.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* pg = data_ptr<T>(g);
        T* pgx = data_ptr<T>(gx);
        for (i64 bi = 0; bi < b; ++bi)
          for (i64 i = 0; i < hw; ++i) {
            i64 cls = (*lab)[static_cast<size_t>(bi * hw + i)];
            pgx[(bi * c + cls) * hw + i] = pg[bi * hw + i];
          }
      });
      accumulate_grad(tx, gx);
    };
  }
  return out;
}

}  // namespace lulcseg
