#include <cstring>

#include "lulcseg/ops.hpp"

namespace lulcseg {

namespace {

struct ConvGeom {
  i64 b, cin, h, w;
  i64 cout, cin_g, kh, kw;
  i64 oh, ow;
  int stride, pad, groups;
};

ConvGeom conv_geom(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad,
                   int groups) {
  if (x.rank() != 4 || w.rank() != 4)
    throw ShapeError("conv2d: expected x [b,c,h,w] and w [oc,ic/g,kh,kw], got " +
                     shape_str(x.shape()) + " and " + shape_str(w.shape()));
  if (stride <= 0 || pad < 0 || groups <= 0) throw ShapeError("conv2d: bad stride/pad/groups");
  ConvGeom g;
  g.b = x.dim(0);
  g.cin = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.cout = w.dim(0);
  g.cin_g = w.dim(1);
  g.kh = w.dim(2);
  g.kw = w.dim(3);
  g.stride = stride;
  g.pad = pad;
  g.groups = groups;
  if (g.cin % groups != 0 || g.cout % groups != 0 || g.cin / groups != g.cin_g)
    throw ShapeError("conv2d: channel/group mismatch between x " + shape_str(x.shape()) +
                     " and w " + shape_str(w.shape()) + " with groups=" +
                     std::to_string(groups));
  if (g.h + 2 * pad < g.kh || g.w + 2 * pad < g.kw)
    throw ShapeError("conv2d: kernel " + shape_str(w.shape()) + " larger than padded input " +
                     shape_str(x.shape()));
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.cout))
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match out channels");
  g.oh = conv_out_extent(g.h, g.kh, stride, pad);
  g.ow = conv_out_extent(g.w, g.kw, stride, pad);
  return g;
}

template <class T>
void conv_forward(const T* x, const T* w, const T* bias, T* out, const ConvGeom& g) {
  i64 oc_per_group = g.cout / g.groups;
  for (i64 bi = 0; bi < g.b; ++bi) {
    for (i64 oc = 0; oc < g.cout; ++oc) {
      i64 grp = oc / oc_per_group;
      const T* wk = w + oc * g.cin_g * g.kh * g.kw;
      for (i64 oy = 0; oy < g.oh; ++oy) {
        i64 iy0 = oy * g.stride - g.pad;
        for (i64 ox = 0; ox < g.ow; ++ox) {
          i64 ix0 = ox * g.stride - g.pad;
          double acc = bias ? static_cast<double>(bias[oc]) : 0.0;
          for (i64 ic = 0; ic < g.cin_g; ++ic) {
            const T* plane = x + ((bi * g.cin + grp * g.cin_g + ic) * g.h) * g.w;
            const T* wp = wk + ic * g.kh * g.kw;
            for (i64 ky = 0; ky < g.kh; ++ky) {
              i64 iy = iy0 + ky;
              if (iy < 0 || iy >= g.h) continue;
              for (i64 kx = 0; kx < g.kw; ++kx) {
                i64 ix = ix0 + kx;
                if (ix < 0 || ix >= g.w) continue;
                acc += static_cast<double>(plane[iy * g.w + ix]) *
                       static_cast<double>(wp[ky * g.kw + kx]);
              }
            }
          }
          out[((bi * g.cout + oc) * g.oh + oy) * g.ow + ox] = static_cast<T>(acc);
        }
      }
    }
  }
}

template <class T>
void conv_backward(const T* x, const T* w, const T* gout, T* gx, T* gw, T* gb,
                   const ConvGeom& g) {
  i64 oc_per_group = g.cout / g.groups;
  for (i64 bi = 0; bi < g.b; ++bi) {
    for (i64 oc = 0; oc < g.cout; ++oc) {
      i64 grp = oc / oc_per_group;
      const T* wk = w + oc * g.cin_g * g.kh * g.kw;
      T* gwk = gw + oc * g.cin_g * g.kh * g.kw;
      for (i64 oy = 0; oy < g.oh; ++oy) {
        i64 iy0 = oy * g.stride - g.pad;
        for (i64 ox = 0; ox < g.ow; ++ox) {
          i64 ix0 = ox * g.stride - g.pad;
          T gv = gout[((bi * g.cout + oc) * g.oh + oy) * g.ow + ox];
          if (gb) gb[oc] += gv;
          if (gv == T(0)) continue;
          for (i64 ic = 0; ic < g.cin_g; ++ic) {
            i64 chan = bi * g.cin + grp * g.cin_g + ic;
            const T* plane = x + chan * g.h * g.w;
            T* gplane = gx + chan * g.h * g.w;
            const T* wp = wk + ic * g.kh * g.kw;
            T* gwp = gwk + ic * g.kh * g.kw;
            for (i64 ky = 0; ky < g.kh; ++ky) {
              i64 iy = iy0 + ky;
              if (iy < 0 || iy >= g.h) continue;
              for (i64 kx = 0; kx < g.kw; ++kx) {
                i64 ix = ix0 + kx;
                if (ix < 0 || ix >= g.w) continue;
                gplane[iy * g.w + ix] += wp[ky * g.kw + kx] * gv;
                gwp[ky * g.kw + kx] += plane[iy * g.w + ix] * gv;
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad,
              int groups) {
  ConvGeom g = conv_geom(x, w, bias, stride, pad, groups);
  std::vector<Tensor> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  Tensor out = make_op_result({g.b, g.cout, g.oh, g.ow}, x.dtype(), "conv2d",
                              std::move(inputs), nullptr);
  dispatch(x.dtype(), [&](auto tag) {
    using T = typename decltype(tag)::type;
    conv_forward<T>(data_ptr<T>(x), data_ptr<T>(w), bias.defined() ? data_ptr<T>(bias) : nullptr,
                    data_ptr<T>(out), g);
  });
  if (out.impl()->node) {
    Tensor tx = x, tw = w, tb = bias;
    ConvGeom geom = g;
    out.impl()->node->backward = [tx, tw, tb, geom](const Tensor& o) {
      Tensor gr = o.grad();
      Tensor gx = Tensor::zeros(tx.shape(), tx.dtype());
      Tensor gw = Tensor::zeros(tw.shape(), tw.dtype());
      Tensor gb = tb.defined() ? Tensor::zeros(tb.shape(), tb.dtype()) : Tensor();
      dispatch(tx.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        conv_backward<T>(data_ptr<T>(tx), data_ptr<T>(tw), data_ptr<T>(gr), data_ptr<T>(gx),
                         data_ptr<T>(gw), gb.defined() ? data_ptr<T>(gb) : nullptr, geom);
      });
      accumulate_grad(tx, gx);
      accumulate_grad(tw, gw);
      if (tb.defined()) accumulate_grad(tb, gb);
    };
  }
  return out;
}

}  // namespace lulcseg
