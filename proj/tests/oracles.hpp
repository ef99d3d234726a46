// Test-side oracles, deliberately independent of the library's backward
// pass and metric implementations: finite differences evaluate only the
// forward path, the attention reference is scalar loops, metrics use exact
// rational arithmetic.
#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "lulcseg/metrics.hpp"
#include "lulcseg/tensor.hpp"

namespace oracles {

using lulcseg::i64;
using lulcseg::Tensor;

// Central finite difference of a scalar function with respect to one
// coordinate of `t`, step h (forward evaluations only).
template <class Fn>
double central_difference(Fn&& f, Tensor t, i64 coord, double h = 1e-5) {
  lulcseg::NoGradGuard no_grad;
  double saved = t.value_at(coord);
  t.set_value_at(coord, saved + h);
  double up = f();
  t.set_value_at(coord, saved - h);
  double down = f();
  t.set_value_at(coord, saved);
  return (up - down) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) / scale;
}

// Dense multi-head attention with projections, scalar loops all the way
// down. Weights are row-major [in][out]; biases per output. Queries come
// from `xq`, keys and values from `xkv` (pass the same stack for
// self-attention).
struct DenseAttentionRef {
  i64 channels, heads;
  std::vector<double> wq, bq, wk, bk, wv, bv, wo, bo;

  static std::vector<double> apply_linear(const std::vector<double>& w,
                                          const std::vector<double>& b,
                                          const std::vector<double>& in, i64 in_dim,
                                          i64 out_dim) {
    std::vector<double> out(static_cast<size_t>(out_dim), 0.0);
    for (i64 o = 0; o < out_dim; ++o) {
      double acc = b[static_cast<size_t>(o)];
      for (i64 i = 0; i < in_dim; ++i)
        acc += in[static_cast<size_t>(i)] * w[static_cast<size_t>(i * out_dim + o)];
      out[static_cast<size_t>(o)] = acc;
    }
    return out;
  }

  std::vector<std::vector<double>> run(const std::vector<std::vector<double>>& xq,
                                       const std::vector<std::vector<double>>& xkv) const {
    i64 n = static_cast<i64>(xq.size());
    i64 m = static_cast<i64>(xkv.size());
    i64 d = channels / heads;
    std::vector<std::vector<double>> q, k, v;
    for (i64 t = 0; t < n; ++t)
      q.push_back(apply_linear(wq, bq, xq[static_cast<size_t>(t)], channels, channels));
    for (i64 t = 0; t < m; ++t) {
      k.push_back(apply_linear(wk, bk, xkv[static_cast<size_t>(t)], channels, channels));
      v.push_back(apply_linear(wv, bv, xkv[static_cast<size_t>(t)], channels, channels));
    }
    std::vector<std::vector<double>> mixed(static_cast<size_t>(n),
                                           std::vector<double>(static_cast<size_t>(channels), 0.0));
    double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (i64 h = 0; h < heads; ++h) {
      i64 base = h * d;
      for (i64 ti = 0; ti < n; ++ti) {
        std::vector<double> logits(static_cast<size_t>(m));
        double mx = -1e300;
        for (i64 tj = 0; tj < m; ++tj) {
          double dot = 0;
          for (i64 e = 0; e < d; ++e)
            dot += q[static_cast<size_t>(ti)][static_cast<size_t>(base + e)] *
                   k[static_cast<size_t>(tj)][static_cast<size_t>(base + e)];
          logits[static_cast<size_t>(tj)] = dot * scale;
          mx = std::max(mx, logits[static_cast<size_t>(tj)]);
        }
        double denom = 0;
        for (i64 tj = 0; tj < m; ++tj) denom += std::exp(logits[static_cast<size_t>(tj)] - mx);
        for (i64 tj = 0; tj < m; ++tj) {
          double a = std::exp(logits[static_cast<size_t>(tj)] - mx) / denom;
          for (i64 e = 0; e < d; ++e)
            mixed[static_cast<size_t>(ti)][static_cast<size_t>(base + e)] +=
                a * v[static_cast<size_t>(tj)][static_cast<size_t>(base + e)];
        }
      }
    }
    std::vector<std::vector<double>> out;
    for (i64 t = 0; t < n; ++t)
      out.push_back(apply_linear(wo, bo, mixed[static_cast<size_t>(t)], channels, channels));
    return out;
  }
};

// Scalar AdamW reference, hand-coded from the decoupled update rule.
struct AdamWRef {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.01;
  double m = 0, v = 0;
  i64 t = 0;

  double step(double param, double grad, double lr) {
    ++t;
    m = beta1 * m + (1 - beta1) * grad;
    v = beta2 * v + (1 - beta2) * grad * grad;
    double mhat = m / (1 - std::pow(beta1, static_cast<double>(t)));
    double vhat = v / (1 - std::pow(beta2, static_cast<double>(t)));
    return param - lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * param);
  }
};

// Exact rational p/q with i64 arithmetic, enough for confusion-matrix
// metrics on small counts.
struct Rational {
  long long num = 0, den = 1;

  static long long gcd(long long a, long long b) { return b == 0 ? a : gcd(b, a % b); }
  static Rational make(long long n, long long d) {
    long long g = gcd(n < 0 ? -n : n, d < 0 ? -d : d);
    if (g == 0) g = 1;
    return Rational{n / g, d / g};
  }
  Rational operator+(const Rational& o) const {
    return make(num * o.den + o.num * den, den * o.den);
  }
  Rational operator*(const Rational& o) const { return make(num * o.num, den * o.den); }
  Rational operator/(const Rational& o) const { return make(num * o.den, den * o.num); }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

struct RationalMetrics {
  std::vector<double> iou;  // NaN when unsupported
  double miou, oa, f1;
};

// Metrics recomputed from first principles in exact arithmetic; the only
// doubles appear in the final conversions.
inline RationalMetrics rational_metrics(const lulcseg::ConfusionMatrix& cm) {
  int n = cm.n_classes();
  RationalMetrics r;
  r.iou.assign(static_cast<size_t>(n), std::nan(""));
  Rational iou_sum{0, 1}, f1_sum{0, 1};
  long long present = 0, total = 0, trace = 0;
  for (int c = 0; c < n; ++c) {
    long long tp = cm.at(c, c), row = 0, col = 0;
    for (int j = 0; j < n; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
      total += cm.at(c, j);
    }
    trace += tp;
    long long fp = col - tp, fn = row - tp;
    if (tp + fp + fn == 0) continue;
    present++;
    Rational iou = Rational::make(tp, tp + fp + fn);
    r.iou[static_cast<size_t>(c)] = iou.value();
    iou_sum = iou_sum + iou;
    Rational precision = (tp + fp) > 0 ? Rational::make(tp, tp + fp) : Rational{0, 1};
    Rational recall = (tp + fn) > 0 ? Rational::make(tp, tp + fn) : Rational{0, 1};
    Rational pr = precision + recall;
    Rational f1 = pr.num == 0 ? Rational{0, 1}
                              : Rational::make(2, 1) * precision * recall / pr;
    f1_sum = f1_sum + f1;
  }
  r.miou = present ? (iou_sum / Rational::make(present, 1)).value() : 0.0;
  r.f1 = present ? (f1_sum / Rational::make(present, 1)).value() : 0.0;
  r.oa = total ? Rational::make(trace, total).value() : 0.0;
  return r;
}

}  // namespace oracles
