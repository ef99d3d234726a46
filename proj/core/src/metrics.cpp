#include "lulcseg/metrics.hpp"

#include <cmath>
#include <limits>

namespace lulcseg {

ConfusionMatrix::ConfusionMatrix(int n_classes)
    : n_classes_(n_classes),
      counts_(static_cast<size_t>(n_classes) * static_cast<size_t>(n_classes), 0) {
  if (n_classes < 1) throw ConfigError("confusion matrix needs at least one class");
}

void ConfusionMatrix::accumulate(const Labels& pred, const Labels& truth) {
  if (pred.shape != truth.shape)
    throw DataError("confusion matrix: prediction " + shape_str(pred.shape) +
                    " does not match truth " + shape_str(truth.shape));
  for (size_t i = 0; i < truth.data.size(); ++i) {
    int t = truth.data[i], p = pred.data[i];
    if (t >= n_classes_ || p >= n_classes_)
      throw DataError("confusion matrix: label " + std::to_string(std::max(t, p)) +
                      " out of range for " + std::to_string(n_classes_) + " classes");
    counts_[static_cast<size_t>(t * n_classes_ + p)]++;
  }
}

void ConfusionMatrix::add(int truth, int pred, i64 count) {
  counts_[static_cast<size_t>(truth * n_classes_ + pred)] += count;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.n_classes_ != n_classes_)
    throw DataError("confusion matrix: class count mismatch in merge");
  for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

i64 ConfusionMatrix::total() const {
  i64 t = 0;
  for (i64 v : counts_) t += v;
  return t;
}

MetricsSummary compute_metrics(const ConfusionMatrix& cm) {
  int n = cm.n_classes();
  MetricsSummary s;
  s.iou.assign(static_cast<size_t>(n), std::numeric_limits<double>::quiet_NaN());

  i64 total = cm.total(), trace = 0;
  double iou_sum = 0, f1_sum = 0;
  int present = 0;
  for (int c = 0; c < n; ++c) {
    i64 tp = cm.at(c, c);
    trace += tp;
    i64 row = 0, col = 0;
    for (int j = 0; j < n; ++j) {
      row += cm.at(c, j);  // truth = c
      col += cm.at(j, c);  // pred  = c
    }
    i64 fp = col - tp, fn = row - tp;
    if (tp + fp + fn == 0) continue;  // class absent everywhere: not scored
    present++;
    double iou = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    s.iou[static_cast<size_t>(c)] = iou;
    iou_sum += iou;
    double precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    double recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    double f1 = (precision + recall) > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    f1_sum += f1;
  }
  if (present > 0) {
    s.miou = iou_sum / present;
    s.f1 = f1_sum / present;
  }
  s.oa = total > 0 ? static_cast<double>(trace) / static_cast<double>(total) : 0.0;
  return s;
}

i64 linear_param_count(i64 in, i64 out) { return in * out + out; }

i64 conv_param_count(i64 in, i64 out, i64 k, i64 groups) {
  return out * (in / groups) * k * k + out;
}

}  // namespace lulcseg
