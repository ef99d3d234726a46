#pragma once

#include <vector>

#include "lulcseg/common.hpp"

namespace lulcseg {

// Row = true class, column = predicted class. Accumulation is associative
// and commutative, so shards merge by addition.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int n_classes);

  void accumulate(const Labels& pred, const Labels& truth);
  void add(int truth, int pred, i64 count = 1);
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  i64 at(int truth, int pred) const {
    return counts_[static_cast<size_t>(truth * n_classes_ + pred)];
  }
  int n_classes() const { return n_classes_; }
  i64 total() const;

 private:
  int n_classes_;
  std::vector<i64> counts_;
};

struct MetricsSummary {
  // Per-class IoU; NaN for classes absent from both truth and prediction.
  std::vector<double> iou;
  double miou = 0;  // mean IoU over classes present in truth or prediction
  double oa = 0;    // overall accuracy, trace/total
  double f1 = 0;    // macro F1 over classes with nonzero support
};

MetricsSummary compute_metrics(const ConfusionMatrix& cm);

// Counting conventions shared by the cost report and its tests.
i64 linear_param_count(i64 in, i64 out);               // weights + bias
i64 conv_param_count(i64 in, i64 out, i64 k, i64 groups);

}  // namespace lulcseg
