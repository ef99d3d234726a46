#pragma once

#include <functional>

#include "lulcseg/config.hpp"
#include "lulcseg/loss.hpp"
#include "lulcseg/metrics.hpp"
#include "lulcseg/network.hpp"
#include "lulcseg/synth.hpp"

namespace lulcseg {

struct StepRecord {
  i64 step;
  double lr;
  double loss;
};

struct TrainResult {
  std::vector<StepRecord> log;
  double final_loss = 0;
};

// Dihedral-group augmentation: k quarter turns plus an optional horizontal
// flip, applied consistently to both modalities and the labels.
PatchSample dihedral_transform(const PatchSample& sample, int element);

// Class histogram over the label planes of a dataset.
std::vector<i64> class_histogram(const std::vector<PatchSample>& data, int n_classes);

// Focal alpha weights according to the configured mode.
FocalConfig make_focal_config(const RunConfig& cfg, const std::vector<PatchSample>& data);

// Deterministic single-threaded training loop. Shuffling and augmentation
// draw from a stream forked off cfg.seed; the loss is evaluated at the
// stage-1 resolution against nearest-downsampled labels. Throws NumericError
// on a non-finite loss. `on_epoch_end` (optional) runs after each epoch.
TrainResult run_training(Network& net, const std::vector<PatchSample>& data,
                         const RunConfig& cfg,
                         const std::function<void(i64 epoch)>& on_epoch_end = nullptr);

struct EvalResult {
  MetricsSummary metrics;
  ConfusionMatrix confusion;
  double fps = 0;  // wall-clock forward passes per second, batch 1
};

// Full-resolution evaluation: predictions are nearest-upsampled back to the
// patch extent and scored against the stored labels.
EvalResult evaluate_model(Network& net, const std::vector<PatchSample>& data);

// Single-patch inference; returns the full-resolution label map.
Labels infer_labels(Network& net, const PatchSample& sample);

}  // namespace lulcseg
