#include "lulcseg/trainer.hpp"

#include <chrono>
#include <cmath>

#include "lulcseg/decoder.hpp"
#include "lulcseg/optim.hpp"
#include "lulcseg/rng.hpp"

namespace lulcseg {

namespace {

// Substream tags so the parameter-init draws and the shuffle/augment draws
// never interleave.
constexpr std::uint64_t kTrainStream = 0x7261696e;

void rotate90_plane(const float* src, float* dst, i64 h, i64 w) {
  // (y, x) -> (x, h-1-y): 90 degrees counter-clockwise output is [w,h].
  for (i64 y = 0; y < h; ++y)
    for (i64 x = 0; x < w; ++x) dst[(w - 1 - x) * h + y] = src[y * w + x];
}

void flip_plane(const float* src, float* dst, i64 h, i64 w) {
  for (i64 y = 0; y < h; ++y)
    for (i64 x = 0; x < w; ++x) dst[y * w + (w - 1 - x)] = src[y * w + x];
}

Tensor transform_stack(const Tensor& stack, int quarter_turns, bool flip) {
  i64 c = stack.dim(0), h = stack.dim(1), w = stack.dim(2);
  Tensor cur = stack.clone();
  for (int t = 0; t < quarter_turns; ++t) {
    Tensor next = Tensor::zeros({c, w, h}, stack.dtype());
    for (i64 ci = 0; ci < c; ++ci)
      rotate90_plane(cur.f32() + ci * h * w, next.f32() + ci * h * w, h, w);
    cur = next;
    std::swap(h, w);
  }
  if (flip) {
    Tensor next = Tensor::zeros({c, h, w}, stack.dtype());
    for (i64 ci = 0; ci < c; ++ci)
      flip_plane(cur.f32() + ci * h * w, next.f32() + ci * h * w, h, w);
    cur = next;
  }
  return cur;
}

Labels transform_labels(const Labels& labels, int quarter_turns, bool flip) {
  i64 h = labels.shape[0], w = labels.shape[1];
  Labels cur = labels;
  for (int t = 0; t < quarter_turns; ++t) {
    Labels next(Shape{w, h});
    for (i64 y = 0; y < h; ++y)
      for (i64 x = 0; x < w; ++x)
        next.data[static_cast<size_t>((w - 1 - x) * h + y)] =
            cur.data[static_cast<size_t>(y * w + x)];
    cur = next;
    std::swap(h, w);
  }
  if (flip) {
    Labels next(Shape{h, w});
    for (i64 y = 0; y < h; ++y)
      for (i64 x = 0; x < w; ++x)
        next.data[static_cast<size_t>(y * w + (w - 1 - x))] =
            cur.data[static_cast<size_t>(y * w + x)];
    cur = next;
  }
  return cur;
}

struct Batch {
  Tensor spectral, sar;
  Labels labels;
};

Batch assemble_batch(const std::vector<PatchSample>& data, const std::vector<size_t>& idx,
                     DType dtype) {
  i64 b = static_cast<i64>(idx.size());
  i64 s = data[idx[0]].spectral.dim(1);
  Batch batch;
  batch.spectral = Tensor::zeros({b, kSpectralBands, s, s}, dtype);
  batch.sar = Tensor::zeros({b, kSarBands, s, s}, dtype);
  batch.labels = Labels({b, s, s});
  for (i64 bi = 0; bi < b; ++bi) {
    const PatchSample& p = data[idx[static_cast<size_t>(bi)]];
    if (p.spectral.dim(1) != s || p.spectral.dim(2) != s)
      throw DataError("dataset mixes patch extents");
    for (i64 i = 0; i < p.spectral.numel(); ++i)
      batch.spectral.set_value_at(bi * p.spectral.numel() + i, p.spectral.value_at(i));
    for (i64 i = 0; i < p.sar.numel(); ++i)
      batch.sar.set_value_at(bi * p.sar.numel() + i, p.sar.value_at(i));
    std::copy(p.labels.data.begin(), p.labels.data.end(),
              batch.labels.data.begin() + static_cast<std::ptrdiff_t>(bi * s * s));
  }
  return batch;
}

Tensor compute_loss(const RunConfig& cfg, const FocalConfig& focal, const Tensor& logits,
                    const Labels& quarter_labels) {
  switch (cfg.loss_kind) {
    case LossKind::kFocal: return focal_loss(logits, quarter_labels, focal);
    case LossKind::kCrossEntropy: return ce_loss(logits, quarter_labels);
    case LossKind::kBinaryCrossEntropy: return bce_loss(logits, quarter_labels);
  }
  throw ConfigError("unknown loss kind");
}

}  // namespace

PatchSample dihedral_transform(const PatchSample& sample, int element) {
  if (element < 0 || element >= 8) throw ConfigError("dihedral element out of range");
  int turns = element & 3;
  bool flip = (element & 4) != 0;
  PatchSample out;
  out.spectral = transform_stack(sample.spectral, turns, flip);
  out.sar = transform_stack(sample.sar, turns, flip);
  out.labels = transform_labels(sample.labels, turns, flip);
  out.patch_id = sample.patch_id;
  return out;
}

std::vector<i64> class_histogram(const std::vector<PatchSample>& data, int n_classes) {
  std::vector<i64> hist(static_cast<size_t>(n_classes), 0);
  for (const PatchSample& p : data)
    for (std::uint8_t l : p.labels.data) {
      if (l >= n_classes)
        throw DataError("dataset label " + std::to_string(l) + " out of range for " +
                        std::to_string(n_classes) + " classes");
      hist[l]++;
    }
  return hist;
}

FocalConfig make_focal_config(const RunConfig& cfg, const std::vector<PatchSample>& data) {
  FocalConfig focal;
  focal.gamma = cfg.focal_gamma;
  if (cfg.alpha_mode == AlphaMode::kInverseFrequency)
    focal.alpha = inverse_frequency_alpha(class_histogram(data, cfg.n_classes));
  return focal;
}

TrainResult run_training(Network& net, const std::vector<PatchSample>& data,
                         const RunConfig& cfg,
                         const std::function<void(i64 epoch)>& on_epoch_end) {
  if (data.empty()) throw DataError("training dataset is empty");
  cfg.validate();
  i64 s = data[0].spectral.dim(1);
  net.config().validate(s, s);

  FocalConfig focal = make_focal_config(cfg, data);
  AdamWConfig opt_cfg;
  opt_cfg.beta1 = cfg.beta1;
  opt_cfg.beta2 = cfg.beta2;
  opt_cfg.eps = cfg.adam_eps;
  opt_cfg.weight_decay = cfg.weight_decay;
  std::vector<Tensor> params;
  for (const ParamStore::Entry& e : net.params().entries()) params.push_back(e.tensor);
  AdamW opt(params, opt_cfg);

  SplitMix64 rng = SplitMix64(cfg.seed).fork(kTrainStream);
  i64 n = static_cast<i64>(data.size());
  i64 steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  i64 total_steps = cfg.epochs * steps_per_epoch;

  TrainResult result;
  std::vector<size_t> order(static_cast<size_t>(n));
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  i64 step = 0;
  for (i64 epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates from the training stream.
    for (i64 i = n - 1; i > 0; --i) {
      i64 j = static_cast<i64>(rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }
    for (i64 start = 0; start < n; start += cfg.batch_size) {
      std::vector<size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                              order.begin() +
                                  static_cast<std::ptrdiff_t>(std::min(n, start + cfg.batch_size)));
      std::vector<PatchSample> staged;
      staged.reserve(idx.size());
      std::vector<size_t> staged_idx;
      for (size_t k = 0; k < idx.size(); ++k) {
        const PatchSample& p = data[idx[k]];
        if (cfg.augment)
          staged.push_back(dihedral_transform(p, static_cast<int>(rng.uniform_int(8))));
        else
          staged.push_back(p);
        staged_idx.push_back(k);
      }
      Batch batch = assemble_batch(staged, staged_idx, net.params().dtype());

      Tensor logits = net.forward(batch.spectral, batch.sar);
      Labels quarter = resize_labels_nearest(batch.labels, logits.dim(2), logits.dim(3));
      Tensor loss = compute_loss(cfg, focal, logits, quarter);
      double loss_v = loss.scalar_value();
      if (!std::isfinite(loss_v))
        throw NumericError("non-finite loss at step " + std::to_string(step));

      net.params().zero_grad();
      backward(loss);
      double lr = cosine_lr(step, total_steps, cfg.lr0);
      opt.step(lr);

      result.log.push_back({step, lr, loss_v});
      result.final_loss = loss_v;
      ++step;
    }
    if (on_epoch_end) on_epoch_end(epoch);
  }
  return result;
}

EvalResult evaluate_model(Network& net, const std::vector<PatchSample>& data) {
  if (data.empty()) throw DataError("evaluation dataset is empty");
  NoGradGuard no_grad;
  int n_classes = static_cast<int>(net.config().n_classes);
  EvalResult result{MetricsSummary{}, ConfusionMatrix(n_classes), 0.0};
  double forward_seconds = 0;
  for (const PatchSample& p : data) {
    std::vector<PatchSample> one{p};
    Batch batch = assemble_batch(one, {0}, net.params().dtype());
    auto t0 = std::chrono::steady_clock::now();
    Tensor logits = net.forward(batch.spectral, batch.sar);
    auto t1 = std::chrono::steady_clock::now();
    forward_seconds += std::chrono::duration<double>(t1 - t0).count();
    Labels quarter = logits_to_labels(logits);
    Labels full = resize_labels_nearest(quarter, p.labels.shape[0], p.labels.shape[1]);
    Labels truth({1, p.labels.shape[0], p.labels.shape[1]});
    truth.data = p.labels.data;
    result.confusion.accumulate(full, truth);
  }
  result.metrics = compute_metrics(result.confusion);
  result.fps = forward_seconds > 0 ? static_cast<double>(data.size()) / forward_seconds : 0.0;
  return result;
}

Labels infer_labels(Network& net, const PatchSample& sample) {
  NoGradGuard no_grad;
  std::vector<PatchSample> one{sample};
  Batch batch = assemble_batch(one, {0}, net.params().dtype());
  Tensor logits = net.forward(batch.spectral, batch.sar);
  Labels quarter = logits_to_labels(logits);
  Labels full = resize_labels_nearest(quarter, sample.labels.shape[0], sample.labels.shape[1]);
  Labels single(Shape{sample.labels.shape[0], sample.labels.shape[1]});
  single.data = full.data;
  return single;
}

}  // namespace lulcseg
