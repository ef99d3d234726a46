#include "lulcseg/decoder.hpp"

namespace lulcseg {

Decoder Decoder::make(ParamStore& ps, const std::string& name,
                      const std::array<i64, 4>& stage_channels, i64 decoder_dim,
                      i64 n_classes) {
  Decoder d;
  d.decoder_dim = decoder_dim;
  d.n_classes = n_classes;
  d.stage_channels = stage_channels;
  for (int i = 0; i < 4; ++i)
    d.project[static_cast<size_t>(i)] = Linear::make(ps, name + ".proj" + std::to_string(i + 1),
                                                     stage_channels[static_cast<size_t>(i)], decoder_dim);
  d.fuse = Linear::make(ps, name + ".fuse", 4 * decoder_dim, decoder_dim);
  d.classify = Linear::make(ps, name + ".cls", decoder_dim, n_classes);
  return d;
}

Tensor Decoder::forward(const std::array<Tensor, 4>& pyramid) const {
  i64 h0 = pyramid[0].dim(2), w0 = pyramid[0].dim(3);
  i64 eh = h0, ew = w0;
  for (int i = 0; i < 4; ++i) {
    const Tensor& p = pyramid[static_cast<size_t>(i)];
    if (p.rank() != 4 || p.dim(1) != stage_channels[static_cast<size_t>(i)])
      throw ShapeError("decoder: pyramid level " + std::to_string(i + 1) + " has shape " +
                       shape_str(p.shape()) + ", expected " +
                       std::to_string(stage_channels[static_cast<size_t>(i)]) + " channels");
    if (p.dim(2) != eh || p.dim(3) != ew)
      throw ShapeError("decoder: pyramid level " + std::to_string(i + 1) + " is " +
                       std::to_string(p.dim(2)) + "x" + std::to_string(p.dim(3)) +
                       ", expected " + std::to_string(eh) + "x" + std::to_string(ew));
    eh = (eh + 1) / 2;
    ew = (ew + 1) / 2;
  }

  std::vector<Tensor> upsampled;
  for (int i = 0; i < 4; ++i) {
    const Tensor& p = pyramid[static_cast<size_t>(i)];
    Tensor tokens = map_to_tokens(p);
    Tensor projected = project[static_cast<size_t>(i)].forward(tokens);
    Tensor map = tokens_to_map(projected, p.dim(2), p.dim(3));
    upsampled.push_back(i == 0 ? map : bilinear_upsample(map, h0, w0));
  }
  Tensor stacked = concat(upsampled, 1);  // [b, 4*dim, h0, w0]
  Tensor tokens = map_to_tokens(stacked);
  Tensor fused = fuse.forward(tokens);
  Tensor logits = classify.forward(fused);
  return tokens_to_map(logits, h0, w0);
}

i64 Decoder::flops(const std::array<std::pair<i64, i64>, 4>& resolutions) const {
  i64 total = 0;
  for (int i = 0; i < 4; ++i) {
    i64 n = resolutions[static_cast<size_t>(i)].first * resolutions[static_cast<size_t>(i)].second;
    total += project[static_cast<size_t>(i)].flops(n);
  }
  i64 n0 = resolutions[0].first * resolutions[0].second;
  total += fuse.flops(n0) + classify.flops(n0);
  return total;
}

Labels logits_to_labels(const Tensor& logits) {
  if (logits.rank() != 4) throw ShapeError("logits_to_labels: expected [b,C,h,w]");
  i64 b = logits.dim(0), c = logits.dim(1), hw = logits.dim(2) * logits.dim(3);
  Labels out({b, logits.dim(2), logits.dim(3)});
  for (i64 bi = 0; bi < b; ++bi)
    for (i64 i = 0; i < hw; ++i) {
      i64 best = 0;
      double best_v = logits.value_at((bi * c) * hw + i);
      for (i64 cls = 1; cls < c; ++cls) {
        double v = logits.value_at((bi * c + cls) * hw + i);
        if (v > best_v) {
          best_v = v;
          best = cls;
        }
      }
      out.data[static_cast<size_t>(bi * hw + i)] = static_cast<std::uint8_t>(best);
    }
  return out;
}

Labels resize_labels_nearest(const Labels& in, i64 out_h, i64 out_w) {
  if (in.shape.size() != 2 && in.shape.size() != 3)
    throw ShapeError("resize_labels_nearest: expected [h,w] or [b,h,w]");
  bool batched = in.shape.size() == 3;
  i64 b = batched ? in.shape[0] : 1;
  i64 h = in.shape[batched ? 1 : 0], w = in.shape[batched ? 2 : 1];
  Labels out(batched ? Shape{b, out_h, out_w} : Shape{out_h, out_w});
  double sy = static_cast<double>(h) / static_cast<double>(out_h);
  double sx = static_cast<double>(w) / static_cast<double>(out_w);
  auto src_of = [](i64 o, double scale, i64 extent) {
    i64 s = static_cast<i64>((static_cast<double>(o) + 0.5) * scale);
    return std::min(std::max<i64>(s, 0), extent - 1);
  };
  for (i64 bi = 0; bi < b; ++bi)
    for (i64 oy = 0; oy < out_h; ++oy) {
      i64 iy = src_of(oy, sy, h);
      for (i64 ox = 0; ox < out_w; ++ox) {
        i64 ix = src_of(ox, sx, w);
        out.data[static_cast<size_t>((bi * out_h + oy) * out_w + ox)] =
            in.data[static_cast<size_t>((bi * h + iy) * w + ix)];
      }
    }
  return out;
}

}  // namespace lulcseg
