#include "lulcseg/synth.hpp"

#include <algorithm>
#include <cmath>

#include "lulcseg/rng.hpp"

namespace lulcseg {

ClassPalette ClassPalette::make(std::uint64_t seed, int n_classes) {
  if (n_classes < 1 || n_classes > kMaxClasses)
    throw ConfigError("palette: n_classes must lie in [1, " + std::to_string(kMaxClasses) +
                      "]");
  SplitMix64 rng(seed);
  ClassPalette p;
  p.n_classes = n_classes;
  p.spectral_mean.resize(static_cast<size_t>(n_classes));
  p.sar_base.resize(static_cast<size_t>(n_classes));
  for (int c = 0; c < n_classes; ++c) {
    for (int b = 0; b < kSpectralBands; ++b) {
      if (c % 2 == 1) {
        // Spectral twin of the previous class; only SAR tells them apart.
        double v = p.spectral_mean[static_cast<size_t>(c - 1)][static_cast<size_t>(b)] + 0.03;
        p.spectral_mean[static_cast<size_t>(c)][static_cast<size_t>(b)] = std::min(v, 0.85);
      } else {
        p.spectral_mean[static_cast<size_t>(c)][static_cast<size_t>(b)] = rng.uniform(0.15, 0.85);
      }
    }
    for (int b = 0; b < kSarBands; ++b) {
      // Spread base levels across classes so region structure shows in SAR.
      double lo = 0.2 + 0.7 * static_cast<double>(c) / static_cast<double>(n_classes);
      p.sar_base[static_cast<size_t>(c)][static_cast<size_t>(b)] = rng.uniform(lo, lo + 0.5);
    }
  }
  return p;
}

Scene generate_scene(std::uint64_t seed, const SceneConfig& cfg, const ClassPalette& palette) {
  if (cfg.size < 16) throw ConfigError("scene size must be >= 16");
  if (cfg.n_classes < 1 || cfg.n_classes > kMaxClasses)
    throw ConfigError("scene n_classes must lie in [1, " + std::to_string(kMaxClasses) + "]");
  if (cfg.n_classes > palette.n_classes)
    throw ConfigError("scene requests more classes than the palette defines");
  if (cfg.min_observations < 0 || cfg.max_observations < cfg.min_observations)
    throw ConfigError("scene observation range is inconsistent");

  if (cfg.label_grid < 1 || cfg.label_grid > cfg.size)
    throw ConfigError("scene label_grid must lie in [1, size]");

  SplitMix64 rng(seed);
  i64 s = cfg.size;
  Scene scene;

  // Seeded Voronoi partition over the label lattice; round-robin class
  // assignment guarantees every class owns at least one site.
  i64 g = cfg.label_grid;
  i64 ch = (s + g - 1) / g, cw = ch;
  i64 n_sites = std::min(ch * cw, std::max<i64>(cfg.n_classes, s * s / 400));
  std::vector<std::pair<i64, i64>> sites;
  while (static_cast<i64>(sites.size()) < n_sites) {
    i64 y = static_cast<i64>(rng.uniform_int(static_cast<std::uint64_t>(ch)));
    i64 x = static_cast<i64>(rng.uniform_int(static_cast<std::uint64_t>(cw)));
    bool dup = false;
    for (auto& q : sites) dup |= (q.first == y && q.second == x);
    if (!dup) sites.emplace_back(y, x);
  }

  std::vector<std::uint8_t> lattice(static_cast<size_t>(ch * cw));
  for (i64 y = 0; y < ch; ++y)
    for (i64 x = 0; x < cw; ++x) {
      i64 best = 0, best_d = -1;
      for (i64 i = 0; i < n_sites; ++i) {
        i64 dy = y - sites[static_cast<size_t>(i)].first;
        i64 dx = x - sites[static_cast<size_t>(i)].second;
        i64 d = dy * dy + dx * dx;
        if (best_d < 0 || d < best_d) {
          best_d = d;
          best = i;
        }
      }
      lattice[static_cast<size_t>(y * cw + x)] =
          static_cast<std::uint8_t>(best % cfg.n_classes);
    }

  scene.labels = Labels({s, s});
  for (i64 y = 0; y < s; ++y)
    for (i64 x = 0; x < s; ++x)
      scene.labels.data[static_cast<size_t>(y * s + x)] =
          lattice[static_cast<size_t>((y / g) * cw + (x / g))];

  scene.spectral = Tensor::zeros({kSpectralBands, s, s}, DType::f32);
  float* spec = scene.spectral.f32();
  for (int b = 0; b < kSpectralBands; ++b)
    for (i64 i = 0; i < s * s; ++i) {
      int cls = scene.labels.data[static_cast<size_t>(i)];
      double v = palette.spectral_mean[static_cast<size_t>(cls)][static_cast<size_t>(b)] +
                 palette.spectral_noise_std * rng.normal();
      spec[b * s * s + i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }

  int n_obs = cfg.min_observations +
              static_cast<int>(rng.uniform_int(
                  static_cast<std::uint64_t>(cfg.max_observations - cfg.min_observations + 1)));
  std::vector<int> offsets(static_cast<size_t>(n_obs));
  for (int& o : offsets) o = static_cast<int>(rng.uniform_int(361)) - 180;
  std::sort(offsets.begin(), offsets.end());
  scene.series.day_offsets = offsets;
  double inv_l = 1.0 / palette.speckle_shape;
  for (int t = 0; t < n_obs; ++t) {
    Tensor obs = Tensor::zeros({kSarBands, s, s}, DType::f32);
    float* p = obs.f32();
    for (int b = 0; b < kSarBands; ++b)
      for (i64 i = 0; i < s * s; ++i) {
        int cls = scene.labels.data[static_cast<size_t>(i)];
        double base = palette.sar_base[static_cast<size_t>(cls)][static_cast<size_t>(b)];
        p[b * s * s + i] = static_cast<float>(base * rng.gamma(palette.speckle_shape, inv_l));
      }
    scene.series.observations.push_back(obs);
  }

  char id[32];
  std::snprintf(id, sizeof(id), "p%016llx", static_cast<unsigned long long>(seed));
  scene.patch_id = id;
  return scene;
}

Scene generate_scene(std::uint64_t seed, i64 size, int n_classes) {
  SceneConfig cfg;
  cfg.size = size;
  cfg.n_classes = n_classes;
  return generate_scene(seed, cfg, ClassPalette::make(seed, n_classes));
}

std::optional<Tensor> composite_sar(const SarTimeSeries& series, int window_days) {
  if (window_days <= 0) throw ConfigError("composite window must be positive");
  if (series.observations.size() != series.day_offsets.size())
    throw DataError("SAR series: observation and offset counts differ");
  std::vector<size_t> in_window;
  for (size_t i = 0; i < series.day_offsets.size(); ++i)
    if (2 * std::abs(series.day_offsets[i]) <= window_days) in_window.push_back(i);
  if (in_window.empty()) return std::nullopt;

  const Tensor& first = series.observations[in_window[0]];
  i64 n = first.numel();
  std::vector<double> acc(static_cast<size_t>(n), 0.0);
  for (size_t idx : in_window) {
    const Tensor& obs = series.observations[idx];
    if (obs.shape() != first.shape())
      throw DataError("SAR series: observation shapes differ, " + shape_str(obs.shape()) +
                      " vs " + shape_str(first.shape()));
    const float* p = obs.f32();
    for (i64 i = 0; i < n; ++i) acc[static_cast<size_t>(i)] += static_cast<double>(p[i]);
  }
  Tensor out = Tensor::zeros(first.shape(), DType::f32);
  float* po = out.f32();
  double inv = 1.0 / static_cast<double>(in_window.size());
  for (i64 i = 0; i < n; ++i) po[i] = static_cast<float>(acc[static_cast<size_t>(i)] * inv);
  return out;
}

}  // namespace lulcseg
