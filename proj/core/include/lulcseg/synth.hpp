#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "lulcseg/tensor.hpp"

namespace lulcseg {

// One bimodal training tile: a 10-band reflectance-like stack, a 2-band
// (VV/VH analog) backscatter composite and a per-pixel class map.
struct PatchSample {
  Tensor spectral;  // [10, S, S] float32 in [0,1]
  Tensor sar;       // [2, S, S] float32
  Labels labels;    // [S, S], values < 9
  std::string patch_id;
};

constexpr int kSpectralBands = 10;
constexpr int kSarBands = 2;
constexpr int kMaxClasses = 9;

// Raw backscatter observations across a 360-day window centered on the
// label date; offsets in days, sorted ascending.
struct SarTimeSeries {
  std::vector<Tensor> observations;  // each [2, S, S]
  std::vector<int> day_offsets;      // in [-180, 180]
};

// Per-class appearance model shared by every patch of a dataset. Odd classes
// reuse the previous class's spectral signature with a small offset while
// keeping a distinct backscatter level, so separating them demands the SAR
// modality.
struct ClassPalette {
  int n_classes = kMaxClasses;
  std::vector<std::array<double, kSpectralBands>> spectral_mean;
  std::vector<std::array<double, kSarBands>> sar_base;
  double spectral_noise_std = 0.04;
  double speckle_shape = 4.0;  // gamma L; unit-mean multiplicative speckle

  static ClassPalette make(std::uint64_t seed, int n_classes);
};

struct SceneConfig {
  i64 size = 64;          // square patch extent; >= 16
  int n_classes = kMaxClasses;
  int min_observations = 0;  // SAR revisit count range, inclusive
  int max_observations = 8;
  // Label-region granularity in pixels: regions are constant over
  // label_grid x label_grid blocks. 1 gives pixel-grained boundaries;
  // 4 aligns regions with the model's output stride, which keeps fitting
  // benchmarks free of irreducible resampling error.
  i64 label_grid = 1;
};

struct Scene {
  Tensor spectral;       // [10, S, S]
  Labels labels;         // [S, S]
  SarTimeSeries series;  // raw SAR stack, possibly empty
  std::string patch_id;
};

// Deterministic synthetic scene: a seeded Voronoi partition of the tile into
// contiguous class regions, per-class spectral signatures plus Gaussian
// noise, and one speckled SAR frame per day offset (class-dependent base
// level times unit-mean gamma noise).
Scene generate_scene(std::uint64_t seed, const SceneConfig& cfg, const ClassPalette& palette);

// Convenience overload deriving the palette from the same seed.
Scene generate_scene(std::uint64_t seed, i64 size, int n_classes);

// Mean of the observations with |offset| <= window_days/2. No observation in
// the window yields absent: such a patch carries no usable SAR and is
// discarded upstream rather than treated as an error.
std::optional<Tensor> composite_sar(const SarTimeSeries& series, int window_days);

}  // namespace lulcseg
