#pragma once

#include <string>

#include "lulcseg/encoder.hpp"

namespace lulcseg {

enum class LossKind : std::uint8_t { kFocal, kCrossEntropy, kBinaryCrossEntropy };
enum class AlphaMode : std::uint8_t { kInverseFrequency, kUniform };

// Everything a command needs, with documented defaults. Populated in three
// layers: defaults, then a config file, then command line overrides.
struct RunConfig {
  // [run]
  std::uint64_t seed = 0;
  std::string out_dir = ".";

  // [data]
  std::string manifest;
  std::string eval_manifest;  // defaults to `manifest` when empty
  i64 patch_size = 64;
  i64 n_patches = 16;
  int n_classes = 9;
  int window_days = 360;
  int min_observations = 0;
  int max_observations = 8;
  i64 label_grid = 1;

  // [net] including the ablation switches
  NetConfig net;

  // [train]
  double lr0 = 0.0005;
  i64 epochs = 20;
  i64 batch_size = 4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool augment = true;
  LossKind loss_kind = LossKind::kFocal;
  double focal_gamma = 2.0;
  AlphaMode alpha_mode = AlphaMode::kInverseFrequency;

  // [ablate]
  i64 ablate_epochs = 6;
  i64 ablate_patches = 64;
  i64 ablate_eval_patches = 24;
  i64 ablate_patch_size = 32;
  int ablate_seeds = 3;

  // Paths set by command line arguments rather than config keys.
  std::string checkpoint;
  std::string patch_path;
  std::string output_path;

  void validate() const;  // cross-field checks; ConfigError on violation
};

// Parses UTF-8 "key = value" lines under "[section]" headers. '#' and ';'
// start comments. Unknown keys are rejected.
void apply_config_file(RunConfig& cfg, const std::string& path);

// Applies one "section.key" override; same key set as the file format.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

const char* loss_kind_name(LossKind k);

}  // namespace lulcseg
