#pragma once

#include <string>
#include <vector>

#include "lulcseg/synth.hpp"

namespace lulcseg {

// DWPX patch file, little-endian:
//   magic "DWPX" | u32 version (=1) | u16 size S | u8 n_spectral | u8 n_sar
//   | planar float32 bands (spectral then sar) | u8 label plane (S*S)
//   | patch_id bytes to EOF
// Prediction exports reuse the container with n_spectral = n_sar = 0.
void write_patch(const PatchSample& sample, const std::string& path);
PatchSample read_patch(const std::string& path);

void write_label_map(const Labels& labels, const std::string& id, const std::string& path);

// Dataset manifest: UTF-8 text, one path per line, relative to the manifest.
void write_manifest(const std::vector<std::string>& relative_paths, const std::string& path);
std::vector<std::string> read_manifest(const std::string& path);

// Loads every patch listed in a manifest (paths resolved against its parent
// directory).
std::vector<PatchSample> load_dataset(const std::string& manifest_path);

}  // namespace lulcseg
