#pragma once

#include <string>

#include "lulcseg/nn.hpp"

namespace lulcseg {

// Checkpoint wire format, little-endian throughout:
//   magic "SSFW" | u32 version (=1) | records until EOF
//   record: u32 name_len | name bytes (UTF-8) | u8 dtype (0=f32, 1=f64)
//           | u32 rank | rank x u64 extents | raw scalars
// Round-trips are bit-exact.
void save_checkpoint(const std::string& path, const ParamStore& params);

// Loads into an existing store; every record must match a registered
// parameter's name, dtype, and shape.
void load_checkpoint(const std::string& path, ParamStore& params);

}  // namespace lulcseg
