#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace lulcseg {

using i64 = std::int64_t;
using u64 = std::uint64_t;

// Extents of a dense row-major array. Rank 0 = scalar.
using Shape = std::vector<i64>;

// Error taxonomy. The CLI maps these onto process exit codes:
// ConfigError/ShapeError -> 2, DataError/FormatError -> 3, NumericError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension/contract violation (mismatched extents, bad op geometry).
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent configuration, rejected before any work starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Bad payload content (labels out of range, mismatched datasets).
class DataError : public Error {
 public:
  using Error::Error;
};

// Malformed file or stream; carries the byte offset of the problem.
class FormatError : public DataError {
 public:
  FormatError(const std::string& what, u64 byte_offset)
      : DataError(what + " at byte offset " + std::to_string(byte_offset)),
        offset_(byte_offset) {}
  u64 byte_offset() const { return offset_; }

 private:
  u64 offset_;
};

// Numerical failure (NaN loss, failed gradient check).
class NumericError : public Error {
 public:
  using Error::Error;
};

inline i64 numel_of(const Shape& s) {
  i64 n = 1;
  for (i64 d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  out += "]";
  return out;
}

// Integer label raster, values in [0, n_classes). Rank 2 [h,w] for a single
// map, rank 3 [b,h,w] for a batch.
struct Labels {
  Shape shape;
  std::vector<std::uint8_t> data;

  Labels() = default;
  Labels(Shape s, std::uint8_t fill = 0)
      : shape(std::move(s)), data(static_cast<size_t>(numel_of(shape)), fill) {}

  i64 numel() const { return static_cast<i64>(data.size()); }
  bool operator==(const Labels& o) const { return shape == o.shape && data == o.data; }
};

}  // namespace lulcseg
