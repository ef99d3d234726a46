#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "lulcseg/checkpoint.hpp"

using namespace lulcseg;
namespace fs = std::filesystem;

namespace {
std::string temp_path(const char* name) {
  return (fs::temp_directory_path() / name).string();
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}
}  // namespace

TEST_CASE("checkpoint round trip is bit-exact") {
  ParamStore a(DType::f32, 7);
  a.create("layer.w", {5, 3}, Init::kTruncNormal);
  a.create("layer.b", {3}, Init::kZeros);
  a.create("norm.g", {3}, Init::kOnes);
  std::string path = temp_path("ck_roundtrip.ssfw");
  save_checkpoint(path, a);

  ParamStore b(DType::f32, 99);  // different init, fully overwritten by load
  b.create("layer.w", {5, 3}, Init::kTruncNormal);
  b.create("layer.b", {3}, Init::kZeros);
  b.create("norm.g", {3}, Init::kOnes);
  load_checkpoint(path, b);
  for (size_t e = 0; e < a.entries().size(); ++e)
    for (i64 i = 0; i < a.entries()[e].tensor.numel(); ++i)
      CHECK(a.entries()[e].tensor.value_at(i) == b.entries()[e].tensor.value_at(i));

  // Saving the loaded store reproduces the file byte for byte.
  std::string path2 = temp_path("ck_roundtrip2.ssfw");
  save_checkpoint(path2, b);
  CHECK(slurp(path) == slurp(path2));
  fs::remove(path);
  fs::remove(path2);
}

TEST_CASE("float64 parameters round trip bit-exactly too") {
  ParamStore a(DType::f64, 3);
  a.create("w", {7}, Init::kTruncNormal);
  std::string path = temp_path("ck_f64.ssfw");
  save_checkpoint(path, a);
  ParamStore b(DType::f64, 4);
  b.create("w", {7}, Init::kTruncNormal);
  load_checkpoint(path, b);
  for (i64 i = 0; i < 7; ++i)
    CHECK(a.entries()[0].tensor.value_at(i) == b.entries()[0].tensor.value_at(i));
  fs::remove(path);
}

TEST_CASE("corrupted magic is a format error at offset zero") {
  std::string path = temp_path("ck_badmagic.ssfw");
  {
    std::ofstream f(path, std::ios::binary);
    f << "JUNKxxxxxxxxxxxxxxxx";
  }
  ParamStore ps(DType::f32, 1);
  ps.create("w", {2}, Init::kZeros);
  try {
    load_checkpoint(path, ps);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.byte_offset() == 0);
  }
  fs::remove(path);
}

TEST_CASE("truncated checkpoints report the failing byte offset") {
  ParamStore a(DType::f32, 7);
  a.create("w", {64}, Init::kTruncNormal);
  std::string path = temp_path("ck_trunc.ssfw");
  save_checkpoint(path, a);
  auto bytes = slurp(path);
  bytes.resize(bytes.size() / 2);
  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  ParamStore b(DType::f32, 8);
  b.create("w", {64}, Init::kTruncNormal);
  CHECK_THROWS_AS(load_checkpoint(path, b), FormatError);
  fs::remove(path);
}

TEST_CASE("shape mismatches against the model are data errors") {
  ParamStore a(DType::f32, 7);
  a.create("w", {4}, Init::kZeros);
  std::string path = temp_path("ck_shape.ssfw");
  save_checkpoint(path, a);
  ParamStore b(DType::f32, 7);
  b.create("w", {5}, Init::kZeros);
  CHECK_THROWS_AS(load_checkpoint(path, b), DataError);
  ParamStore c(DType::f32, 7);
  c.create("other", {4}, Init::kZeros);
  CHECK_THROWS_AS(load_checkpoint(path, c), DataError);
  fs::remove(path);
}
