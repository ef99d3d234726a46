#include "lulcseg/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <set>

namespace lulcseg {

namespace {

constexpr char kMagic[4] = {'S', 'S', 'F', 'W'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

struct Reader {
  std::ifstream in;
  u64 offset = 0;

  explicit Reader(const std::string& path) : in(path, std::ios::binary) {}

  void read_exact(void* dst, size_t n, const char* what) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n)
      throw FormatError(std::string("truncated checkpoint while reading ") + what, offset);
    offset += n;
  }

  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    read_exact(b, 4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }

  std::uint64_t u64_val(const char* what) {
    unsigned char b[8];
    read_exact(b, 8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }

  bool at_eof() {
    in.peek();
    return in.eof();
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  for (const ParamStore::Entry& e : params.entries()) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    out.put(static_cast<char>(e.tensor.dtype()));
    const Shape& s = e.tensor.shape();
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    for (i64 d : s) put_u64(out, static_cast<std::uint64_t>(d));
    if (e.tensor.dtype() == DType::f32)
      out.write(reinterpret_cast<const char*>(e.tensor.f32()),
                static_cast<std::streamsize>(e.tensor.numel() * 4));
    else
      out.write(reinterpret_cast<const char*>(e.tensor.f64()),
                static_cast<std::streamsize>(e.tensor.numel() * 8));
  }
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

void load_checkpoint(const std::string& path, ParamStore& params) {
  Reader r(path);
  if (!r.in) throw DataError("cannot open checkpoint: " + path);
  char magic[4];
  r.read_exact(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad checkpoint magic", 0);
  std::uint32_t version = r.u32("version");
  if (version != kVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);

  std::set<std::string> loaded;
  while (!r.at_eof()) {
    u64 record_at = r.offset;
    std::uint32_t name_len = r.u32("name length");
    std::string name(name_len, '\0');
    r.read_exact(name.data(), name_len, "name");
    unsigned char dt_tag;
    r.read_exact(&dt_tag, 1, "dtype");
    if (dt_tag > 1) throw FormatError("unknown dtype tag " + std::to_string(dt_tag), r.offset - 1);
    std::uint32_t rank = r.u32("rank");
    Shape shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i)
      shape[i] = static_cast<i64>(r.u64_val("extent"));

    Tensor target = params.find(name);
    if (!target.defined())
      throw DataError("checkpoint parameter '" + name + "' not present in model (record at " +
                      std::to_string(record_at) + ")");
    if (target.shape() != shape || target.dtype() != static_cast<DType>(dt_tag))
      throw DataError("checkpoint parameter '" + name + "' has shape " + shape_str(shape) +
                      "/" + dtype_name(static_cast<DType>(dt_tag)) + " but model expects " +
                      shape_str(target.shape()) + "/" + dtype_name(target.dtype()));
    if (target.dtype() == DType::f32)
      r.read_exact(target.f32(), static_cast<size_t>(target.numel()) * 4, "scalars");
    else
      r.read_exact(target.f64(), static_cast<size_t>(target.numel()) * 8, "scalars");
    loaded.insert(name);
  }
  for (const ParamStore::Entry& e : params.entries())
    if (!loaded.count(e.name))
      throw DataError("checkpoint is missing parameter '" + e.name + "'");
}

}  // namespace lulcseg
