#include "lulcseg/patch_io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

namespace lulcseg {

namespace {

constexpr char kMagic[4] = {'D', 'W', 'P', 'X'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

struct Reader {
  std::ifstream in;
  u64 offset = 0;

  explicit Reader(const std::string& path) : in(path, std::ios::binary) {}

  void read_exact(void* dst, size_t n, const char* what) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n)
      throw FormatError(std::string("truncated patch file while reading ") + what, offset);
    offset += n;
  }
  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    read_exact(b, 4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint16_t u16(const char* what) {
    unsigned char b[2];
    read_exact(b, 2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
};

void write_header(std::ostream& out, i64 size, int n_spectral, int n_sar) {
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u16(out, static_cast<std::uint16_t>(size));
  out.put(static_cast<char>(n_spectral));
  out.put(static_cast<char>(n_sar));
}

}  // namespace

void write_patch(const PatchSample& sample, const std::string& path) {
  if (sample.spectral.rank() != 3 || sample.spectral.dim(0) != kSpectralBands)
    throw DataError("write_patch: spectral stack must be [" +
                    std::to_string(kSpectralBands) + ",S,S], got " +
                    shape_str(sample.spectral.shape()));
  if (sample.sar.rank() != 3 || sample.sar.dim(0) != kSarBands)
    throw DataError("write_patch: sar stack must be [" + std::to_string(kSarBands) +
                    ",S,S], got " + shape_str(sample.sar.shape()));
  i64 s = sample.spectral.dim(1);
  if (sample.spectral.dim(2) != s || sample.sar.dim(1) != s || sample.sar.dim(2) != s ||
      sample.labels.shape != Shape{s, s})
    throw DataError("write_patch: extents disagree between bands and labels");
  if (sample.spectral.dtype() != DType::f32 || sample.sar.dtype() != DType::f32)
    throw DataError("write_patch: bands must be float32");
  for (std::uint8_t l : sample.labels.data)
    if (l >= kMaxClasses)
      throw DataError("write_patch: label " + std::to_string(l) + " out of range");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open patch for writing: " + path);
  write_header(out, s, kSpectralBands, kSarBands);
  out.write(reinterpret_cast<const char*>(sample.spectral.f32()),
            static_cast<std::streamsize>(sample.spectral.numel() * 4));
  out.write(reinterpret_cast<const char*>(sample.sar.f32()),
            static_cast<std::streamsize>(sample.sar.numel() * 4));
  out.write(reinterpret_cast<const char*>(sample.labels.data.data()),
            static_cast<std::streamsize>(sample.labels.data.size()));
  out.write(sample.patch_id.data(), static_cast<std::streamsize>(sample.patch_id.size()));
  if (!out) throw DataError("failed writing patch: " + path);
}

PatchSample read_patch(const std::string& path) {
  Reader r(path);
  if (!r.in) throw DataError("cannot open patch: " + path);
  char magic[4];
  r.read_exact(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad patch magic", 0);
  std::uint32_t version = r.u32("version");
  if (version != kVersion)
    throw FormatError("unsupported patch version " + std::to_string(version), 4);
  i64 s = r.u16("size");
  unsigned char n_spectral, n_sar;
  r.read_exact(&n_spectral, 1, "spectral band count");
  r.read_exact(&n_sar, 1, "sar band count");
  if (s < 1) throw FormatError("patch size must be positive", 8);

  PatchSample sample;
  if (n_spectral > 0) {
    if (n_spectral != kSpectralBands)
      throw FormatError("expected " + std::to_string(kSpectralBands) + " spectral bands, found " +
                        std::to_string(n_spectral), 10);
    std::vector<float> buf(static_cast<size_t>(n_spectral) * static_cast<size_t>(s * s));
    r.read_exact(buf.data(), buf.size() * 4, "spectral bands");
    sample.spectral = Tensor::from_f32({n_spectral, s, s}, std::move(buf));
  }
  if (n_sar > 0) {
    if (n_sar != kSarBands)
      throw FormatError("expected " + std::to_string(kSarBands) + " sar bands, found " +
                        std::to_string(n_sar), 11);
    std::vector<float> buf(static_cast<size_t>(n_sar) * static_cast<size_t>(s * s));
    r.read_exact(buf.data(), buf.size() * 4, "sar bands");
    sample.sar = Tensor::from_f32({n_sar, s, s}, std::move(buf));
  }
  sample.labels = Labels({s, s});
  r.read_exact(sample.labels.data.data(), sample.labels.data.size(), "label plane");
  for (std::uint8_t l : sample.labels.data)
    if (l >= kMaxClasses)
      throw FormatError("label " + std::to_string(l) + " out of range", r.offset);

  std::string id;
  char ch;
  while (r.in.get(ch)) id.push_back(ch);
  sample.patch_id = id;
  return sample;
}

void write_label_map(const Labels& labels, const std::string& id, const std::string& path) {
  if (labels.shape.size() != 2 || labels.shape[0] != labels.shape[1])
    throw DataError("write_label_map: expected a square [S,S] map, got " +
                    shape_str(labels.shape));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open label map for writing: " + path);
  write_header(out, labels.shape[0], 0, 0);
  out.write(reinterpret_cast<const char*>(labels.data.data()),
            static_cast<std::streamsize>(labels.data.size()));
  out.write(id.data(), static_cast<std::streamsize>(id.size()));
  if (!out) throw DataError("failed writing label map: " + path);
}

void write_manifest(const std::vector<std::string>& relative_paths, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open manifest for writing: " + path);
  for (const std::string& p : relative_paths) out << p << "\n";
  if (!out) throw DataError("failed writing manifest: " + path);
}

std::vector<std::string> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  std::vector<std::string> paths;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (!line.empty()) paths.push_back(line);
  }
  return paths;
}

std::vector<PatchSample> load_dataset(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  fs::path base = fs::path(manifest_path).parent_path();
  std::vector<PatchSample> samples;
  for (const std::string& rel : read_manifest(manifest_path))
    samples.push_back(read_patch((base / rel).string()));
  if (samples.empty()) throw DataError("dataset manifest is empty: " + manifest_path);
  return samples;
}

}  // namespace lulcseg
