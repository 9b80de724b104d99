#include "tomo/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "tomo/errors.hpp"

namespace tomo {

namespace {

constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kCanonicalNaN = 0x7fc00000u;

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void put_layer(const Layer& layer) {
    const auto& vals = layer.values();
    const std::size_t at = out_.size();
    out_.resize(at + vals.size() * 4);
    std::uint8_t* dst = out_.data() + at;
    for (float v : vals) {
      const std::uint32_t bits = std::isnan(v) ? kCanonicalNaN : std::bit_cast<std::uint32_t>(v);
      std::memcpy(dst, &bits, 4);
      dst += 4;
    }
  }
  std::vector<std::uint8_t> take() && { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  Layer get_layer(const GridGeometry& grid) {
    Layer layer(grid);
    need(grid.cells() * 4);
    std::memcpy(layer.values().data(), bytes_.data() + pos_, grid.cells() * 4);
    pos_ += grid.cells() * 4;
    return layer;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("LGA archive truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

static_assert(std::endian::native == std::endian::little, "LGA encoder assumes a little-endian host");

}  // namespace

std::vector<std::uint8_t> encode_archive(const Tomogram& tomogram) {
  Writer w;
  for (char c : {'L', 'G', 'A', '1'}) w.put(c);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tomogram.grid.rows));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tomogram.grid.cols));
  w.put<float>(static_cast<float>(tomogram.grid.resolution));
  w.put<double>(tomogram.grid.origin_x);
  w.put<double>(tomogram.grid.origin_y);
  w.put<double>(tomogram.z_min);
  w.put<float>(static_cast<float>(tomogram.slice_interval));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tomogram.slices.size()));
  for (const auto& s : tomogram.slices) {
    w.put<double>(s.plane_height);
    const std::uint8_t mask = kLayerGround | kLayerCeiling | (s.cost ? kLayerCost : 0);
    w.put<std::uint8_t>(mask);
    w.put_layer(s.ground);
    w.put_layer(s.ceiling);
    if (s.cost) w.put_layer(*s.cost);
  }
  return std::move(w).take();
}

Tomogram decode_archive(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  char magic[4];
  for (char& c : magic) c = r.get<char>();
  if (std::memcmp(magic, "LGA1", 4) != 0) throw FormatError("not an LGA archive (bad magic)");
  if (const auto v = r.get<std::uint32_t>(); v != kVersion)
    throw FormatError(fmt::format("unsupported LGA version {}", v));
  Tomogram t;
  t.grid.rows = r.get<std::uint32_t>();
  t.grid.cols = r.get<std::uint32_t>();
  t.grid.resolution = r.get<float>();
  t.grid.origin_x = r.get<double>();
  t.grid.origin_y = r.get<double>();
  t.z_min = r.get<double>();
  t.slice_interval = r.get<float>();
  const auto n = r.get<std::uint32_t>();
  if (t.grid.rows == 0 || t.grid.cols == 0) throw FormatError("LGA archive has an empty grid");
  if (!(t.grid.resolution > 0.0) || !(t.slice_interval > 0.0)) throw FormatError("LGA archive has non-positive spacing");
  t.slices.reserve(n);
  for (std::uint32_t k = 0; k < n; ++k) {
    TomogramSlice s;
    s.index = static_cast<int>(k);
    s.plane_height = r.get<double>();
    const auto mask = r.get<std::uint8_t>();
    if ((mask & ~(kLayerGround | kLayerCeiling | kLayerCost)) != 0)
      throw FormatError(fmt::format("LGA slice {} has unknown layer bits {:#x}", k, mask));
    s.ground = (mask & kLayerGround) ? r.get_layer(t.grid) : Layer(t.grid);
    s.ceiling = (mask & kLayerCeiling) ? r.get_layer(t.grid) : Layer(t.grid);
    if (mask & kLayerCost) s.cost = r.get_layer(t.grid);
    t.slices.push_back(std::move(s));
  }
  if (!r.at_end()) throw FormatError("trailing bytes after LGA archive");
  return t;
}

void save_archive(const Tomogram& tomogram, const std::filesystem::path& path) {
  const auto bytes = encode_archive(tomogram);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("failed while writing '{}'", path.string()));
}

Tomogram load_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_archive(bytes);
}

}  // namespace tomo
