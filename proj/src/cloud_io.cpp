#include "tomo/cloud_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "tomo/errors.hpp"

namespace tomo {

PointCloud::PointCloud(std::vector<Point3> points) : points_(std::move(points)) {
  for (const auto& p : points_)
    if (!p.finite()) throw InvalidArgument("point cloud contains a non-finite coordinate");
  if (!points_.empty()) bounds_ = Bounds::of(points_);
}

CloudFormat parse_cloud_format(std::string_view name) {
  if (name == "pcd_ascii") return CloudFormat::pcd_ascii;
  if (name == "pcd_binary") return CloudFormat::pcd_binary;
  if (name == "ply_ascii") return CloudFormat::ply_ascii;
  if (name == "xyz_text") return CloudFormat::xyz_text;
  throw InvalidArgument(fmt::format("unknown cloud format '{}'", name));
}

std::string_view to_string(CloudFormat format) {
  switch (format) {
    case CloudFormat::pcd_ascii: return "pcd_ascii";
    case CloudFormat::pcd_binary: return "pcd_binary";
    case CloudFormat::ply_ascii: return "ply_ascii";
    case CloudFormat::xyz_text: return "xyz_text";
  }
  return "?";
}

CloudFormat format_from_extension(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pcd") return CloudFormat::pcd_binary;
  if (ext == ".ply") return CloudFormat::ply_ascii;
  return CloudFormat::xyz_text;
}

namespace {

static_assert(std::endian::native == std::endian::little, "binary readers assume little-endian host");

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(fmt::format("failed while reading '{}'", path.string()));
  return std::move(ss).str();
}

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_number(const std::string& token, std::string_view context) {
  // strtod accepts "nan"/"inf", which must reach the invalid-point tally.
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0')
    throw FormatError(fmt::format("{}: cannot parse number '{}'", context, token));
  return v;
}

// Pulls lines from an in-memory buffer and tracks the byte offset for binary payloads.
class LineReader {
 public:
  explicit LineReader(std::string_view data) : data_(data) {}
  bool next(std::string_view& line) {
    if (pos_ >= data_.size()) return false;
    auto nl = data_.find('\n', pos_);
    if (nl == std::string_view::npos) nl = data_.size();
    line = data_.substr(pos_, nl - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = nl + 1;
    ++line_no_;
    return true;
  }
  std::size_t offset() const { return std::min(pos_, data_.size()); }
  std::size_t line_no() const { return line_no_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

struct Accumulator {
  std::vector<Point3> points;
  std::size_t dropped = 0;
  void add(double x, double y, double z) {
    Point3 p{x, y, z};
    if (p.finite())
      points.push_back(p);
    else
      ++dropped;
  }
  PointCloud finish(const std::filesystem::path& path) && {
    if (points.empty())
      throw FormatError(fmt::format("'{}': zero valid points", path.string()));
    PointCloud cloud(std::move(points));
    cloud.set_dropped_invalid(dropped);
    return cloud;
  }
};

// Scalar field description shared by the PCD and PLY readers.
struct Field {
  std::string name;
  char type = 'F';  // F float, I signed, U unsigned
  int size = 4;
  int count = 1;
};

double read_scalar(const char* p, const Field& f) {
  switch (f.type) {
    case 'F':
      if (f.size == 4) {
        float v;
        std::memcpy(&v, p, 4);
        return v;
      }
      if (f.size == 8) {
        double v;
        std::memcpy(&v, p, 8);
        return v;
      }
      break;
    case 'I':
      if (f.size == 1) return static_cast<std::int8_t>(*p);
      if (f.size == 2) { std::int16_t v; std::memcpy(&v, p, 2); return v; }
      if (f.size == 4) { std::int32_t v; std::memcpy(&v, p, 4); return v; }
      if (f.size == 8) { std::int64_t v; std::memcpy(&v, p, 8); return static_cast<double>(v); }
      break;
    case 'U':
      if (f.size == 1) return static_cast<std::uint8_t>(*p);
      if (f.size == 2) { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
      if (f.size == 4) { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
      if (f.size == 8) { std::uint64_t v; std::memcpy(&v, p, 8); return static_cast<double>(v); }
      break;
  }
  throw FormatError(fmt::format("unsupported field type {}{}", f.type, f.size));
}

// Column offsets (in scalar units for text, bytes for binary) of x, y, z.
struct XyzLayout {
  std::array<std::size_t, 3> scalar_index{};
  std::array<std::size_t, 3> byte_offset{};
  std::array<const Field*, 3> field{};
  std::size_t scalars_per_point = 0;
  std::size_t bytes_per_point = 0;
};

XyzLayout locate_xyz(const std::vector<Field>& fields, const std::string& context) {
  XyzLayout layout;
  std::array<bool, 3> found{};
  for (const auto& f : fields) {
    for (int axis = 0; axis < 3; ++axis) {
      if (f.name == std::string(1, static_cast<char>('x' + axis))) {
        layout.scalar_index[axis] = layout.scalars_per_point;
        layout.byte_offset[axis] = layout.bytes_per_point;
        layout.field[axis] = &f;
        found[axis] = true;
      }
    }
    layout.scalars_per_point += static_cast<std::size_t>(f.count);
    layout.bytes_per_point += static_cast<std::size_t>(f.size) * static_cast<std::size_t>(f.count);
  }
  if (!found[0] || !found[1] || !found[2])
    throw FormatError(context + ": missing x, y or z field");
  return layout;
}

PointCloud load_pcd(const std::filesystem::path& path, bool expect_binary) {
  const std::string data = read_all(path);
  if (data.empty()) throw FormatError(fmt::format("'{}': zero valid points", path.string()));
  const std::string ctx = path.string();
  LineReader reader(data);
  std::string_view line;
  std::vector<Field> fields;
  std::vector<int> sizes, counts;
  std::string types;
  std::size_t n_points = 0;
  bool have_points = false;
  std::string data_kind;
  while (reader.next(line)) {
    auto tok = split_ws(line);
    if (tok.empty() || tok[0][0] == '#') continue;
    const auto& key = tok[0];
    if (key == "FIELDS") {
      for (std::size_t i = 1; i < tok.size(); ++i) fields.push_back(Field{tok[i]});
    } else if (key == "SIZE") {
      for (std::size_t i = 1; i < tok.size(); ++i) sizes.push_back(static_cast<int>(parse_number(tok[i], ctx)));
    } else if (key == "TYPE") {
      for (std::size_t i = 1; i < tok.size(); ++i) types.push_back(tok[i][0]);
    } else if (key == "COUNT") {
      for (std::size_t i = 1; i < tok.size(); ++i) counts.push_back(static_cast<int>(parse_number(tok[i], ctx)));
    } else if (key == "POINTS") {
      if (tok.size() < 2) throw FormatError(ctx + ": malformed POINTS line");
      n_points = static_cast<std::size_t>(parse_number(tok[1], ctx));
      have_points = true;
    } else if (key == "DATA") {
      if (tok.size() < 2) throw FormatError(ctx + ": malformed DATA line");
      data_kind = tok[1];
      break;
    } else if (key == "VERSION" || key == "WIDTH" || key == "HEIGHT" || key == "VIEWPOINT") {
      continue;
    } else {
      throw FormatError(fmt::format("{}: malformed header line {}", ctx, reader.line_no()));
    }
  }
  if (fields.empty() || data_kind.empty() || !have_points)
    throw FormatError(ctx + ": malformed header (FIELDS/POINTS/DATA required)");
  if (!sizes.empty() && sizes.size() != fields.size()) throw FormatError(ctx + ": SIZE/FIELDS mismatch");
  if (!types.empty() && types.size() != fields.size()) throw FormatError(ctx + ": TYPE/FIELDS mismatch");
  if (!counts.empty() && counts.size() != fields.size()) throw FormatError(ctx + ": COUNT/FIELDS mismatch");
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (!sizes.empty()) fields[i].size = sizes[i];
    if (!types.empty()) fields[i].type = types[i];
    if (!counts.empty()) fields[i].count = counts[i];
  }
  const XyzLayout layout = locate_xyz(fields, ctx);

  Accumulator acc;
  acc.points.reserve(n_points);
  if (data_kind == "ascii") {
    if (expect_binary) throw FormatError(ctx + ": expected binary PCD, found ascii");
    std::size_t read = 0;
    while (read < n_points && reader.next(line)) {
      auto tok = split_ws(line);
      if (tok.empty()) continue;
      if (tok.size() < layout.scalars_per_point)
        throw FormatError(fmt::format("{}: short row at line {}", ctx, reader.line_no()));
      acc.add(parse_number(tok[layout.scalar_index[0]], ctx), parse_number(tok[layout.scalar_index[1]], ctx),
              parse_number(tok[layout.scalar_index[2]], ctx));
      ++read;
    }
    if (read != n_points) throw FormatError(ctx + ": fewer rows than POINTS declares");
  } else if (data_kind == "binary") {
    if (!expect_binary) throw FormatError(ctx + ": expected ascii PCD, found binary");
    const std::size_t start = reader.offset();
    if (data.size() - start < n_points * layout.bytes_per_point)
      throw FormatError(ctx + ": truncated binary payload");
    const char* base = data.data() + start;
    for (std::size_t n = 0; n < n_points; ++n) {
      const char* row = base + n * layout.bytes_per_point;
      acc.add(read_scalar(row + layout.byte_offset[0], *layout.field[0]),
              read_scalar(row + layout.byte_offset[1], *layout.field[1]),
              read_scalar(row + layout.byte_offset[2], *layout.field[2]));
    }
  } else {
    throw FormatError(fmt::format("{}: unsupported DATA kind '{}'", ctx, data_kind));
  }
  return std::move(acc).finish(path);
}

Field ply_field(const std::string& type, const std::string& name, const std::string& ctx) {
  static const std::array<std::pair<std::string_view, std::pair<char, int>>, 16> table{{
      {"char", {'I', 1}},   {"int8", {'I', 1}},    {"uchar", {'U', 1}}, {"uint8", {'U', 1}},
      {"short", {'I', 2}},  {"int16", {'I', 2}},   {"ushort", {'U', 2}}, {"uint16", {'U', 2}},
      {"int", {'I', 4}},    {"int32", {'I', 4}},   {"uint", {'U', 4}},  {"uint32", {'U', 4}},
      {"float", {'F', 4}},  {"float32", {'F', 4}}, {"double", {'F', 8}}, {"float64", {'F', 8}},
  }};
  for (const auto& [n, t] : table)
    if (n == type) return Field{name, t.first, t.second, 1};
  throw FormatError(fmt::format("{}: unsupported PLY property type '{}'", ctx, type));
}

PointCloud load_ply(const std::filesystem::path& path) {
  const std::string data = read_all(path);
  if (data.empty()) throw FormatError(fmt::format("'{}': zero valid points", path.string()));
  const std::string ctx = path.string();
  LineReader reader(data);
  std::string_view line;
  if (!reader.next(line) || split_ws(line) != std::vector<std::string>{"ply"})
    throw FormatError(ctx + ": missing 'ply' magic");
  std::vector<Field> fields;
  std::size_t n_vertex = 0;
  bool in_vertex = false, seen_vertex = false, ascii = false, header_done = false;
  while (reader.next(line)) {
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() < 2) throw FormatError(ctx + ": malformed format line");
      if (tok[1] != "ascii") throw FormatError(fmt::format("{}: unsupported PLY format '{}'", ctx, tok[1]));
      ascii = true;
    } else if (tok[0] == "element") {
      if (tok.size() < 3) throw FormatError(ctx + ": malformed element line");
      in_vertex = tok[1] == "vertex";
      if (in_vertex) {
        if (seen_vertex) throw FormatError(ctx + ": duplicate vertex element");
        if (!fields.empty()) throw FormatError(ctx + ": vertex element must come first");
        seen_vertex = true;
        n_vertex = static_cast<std::size_t>(parse_number(tok[2], ctx));
      }
    } else if (tok[0] == "property") {
      if (!in_vertex) continue;
      if (tok.size() >= 2 && tok[1] == "list") throw FormatError(ctx + ": list properties on vertices unsupported");
      if (tok.size() < 3) throw FormatError(ctx + ": malformed property line");
      fields.push_back(ply_field(tok[1], tok[2], ctx));
    } else if (tok[0] == "end_header") {
      header_done = true;
      break;
    } else {
      throw FormatError(fmt::format("{}: malformed header line {}", ctx, reader.line_no()));
    }
  }
  if (!header_done || !ascii || !seen_vertex) throw FormatError(ctx + ": malformed PLY header");
  const XyzLayout layout = locate_xyz(fields, ctx);
  Accumulator acc;
  acc.points.reserve(n_vertex);
  std::size_t read = 0;
  while (read < n_vertex && reader.next(line)) {
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() < layout.scalars_per_point)
      throw FormatError(fmt::format("{}: short row at line {}", ctx, reader.line_no()));
    acc.add(parse_number(tok[layout.scalar_index[0]], ctx), parse_number(tok[layout.scalar_index[1]], ctx),
            parse_number(tok[layout.scalar_index[2]], ctx));
    ++read;
  }
  if (read != n_vertex) throw FormatError(ctx + ": fewer vertices than declared");
  return std::move(acc).finish(path);
}

PointCloud load_xyz(const std::filesystem::path& path) {
  const std::string data = read_all(path);
  const std::string ctx = path.string();
  LineReader reader(data);
  std::string_view line;
  Accumulator acc;
  while (reader.next(line)) {
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() < 3) throw FormatError(fmt::format("{}: expected 'x y z' at line {}", ctx, reader.line_no()));
    acc.add(parse_number(tok[0], ctx), parse_number(tok[1], ctx), parse_number(tok[2], ctx));
  }
  return std::move(acc).finish(path);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  return out;
}

}  // namespace

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format) {
  switch (format) {
    case CloudFormat::pcd_ascii: return load_pcd(path, false);
    case CloudFormat::pcd_binary: return load_pcd(path, true);
    case CloudFormat::ply_ascii: return load_ply(path);
    case CloudFormat::xyz_text: return load_xyz(path);
  }
  throw InvalidArgument("unknown cloud format");
}

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  auto out = open_out(path);
  const auto pts = cloud.points();
  std::string buf;
  auto put_row = [&](const Point3& p) {
    fmt::format_to(std::back_inserter(buf), "{} {} {}\n", p.x, p.y, p.z);
  };
  switch (format) {
    case CloudFormat::pcd_ascii:
    case CloudFormat::pcd_binary: {
      const bool binary = format == CloudFormat::pcd_binary;
      buf += fmt::format(
          "# .PCD v0.7 - Point Cloud Data file format\nVERSION 0.7\nFIELDS x y z\nSIZE {0} {0} {0}\n"
          "TYPE F F F\nCOUNT 1 1 1\nWIDTH {1}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS {1}\nDATA {2}\n",
          binary ? 4 : 8, pts.size(), binary ? "binary" : "ascii");
      if (binary) {
        const std::size_t header = buf.size();
        buf.resize(header + pts.size() * 12);
        char* dst = buf.data() + header;
        for (const auto& p : pts) {
          const std::array<float, 3> v{static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z)};
          std::memcpy(dst, v.data(), 12);
          dst += 12;
        }
      } else {
        for (const auto& p : pts) put_row(p);
      }
      break;
    }
    case CloudFormat::ply_ascii:
      buf += fmt::format(
          "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n"
          "end_header\n",
          pts.size());
      for (const auto& p : pts) put_row(p);
      break;
    case CloudFormat::xyz_text:
      for (const auto& p : pts) put_row(p);
      break;
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError(fmt::format("failed while writing '{}'", path.string()));
}

}  // namespace tomo
