#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "tomo/geometry.hpp"

namespace tomo {

/// Unordered set of finite 3D points with cached axis-aligned bounds.
class PointCloud {
 public:
  PointCloud() = default;
  /// Throws InvalidArgument if any point has a non-finite coordinate.
  explicit PointCloud(std::vector<Point3> points);

  std::span<const Point3> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  /// Undefined for an empty cloud.
  const Bounds& bounds() const { return bounds_; }

  /// Rows dropped while loading because a coordinate was NaN/Inf.
  std::size_t dropped_invalid() const { return dropped_invalid_; }
  void set_dropped_invalid(std::size_t n) { dropped_invalid_ = n; }

 private:
  std::vector<Point3> points_;
  Bounds bounds_{};
  std::size_t dropped_invalid_ = 0;
};

enum class CloudFormat { pcd_ascii, pcd_binary, ply_ascii, xyz_text };

CloudFormat parse_cloud_format(std::string_view name);
std::string_view to_string(CloudFormat format);
/// Guess from the extension: .pcd -> pcd_binary, .ply -> ply_ascii, anything else xyz_text.
CloudFormat format_from_extension(const std::filesystem::path& path);

/// Reads x,y,z from a PCD / PLY / whitespace text file. Other fields are
/// skipped. Rows with non-finite coordinates are dropped and tallied in
/// PointCloud::dropped_invalid(). Throws IoError, FormatError.
PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format);

/// Binary PCD stores float32; text formats print with round-trip precision.
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);

}  // namespace tomo
