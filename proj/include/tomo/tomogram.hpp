#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "tomo/cloud_io.hpp"

namespace tomo {

/// Marker for "no data" in any layer. Always this exact bit pattern.
inline constexpr float kInvalid = std::numeric_limits<float>::quiet_NaN();
inline bool is_valid(float v) { return !std::isnan(v); }

struct CellIndex {
  std::int64_t i = 0;  // row (y)
  std::int64_t j = 0;  // column (x)
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Placement of a row-major grid; cell (0,0) is centred on the origin.
struct GridGeometry {
  std::size_t rows = 0;
  std::size_t cols = 0;
  double resolution = 0.1;
  double origin_x = 0.0;
  double origin_y = 0.0;

  std::size_t cells() const { return rows * cols; }
  std::size_t flat(std::size_t i, std::size_t j) const { return i * cols + j; }
  bool contains(std::int64_t i, std::int64_t j) const {
    return i >= 0 && j >= 0 && static_cast<std::size_t>(i) < rows && static_cast<std::size_t>(j) < cols;
  }
  double cell_x(std::size_t j) const { return origin_x + static_cast<double>(j) * resolution; }
  double cell_y(std::size_t i) const { return origin_y + static_cast<double>(i) * resolution; }

  /// Nearest cell centre, no range check.
  CellIndex nearest(double x, double y) const {
    return {static_cast<std::int64_t>(std::floor((y - origin_y) / resolution + 0.5)),
            static_cast<std::int64_t>(std::floor((x - origin_x) / resolution + 0.5))};
  }
  /// Nearest cell centre; throws OutOfBounds outside the grid.
  CellIndex rasterize(double x, double y) const;

  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

/// i = floor((y - y0)/r_g + 0.5), j = floor((x - x0)/r_g + 0.5). Throws
/// InvalidArgument for r_g <= 0 and OutOfBounds for a negative index or one
/// beyond rows/cols (when given).
CellIndex rasterize_index(const Point3& p, double origin_x, double origin_y, double resolution,
                          std::size_t rows = std::numeric_limits<std::size_t>::max(),
                          std::size_t cols = std::numeric_limits<std::size_t>::max());

/// Dense 2D float grid with kInvalid holes.
class Layer {
 public:
  Layer() = default;
  explicit Layer(const GridGeometry& grid, float fill = kInvalid)
      : grid_(grid), values_(grid.cells(), fill) {}

  const GridGeometry& grid() const { return grid_; }
  std::size_t rows() const { return grid_.rows; }
  std::size_t cols() const { return grid_.cols; }

  float operator()(std::size_t i, std::size_t j) const { return values_[grid_.flat(i, j)]; }
  float& operator()(std::size_t i, std::size_t j) { return values_[grid_.flat(i, j)]; }
  bool valid(std::size_t i, std::size_t j) const { return is_valid((*this)(i, j)); }

  std::vector<float>& values() { return values_; }
  const std::vector<float>& values() const { return values_; }

  /// Bitwise comparison (NaN == NaN when the payloads match).
  bool identical(const Layer& other) const;

 private:
  GridGeometry grid_;
  std::vector<float> values_;
};

struct TomogramSlice {
  Layer ground;
  Layer ceiling;
  std::optional<Layer> cost;
  double plane_height = 0.0;
  int index = 0;
};

struct Tomogram {
  GridGeometry grid;
  double z_min = 0.0;
  double slice_interval = 0.5;
  std::vector<TomogramSlice> slices;

  std::size_t size() const { return slices.size(); }
  bool evaluated() const;
  bool identical(const Tomogram& other) const;
};

struct BuildOptions {
  unsigned threads = 0;  // 0: hardware concurrency
  std::size_t max_side = 16384;
};

/// Projects the cloud onto planes z_min + (k+1)*d_s, k = 0..N-1, N minimal with
/// the last plane at or above the highest point. Per cell, ground = highest z
/// at or below the plane, ceiling = lowest z strictly above it. Resolution and
/// slice interval are rounded to float32 so that archives reload exactly.
/// Output is bitwise independent of point order and thread count.
Tomogram build_tomogram(const PointCloud& cloud, double slice_interval, double resolution,
                        const BuildOptions& options = {});

/// Grid placement used by build_tomogram: origin at the xy bounds minimum,
/// sized to the bounds plus one cell of padding.
GridGeometry grid_for_cloud(const PointCloud& cloud, double resolution, std::size_t max_side = 16384);

}  // namespace tomo
