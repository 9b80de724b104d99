#include "tomo/tomogram.hpp"

#include <algorithm>
#include <cstring>

#include <fmt/format.h>

#include "tomo/errors.hpp"
#include "tomo/parallel.hpp"

namespace tomo {

CellIndex rasterize_index(const Point3& p, double origin_x, double origin_y, double resolution,
                          std::size_t rows, std::size_t cols) {
  if (!(resolution > 0.0)) throw InvalidArgument("grid resolution must be positive");
  const GridGeometry g{rows, cols, resolution, origin_x, origin_y};
  const CellIndex c = g.nearest(p.x, p.y);
  if (!g.contains(c.i, c.j))
    throw OutOfBounds(fmt::format("point ({}, {}) rasterizes to cell ({}, {}) outside the grid", p.x, p.y, c.i, c.j));
  return c;
}

CellIndex GridGeometry::rasterize(double x, double y) const {
  return rasterize_index(Point3{x, y, 0.0}, origin_x, origin_y, resolution, rows, cols);
}

bool Layer::identical(const Layer& other) const {
  return grid_ == other.grid_ && values_.size() == other.values_.size() &&
         std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(float)) == 0;
}

bool Tomogram::evaluated() const {
  return !slices.empty() && std::all_of(slices.begin(), slices.end(), [](const auto& s) { return s.cost.has_value(); });
}

bool Tomogram::identical(const Tomogram& other) const {
  if (!(grid == other.grid) || z_min != other.z_min || slice_interval != other.slice_interval ||
      slices.size() != other.slices.size())
    return false;
  for (std::size_t k = 0; k < slices.size(); ++k) {
    const auto& a = slices[k];
    const auto& b = other.slices[k];
    if (a.plane_height != b.plane_height || a.index != b.index || !a.ground.identical(b.ground) ||
        !a.ceiling.identical(b.ceiling) || a.cost.has_value() != b.cost.has_value())
      return false;
    if (a.cost && !a.cost->identical(*b.cost)) return false;
  }
  return true;
}

GridGeometry grid_for_cloud(const PointCloud& cloud, double resolution, std::size_t max_side) {
  if (cloud.empty()) throw InvalidArgument("cannot build a grid for an empty cloud");
  if (!(resolution > 0.0)) throw InvalidArgument("grid resolution must be positive");
  const auto& b = cloud.bounds();
  GridGeometry g;
  g.resolution = resolution;
  g.origin_x = b.min.x;
  g.origin_y = b.min.y;
  const double cols = std::floor((b.max.x - b.min.x) / resolution + 0.5) + 2.0;
  const double rows = std::floor((b.max.y - b.min.y) / resolution + 0.5) + 2.0;
  if (cols > static_cast<double>(max_side) || rows > static_cast<double>(max_side))
    throw InvalidArgument(fmt::format("grid {}x{} exceeds the safety limit of {} cells per side", rows, cols, max_side));
  g.rows = static_cast<std::size_t>(rows);
  g.cols = static_cast<std::size_t>(cols);
  return g;
}

Tomogram build_tomogram(const PointCloud& cloud, double slice_interval, double resolution,
                        const BuildOptions& options) {
  if (cloud.empty()) throw InvalidArgument("cannot build a tomogram from an empty cloud");
  if (!(slice_interval > 0.0)) throw InvalidArgument("slice interval must be positive");
  if (!(resolution > 0.0)) throw InvalidArgument("grid resolution must be positive");

  Tomogram tomo;
  tomo.slice_interval = static_cast<float>(slice_interval);
  tomo.grid = grid_for_cloud(cloud, static_cast<float>(resolution), options.max_side);
  const auto& grid = tomo.grid;
  const auto& bounds = cloud.bounds();
  tomo.z_min = bounds.min.z;

  const double ds = tomo.slice_interval;
  std::size_t n_slices = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((bounds.max.z - tomo.z_min) / ds)));
  while (tomo.z_min + static_cast<double>(n_slices) * ds < bounds.max.z) ++n_slices;
  while (n_slices > 1 && tomo.z_min + static_cast<double>(n_slices - 1) * ds >= bounds.max.z) --n_slices;

  std::vector<double> planes(n_slices);
  for (std::size_t k = 0; k < n_slices; ++k) planes[k] = tomo.z_min + static_cast<double>(k + 1) * ds;

  const auto points = cloud.points();
  const std::size_t n_points = points.size();
  const std::size_t n_cells = grid.cells();

  // Bin points by cell with per-chunk histograms; a chunk-ordered scatter keeps
  // bucket contents independent of the thread count.
  std::vector<std::uint32_t> cell_of(n_points);
  unsigned chunks = chunk_count(n_points, options.threads);
  if (static_cast<double>(chunks) * static_cast<double>(n_cells) > 64.0e6) chunks = 1;
  std::vector<std::vector<std::uint32_t>> hist(chunks);
  parallel_chunks(n_points, chunks, [&](unsigned c, std::size_t begin, std::size_t end) {
    auto& h = hist[c];
    h.assign(n_cells, 0);
    for (std::size_t n = begin; n < end; ++n) {
      const auto cell = grid.rasterize(points[n].x, points[n].y);
      const auto id = static_cast<std::uint32_t>(grid.flat(static_cast<std::size_t>(cell.i), static_cast<std::size_t>(cell.j)));
      cell_of[n] = id;
      ++h[id];
    }
  });
  std::vector<std::uint32_t> offset(n_cells + 1, 0);
  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    std::uint32_t total = offset[cell];
    for (unsigned c = 0; c < chunks; ++c) {
      const std::uint32_t count = hist[c][cell];
      hist[c][cell] = total;  // becomes this chunk's write cursor
      total += count;
    }
    offset[cell + 1] = total;
  }
  std::vector<double> z_sorted(n_points);
  parallel_chunks(n_points, chunks, [&](unsigned c, std::size_t begin, std::size_t end) {
    auto& cursor = hist[c];
    for (std::size_t n = begin; n < end; ++n) z_sorted[cursor[cell_of[n]]++] = points[n].z;
  });
  hist.clear();
  cell_of.clear();
  cell_of.shrink_to_fit();

  tomo.slices.resize(n_slices);
  for (std::size_t k = 0; k < n_slices; ++k) {
    auto& s = tomo.slices[k];
    s.ground = Layer(grid);
    s.ceiling = Layer(grid);
    s.plane_height = planes[k];
    s.index = static_cast<int>(k);
  }

  parallel_for(n_cells, options.threads, [&](std::size_t cell) {
    const auto first = z_sorted.begin() + offset[cell];
    const auto last = z_sorted.begin() + offset[cell + 1];
    if (first == last) return;
    std::sort(first, last);
    auto split = first;  // first z strictly above the current plane
    for (std::size_t k = 0; k < n_slices; ++k) {
      while (split != last && *split <= planes[k]) ++split;
      if (split != first) tomo.slices[k].ground.values()[cell] = static_cast<float>(*(split - 1));
      if (split != last) tomo.slices[k].ceiling.values()[cell] = static_cast<float>(*split);
    }
  });
  return tomo;
}

}  // namespace tomo
