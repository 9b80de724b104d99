#include "tomo/pipeline.hpp"

#include <cmath>

#include "tomo/simplify.hpp"
#include "tomo/traversability.hpp"

namespace tomo {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

MapBuild build_map(const PointCloud& cloud, const PipelineConfig& config, bool simplify) {
  config.validate();
  MapBuild out;
  BuildOptions options;
  options.threads = config.threads;
  auto t0 = std::chrono::steady_clock::now();
  Tomogram t = build_tomogram(cloud, config.d_s, config.r_g, options);
  out.build_ms = elapsed_ms(t0);
  out.initial_slices = t.size();
  t0 = std::chrono::steady_clock::now();
  t = evaluate_tomogram(std::move(t), config.traversability, config.threads);
  if (simplify) t = simplify_tomogram(std::move(t), config.simplify_options());
  out.evaluate_ms = elapsed_ms(t0);
  out.tomogram = std::move(t);
  return out;
}

std::optional<std::pair<Point3, Point3>> default_endpoints(const Tomogram& tomogram, const PipelineConfig&) {
  if (!tomogram.evaluated()) return std::nullopt;
  const auto& grid = tomogram.grid;
  std::optional<Point3> low, high;
  auto each_open_cell = [&](auto&& fn) {
    for (const auto& s : tomogram.slices)
      for (std::size_t i = 0; i < grid.rows; ++i)
        for (std::size_t j = 0; j < grid.cols; ++j) {
          const float g = s.ground(i, j);
          if (is_valid(g) && (*s.cost)(i, j) == 0.0f) fn(Point3{grid.cell_x(j), grid.cell_y(i), g});
        }
  };
  each_open_cell([&](const Point3& p) {
    if (!low || p.z < low->z) low = p;
  });
  if (!low) return std::nullopt;
  double far = -1.0;
  each_open_cell([&](const Point3& p) {
    const double d = std::hypot(p.x - low->x, p.y - low->y);
    if (!high || p.z > high->z || (p.z == high->z && d > far)) high = p, far = d;
  });
  return std::make_pair(*low, *high);
}

}  // namespace tomo
