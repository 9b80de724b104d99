#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <utility>

#include "tomo/config.hpp"
#include "tomo/tomogram.hpp"

namespace tomo {

struct MapBuild {
  Tomogram tomogram;
  std::size_t initial_slices = 0;
  double build_ms = 0.0;     // projection into slices
  double evaluate_ms = 0.0;  // traversability + simplification
};

/// build -> evaluate -> simplify (when `simplify` is set).
MapBuild build_map(const PointCloud& cloud, const PipelineConfig& config, bool simplify = true);

/// Deterministic start/goal for benchmarking: the lowest zero-cost ground
/// cell, and the highest one farthest from it, both at ground height.
std::optional<std::pair<Point3, Point3>> default_endpoints(const Tomogram& tomogram, const PipelineConfig& config);

/// Milliseconds since `start` on the monotonic clock.
double elapsed_ms(std::chrono::steady_clock::time_point start);

}  // namespace tomo
