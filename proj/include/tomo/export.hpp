#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tomo/planner.hpp"
#include "tomo/tomogram.hpp"
#include "tomo/trajectory.hpp"

namespace tomo {

/// 8-bit grey image, row 0 at the top.
struct GreyImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Cost c in [0, c_barrier] maps to round(255 * (1 - c / c_barrier)); invalid
/// cells read 0. Grid row 0 (south) becomes the bottom image row.
GreyImage render_costmap(const Layer& cost, double c_barrier);

/// Valid ground spans [1, 255] between the layer's lowest and highest cell;
/// invalid cells read 0.
GreyImage render_ground(const Layer& ground);

/// Binary PGM (P5).
std::vector<std::uint8_t> encode_pgm(const GreyImage& image);
void save_pgm(const GreyImage& image, const std::filesystem::path& path);

/// One ground point per traversable (cost < c_barrier) cell and distinct
/// elevation across all slices, keeping the lowest cost.
struct CostPoint {
  double x = 0.0, y = 0.0, z = 0.0;
  float cost = 0.0F;
};
std::vector<CostPoint> merged_cloud(const Tomogram& tomogram, double c_barrier, double eps_e = 1e-6);
/// ASCII PLY with x, y, z, cost vertex properties.
std::string encode_cost_ply(const std::vector<CostPoint>& points);

std::string path_to_json(const PathResult& path);
std::string path_to_csv(const PathResult& path);

/// Per-piece coefficients (6 rows of x, y, z) and durations.
std::string trajectory_to_json(const Trajectory& trajectory);
/// t,x,y,z,vx,vy,vz,speed at step dt.
std::string trajectory_to_csv(const Trajectory& trajectory, double dt);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace tomo
