#include "tomo/export.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>
#include <json.hpp>

#include "tomo/errors.hpp"

namespace tomo {

namespace {

GreyImage blank(const GridGeometry& grid) {
  GreyImage img;
  img.width = grid.cols;
  img.height = grid.rows;
  img.pixels.assign(grid.cells(), 0);
  return img;
}

std::uint8_t& pixel(GreyImage& img, std::size_t i, std::size_t j) {
  return img.pixels[(img.height - 1 - i) * img.width + j];
}

}  // namespace

GreyImage render_costmap(const Layer& cost, double c_barrier) {
  if (!(c_barrier > 0.0)) throw InvalidArgument("c_barrier must be positive");
  GreyImage img = blank(cost.grid());
  for (std::size_t i = 0; i < cost.rows(); ++i)
    for (std::size_t j = 0; j < cost.cols(); ++j) {
      const float c = cost(i, j);
      if (!is_valid(c)) continue;
      const double v = std::round(255.0 * (1.0 - std::clamp(static_cast<double>(c), 0.0, c_barrier) / c_barrier));
      pixel(img, i, j) = static_cast<std::uint8_t>(v);
    }
  return img;
}

GreyImage render_ground(const Layer& ground) {
  GreyImage img = blank(ground.grid());
  float lo = std::numeric_limits<float>::infinity(), hi = -lo;
  for (float v : ground.values())
    if (is_valid(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const double span = static_cast<double>(hi) - lo;
  for (std::size_t i = 0; i < ground.rows(); ++i)
    for (std::size_t j = 0; j < ground.cols(); ++j) {
      const float v = ground(i, j);
      if (!is_valid(v)) continue;
      const double f = span > 0.0 ? (static_cast<double>(v) - lo) / span : 1.0;
      pixel(img, i, j) = static_cast<std::uint8_t>(1.0 + std::round(254.0 * f));
    }
  return img;
}

std::vector<std::uint8_t> encode_pgm(const GreyImage& image) {
  const std::string header = fmt::format("P5\n{} {}\n255\n", image.width, image.height);
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

void save_pgm(const GreyImage& image, const std::filesystem::path& path) {
  const auto bytes = encode_pgm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

std::vector<CostPoint> merged_cloud(const Tomogram& tomogram, double c_barrier, double eps_e) {
  if (!tomogram.evaluated()) throw InvalidArgument("merged cloud requires an evaluated tomogram");
  const auto& grid = tomogram.grid;
  std::vector<CostPoint> out;
  std::vector<CostPoint> cell;
  for (std::size_t i = 0; i < grid.rows; ++i)
    for (std::size_t j = 0; j < grid.cols; ++j) {
      cell.clear();
      for (const auto& s : tomogram.slices) {
        const float g = s.ground(i, j), c = (*s.cost)(i, j);
        if (!is_valid(g) || !is_valid(c) || c >= c_barrier) continue;
        cell.push_back({grid.cell_x(j), grid.cell_y(i), g, c});
      }
      std::stable_sort(cell.begin(), cell.end(), [](const CostPoint& a, const CostPoint& b) { return a.z < b.z; });
      for (const auto& p : cell) {
        if (!out.empty() && out.back().x == p.x && out.back().y == p.y && std::abs(out.back().z - p.z) <= eps_e) {
          out.back().cost = std::min(out.back().cost, p.cost);
          continue;
        }
        out.push_back(p);
      }
    }
  return out;
}

std::string encode_cost_ply(const std::vector<CostPoint>& points) {
  std::string out = fmt::format(
      "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n"
      "property float cost\nend_header\n",
      points.size());
  for (const auto& p : points) out += fmt::format("{} {} {} {}\n", p.x, p.y, p.z, p.cost);
  return out;
}

std::string path_to_json(const PathResult& path) {
  nlohmann::ordered_json j;
  j["total_cost"] = path.total_cost;
  j["length"] = path.length();
  j["expanded"] = path.expanded;
  auto& wps = j["waypoints"] = nlohmann::ordered_json::array();
  for (const auto& w : path.waypoints)
    wps.push_back({{"x", w.x}, {"y", w.y}, {"z", w.z}, {"k", w.k}, {"cost_so_far", w.cost_so_far}});
  return j.dump(2) + "\n";
}

std::string path_to_csv(const PathResult& path) {
  std::string out = "x,y,z,k,cost_so_far\n";
  for (const auto& w : path.waypoints) out += fmt::format("{},{},{},{},{}\n", w.x, w.y, w.z, w.k, w.cost_so_far);
  return out;
}

std::string trajectory_to_json(const Trajectory& trajectory) {
  nlohmann::ordered_json j;
  j["duration"] = trajectory.duration();
  auto& pieces = j["pieces"] = nlohmann::ordered_json::array();
  for (const auto& p : trajectory.pieces()) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (int k = 0; k < 6; ++k) rows.push_back({p.coeffs(k, 0), p.coeffs(k, 1), p.coeffs(k, 2)});
    pieces.push_back({{"duration", p.duration}, {"coefficients", rows}});
  }
  return j.dump(2) + "\n";
}

std::string trajectory_to_csv(const Trajectory& trajectory, double dt) {
  std::string out = "t,x,y,z,vx,vy,vz,speed\n";
  for (const auto& s : sample_trajectory(trajectory, dt))
    out += fmt::format("{},{},{},{},{},{},{},{}\n", s.t, s.position.x(), s.position.y(), s.position.z(),
                       s.velocity.x(), s.velocity.y(), s.velocity.z(), s.velocity.norm());
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

}  // namespace tomo
