#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "tomo/cloud_io.hpp"

namespace tomo {

enum class SceneKind { flat_plane, spiral_stair, two_floor_building, ramp_over_tunnel, random_multilayer };

SceneKind parse_scene_kind(std::string_view name);
std::string_view to_string(SceneKind kind);

/// Procedural test scene. Surfaces are sampled on a jittered lattice with
/// spacing 1/sqrt(density); noise is uniform in [-noise, +noise] along z.
struct SceneSpec {
  SceneKind kind = SceneKind::flat_plane;
  double length = 10.0;  // x extent [m]; ramp_over_tunnel grows it to fit the ramps
  double width = 10.0;   // y extent [m]
  double height = 3.0;   // storey / deck / max platform height [m], kind dependent
  double density = 400.0;  // points per m^2
  double noise = 0.0;
  std::uint64_t seed = 0;

  // spiral_stair only
  double turns = 2.0;
  double rise_per_turn = 3.0;
  double inner_radius = 0.4;
  double step_height = 0.15;  // 0 gives a smooth helical ramp
};

/// Deterministic in `spec`; coordinates are float32-representable so binary
/// PCD round-trips are exact.
PointCloud generate_scene(const SceneSpec& spec);

/// Walking-surface heights of the spiral stair at planimetric (x, y), one per
/// turn that covers that position, ascending. Empty off the stair annulus.
std::vector<double> spiral_surface_heights(const SceneSpec& spec, double x, double y);

/// Helix centre and outer radius used by generate_scene for spiral_stair.
struct SpiralGeometry {
  double cx, cy, outer_radius;
};
SpiralGeometry spiral_geometry(const SceneSpec& spec);

}  // namespace tomo
