#include <doctest.h>

#include "tomo/pipeline.hpp"
#include "tomo/planner.hpp"
#include "tomo/scene.hpp"

using namespace tomo;

TEST_CASE("map build reports slices before and after simplification") {
  SceneSpec s;
  s.kind = SceneKind::two_floor_building;
  s.density = 100.0;
  const auto cloud = generate_scene(s);
  PipelineConfig cfg;
  const auto full = build_map(cloud, cfg, false);
  const auto simple = build_map(cloud, cfg, true);
  CHECK(full.tomogram.evaluated());
  CHECK(full.tomogram.size() == full.initial_slices);
  CHECK(simple.initial_slices == full.initial_slices);
  CHECK(simple.tomogram.size() < simple.initial_slices);
  CHECK(full.build_ms >= 0.0);
}

TEST_CASE("default endpoints span the scene and are plannable") {
  SceneSpec s;
  s.kind = SceneKind::two_floor_building;
  PipelineConfig cfg;
  const auto map = build_map(generate_scene(s), cfg);
  const auto ends = default_endpoints(map.tomogram, cfg);
  REQUIRE(ends);
  CHECK(ends->second.z > ends->first.z + 1.0);
  const auto path = plan_path(map.tomogram, ends->first, ends->second, cfg.planner_options());
  CHECK(path.waypoints.size() > 10);
}

TEST_CASE("flat scenes get distinct endpoints") {
  SceneSpec s;
  PipelineConfig cfg;
  const auto map = build_map(generate_scene(s), cfg);
  const auto ends = default_endpoints(map.tomogram, cfg);
  REQUIRE(ends);
  CHECK(std::hypot(ends->first.x - ends->second.x, ends->first.y - ends->second.y) > 5.0);
}
