#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "tomo/errors.hpp"
#include "tomo/scene.hpp"

using namespace tomo;

namespace {

SceneSpec spec_of(SceneKind kind, std::uint64_t seed = 3) {
  SceneSpec s;
  s.kind = kind;
  s.density = 100.0;
  s.seed = seed;
  return s;
}

constexpr SceneKind kAll[] = {SceneKind::flat_plane, SceneKind::spiral_stair, SceneKind::two_floor_building,
                              SceneKind::ramp_over_tunnel, SceneKind::random_multilayer};

}  // namespace

TEST_CASE("scene names round-trip") {
  for (auto k : kAll) CHECK(parse_scene_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_scene_kind("forest"), InvalidArgument);
}

TEST_CASE("generation is deterministic and float32-exact") {
  for (auto k : kAll) {
    CAPTURE(to_string(k));
    const auto a = generate_scene(spec_of(k));
    const auto b = generate_scene(spec_of(k));
    REQUIRE(a.size() == b.size());
    REQUIRE(a.size() > 1000);
    CHECK(std::equal(a.points().begin(), a.points().end(), b.points().begin()));
    for (const auto& p : a.points()) {
      REQUIRE(p.x == static_cast<float>(p.x));
      REQUIRE(p.z == static_cast<float>(p.z));
    }
  }
}

TEST_CASE("flat plane has the requested density and footprint") {
  auto s = spec_of(SceneKind::flat_plane);
  const auto c = generate_scene(s);
  CHECK(c.size() == doctest::Approx(s.density * s.length * s.width).epsilon(0.02));
  CHECK(c.bounds().min.z == 0.0);
  CHECK(c.bounds().max.z == 0.0);
  CHECK(c.bounds().min.x >= 0.0);
  CHECK(c.bounds().max.x <= s.length);
}

TEST_CASE("noise stays within its bound") {
  auto s = spec_of(SceneKind::flat_plane);
  s.noise = 0.02;
  const auto c = generate_scene(s);
  CHECK(c.bounds().max.z <= 0.02 + 1e-6);
  CHECK(c.bounds().min.z >= -0.02 - 1e-6);
  CHECK(c.bounds().max.z > 0.01);
}

TEST_CASE("different seeds give different random scenes") {
  const auto a = generate_scene(spec_of(SceneKind::random_multilayer, 1));
  const auto b = generate_scene(spec_of(SceneKind::random_multilayer, 2));
  CHECK_FALSE((a.size() == b.size() && std::equal(a.points().begin(), a.points().end(), b.points().begin())));
}

TEST_CASE("spiral surface heights stack one turn apart") {
  SceneSpec s = spec_of(SceneKind::spiral_stair);
  s.turns = 3.0;
  s.rise_per_turn = 2.0;
  s.step_height = 0.0;
  s.inner_radius = 0.15;  // too thin for a central column
  const auto g = spiral_geometry(s);
  const auto h = spiral_surface_heights(s, g.cx + 2.0, g.cy + 0.01);
  REQUIRE(h.size() == 3);
  CHECK(h[1] - h[0] == doctest::Approx(2.0));
  CHECK(h[2] - h[1] == doctest::Approx(2.0));
  CHECK(spiral_surface_heights(s, g.cx + 0.1, g.cy).empty());
  // top of the generated helix matches turns * rise
  const auto c = generate_scene(s);
  CHECK(c.bounds().max.z == doctest::Approx(6.0).epsilon(0.01));
}

TEST_CASE("invalid scene parameters throw") {
  auto s = spec_of(SceneKind::flat_plane);
  s.density = 0.0;
  CHECK_THROWS_AS(generate_scene(s), InvalidArgument);
  s = spec_of(SceneKind::spiral_stair);
  s.inner_radius = 10.0;
  CHECK_THROWS_AS(generate_scene(s), InvalidArgument);
}
