#include <doctest.h>

#include <cmath>
#include <functional>

#include "oracles.hpp"
#include "tomo/errors.hpp"
#include "tomo/traversability.hpp"

using namespace tomo;

namespace {

Layer surface(std::size_t rows, std::size_t cols, const std::function<double(std::size_t, std::size_t)>& z) {
  Layer l(GridGeometry{rows, cols, 0.1, 0.0, 0.0});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) l(i, j) = static_cast<float>(z(i, j));
  return l;
}

}  // namespace

TEST_CASE("clearance cost") {
  const TravParams p;
  CHECK(interval_cost_value(0.55, p) == doctest::Approx(2.0));
  CHECK(interval_cost_value(0.65, p) == 0.0);
  CHECK(interval_cost_value(2.0, p) == 0.0);
  CHECK(interval_cost_value(0.50, p) == doctest::Approx(3.0));
  CHECK(interval_cost_value(0.49, p) == p.c_barrier);
  CHECK(interval_cost_value(std::numeric_limits<double>::infinity(), p) == 0.0);
}

TEST_CASE("interval layer handles holes and open sky") {
  const TravParams p;
  Layer g(GridGeometry{1, 3, 0.1, 0, 0}), c(GridGeometry{1, 3, 0.1, 0, 0});
  g(0, 0) = 0.0f;
  c(0, 0) = 0.55f;
  g(0, 1) = 0.0f;  // no ceiling
  const auto out = interval_cost(g, c, p);
  CHECK(out(0, 0) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(out(0, 1) == 0.0f);
  CHECK(out(0, 2) == static_cast<float>(p.c_barrier));
}

TEST_CASE("terrain cost branches") {
  const TravParams p;
  CHECK(terrain_cost_value(0.0, 0.0, 0.0, p) == 0.0);
  CHECK(terrain_cost_value(0.18, 0.0, 0.0, p) == doctest::Approx(15.0 * 0.25));
  CHECK(terrain_cost_value(0.0, 1.0, 0.5, p) == doctest::Approx(20.0 / (1.7 * 1.7)));
  CHECK(terrain_cost_value(0.0, 1.0, 0.1, p) == p.c_barrier);
  CHECK(terrain_cost_value(1.8, 0.0, 1.0, p) == p.c_barrier);
  // the barrier test uses the larger axis, the gentle test the norm
  CHECK(terrain_cost_value(1.6, 1.6, 1.0, p) == doctest::Approx(20.0 * (1.6 / 1.7) * (1.6 / 1.7)));
}

TEST_CASE("theta_p of one sends every steep cell to the barrier") {
  TravParams p;
  p.theta_p = 1.0;
  CHECK(terrain_cost_value(0.0, 0.5, 1.0, p) == p.c_barrier);
  CHECK(terrain_cost_value(0.0, 0.2, 1.0, p) < p.c_barrier);
  const auto step = surface(30, 30, [](std::size_t, std::size_t j) { return j >= 15 ? 0.1 : 0.0; });
  const auto cost = ground_cost(step, p);
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(cost(i, 14) == static_cast<float>(p.c_barrier));
    CHECK(cost(i, 15) == static_cast<float>(p.c_barrier));
    CHECK(cost(i, 5) == 0.0f);
  }
}

TEST_CASE("ground cost on planes and steps") {
  const TravParams p;
  const auto flat = ground_cost(surface(20, 20, [](auto, auto) { return 1.0; }), p);
  for (float v : flat.values()) CHECK(v == 0.0f);

  const auto ramp = ground_cost(surface(20, 20, [](std::size_t, std::size_t j) { return 0.02 * j; }), p);
  const double expected = 15.0 * std::pow(0.2 / 0.36, 2);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 20; ++j) CHECK(ramp(i, j) == doctest::Approx(expected).epsilon(1e-4));

  // a small step surrounded by flat ground is a passable edge
  const auto step = ground_cost(surface(30, 30, [](std::size_t, std::size_t j) { return j >= 15 ? 0.1 : 0.0; }), p);
  CHECK(step(10, 14) == doctest::Approx(20.0 * std::pow(0.5 / 1.7, 2)).epsilon(1e-4));
  CHECK(step(10, 15) == step(10, 14));
  CHECK(step(10, 5) == 0.0f);

  // a wall is a barrier
  const auto wall = ground_cost(surface(30, 30, [](std::size_t, std::size_t j) { return j >= 15 ? 1.0 : 0.0; }), p);
  CHECK(wall(10, 14) == static_cast<float>(p.c_barrier));

  // a uniform steep ramp has no gentle cells
  const auto steep = ground_cost(surface(30, 30, [](std::size_t, std::size_t j) { return 0.1 * j; }), p);
  CHECK(steep(15, 15) == static_cast<float>(p.c_barrier));
}

TEST_CASE("edges use one-sided differences and isolated cells are barriers") {
  const TravParams p;
  Layer g = surface(5, 5, [](std::size_t, std::size_t j) { return 0.02 * j; });
  const auto c = ground_cost(g, p);
  CHECK(c(2, 0) == doctest::Approx(15.0 * std::pow(0.2 / 0.36, 2)).epsilon(1e-4));
  Layer lone(GridGeometry{5, 5, 0.1, 0, 0});
  lone(2, 2) = 0.0f;
  const auto lc = ground_cost(lone, p);
  CHECK(lc(2, 2) == static_cast<float>(p.c_barrier));
  // a row of cells is isolated along y
  Layer line(GridGeometry{5, 5, 0.1, 0, 0});
  for (std::size_t j = 0; j < 5; ++j) line(2, j) = 0.0f;
  CHECK(ground_cost(line, p)(2, 2) == static_cast<float>(p.c_barrier));
}

TEST_CASE("fusion clamps to the barrier and treats holes as barriers") {
  const TravParams p;
  Layer a(GridGeometry{1, 3, 0.1, 0, 0}), b(GridGeometry{1, 3, 0.1, 0, 0});
  a(0, 0) = 10.0f, b(0, 0) = 5.0f;
  a(0, 1) = 40.0f, b(0, 1) = 30.0f;
  a(0, 2) = 1.0f;
  const auto f = fuse_costs(a, b, p);
  CHECK(f(0, 0) == 15.0f);
  CHECK(f(0, 1) == 50.0f);
  CHECK(f(0, 2) == 50.0f);
  CHECK_THROWS_AS(fuse_costs(a, Layer(GridGeometry{2, 3, 0.1, 0, 0}), p), InvalidArgument);
}

TEST_CASE("inflation kernel shape") {
  CHECK(kernel_weight(0.35, 0.2, 0.4, 0.1) * 50.0 == doctest::Approx(25.0));
  CHECK(kernel_weight(0.1, 0.2, 0.4, 0.1) == 1.0);
  CHECK(kernel_weight(0.9, 0.2, 0.4, 0.1) == 0.0);
  const auto k = build_kernel(0.2, 0.4, 0.1);
  CHECK(k.radius == 4);
  CHECK(k.side() == 9);
  CHECK(k(4, 4) == 1.0);
  CHECK(k(4, 6) == 1.0);
  CHECK(k(4, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(k(0, 0) == 0.0);  // corner lies past d_sm
  for (int m = 0; m < 9; ++m)
    for (int n = 0; n < 9; ++n) CHECK(k(m, n) == k(n, m));
  CHECK_THROWS_AS(build_kernel(0.2, 0.1, 0.1), InvalidArgument);
  CHECK_THROWS_AS(build_kernel(0.05, 0.4, 0.1), InvalidArgument);
}

TEST_CASE("inflation spreads a single barrier by distance") {
  Layer c(GridGeometry{21, 21, 0.1, 0, 0}, 0.0f);
  c(10, 10) = 50.0f;
  const auto k = build_kernel(0.2, 0.4, 0.1);
  const auto out = inflate(c, k);
  CHECK(out(10, 10) == 50.0f);
  CHECK(out(10, 12) == 50.0f);
  CHECK(out(10, 14) == doctest::Approx(50.0 / 3.0));
  CHECK(out(10, 15) == 0.0f);
  CHECK(out.identical(oracle::brute_force_inflate(c, k)));
}

TEST_CASE("inflation matches the oracle on random maps for any thread count") {
  const auto k = build_kernel(0.2, 0.4, 0.1);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto c = oracle::random_cost_map(60, 75, 0.1, seed);
    const auto expected = oracle::brute_force_inflate(c, k);
    for (unsigned threads : {1u, 4u}) CHECK(inflate(c, k, threads).identical(expected));
  }
  const auto k2 = build_kernel(0.25, 0.6, 0.05);
  const auto c = oracle::random_cost_map(50, 50, 0.05, 11);
  CHECK(inflate(c, k2).identical(oracle::brute_force_inflate(c, k2)));
}

TEST_CASE("parameter validation") {
  TravParams p;
  CHECK_NOTHROW(p.validate(0.1));
  CHECK_THROWS_AS(p.validate(0.3), InvalidArgument);
  p.theta_p = 1.5;
  CHECK_THROWS_AS(p.validate(0.1), InvalidArgument);
  p = TravParams{};
  p.d_min = 0.8;
  CHECK_THROWS_AS(p.validate(0.1), InvalidArgument);
  p = TravParams{};
  p.r_c = 0.3;
  CHECK_THROWS_AS(p.validate(0.1), InvalidArgument);
  CHECK(TravParams{}.patch_radius(0.1) == 3);
}
