#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <thread>

#include "oracles.hpp"
#include "tomo/errors.hpp"
#include "tomo/planner.hpp"

using namespace tomo;

namespace {

using Field = std::function<float(std::size_t, std::size_t)>;

// Evaluated tomogram from per-slice (ground, cost) fields.
Tomogram synthetic(std::size_t rows, std::size_t cols, const std::vector<std::pair<Field, Field>>& slices) {
  Tomogram t;
  t.grid = GridGeometry{rows, cols, 0.1, 0.0, 0.0};
  for (std::size_t k = 0; k < slices.size(); ++k) {
    TomogramSlice s;
    s.ground = Layer(t.grid);
    s.ceiling = Layer(t.grid);
    s.cost = Layer(t.grid);
    s.plane_height = 0.5 * static_cast<double>(k + 1);
    s.index = static_cast<int>(k);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) {
        s.ground(i, j) = slices[k].first(i, j);
        (*s.cost)(i, j) = slices[k].second(i, j);
      }
    t.slices.push_back(std::move(s));
  }
  return t;
}

Field constant(float v) {
  return [v](std::size_t, std::size_t) { return v; };
}

// Lower floor everywhere; slice 1 shares it for j < 10 and holds a deck at 1 m beyond.
Tomogram deck(float slice1_cost_at_edge) {
  return synthetic(5, 20, {{constant(0.0f), constant(0.0f)},
                           {[](std::size_t, std::size_t j) { return j < 10 ? 0.0f : 1.0f; },
                            [=](std::size_t, std::size_t j) { return j == 10 ? slice1_cost_at_edge : 0.0f; }}});
}

void check_path_shape(const PathResult& p) {
  REQUIRE_FALSE(p.waypoints.empty());
  CHECK(p.waypoints.front().cost_so_far == 0.0);
  CHECK(p.waypoints.back().cost_so_far == doctest::Approx(p.total_cost));
  for (std::size_t n = 1; n < p.waypoints.size(); ++n) {
    const auto& a = p.waypoints[n - 1];
    const auto& b = p.waypoints[n];
    const auto di = std::abs(static_cast<long>(a.i) - static_cast<long>(b.i));
    const auto dj = std::abs(static_cast<long>(a.j) - static_cast<long>(b.j));
    CHECK(std::max(di, dj) == 1);
    CHECK(b.cost_so_far > a.cost_so_far);
  }
}

}  // namespace

TEST_CASE("straight and diagonal runs on a free floor") {
  const auto t = synthetic(10, 10, {{constant(0.0f), constant(0.0f)}});
  const auto p = plan_path(t, {0.0, 0.0, 0.0}, {0.9, 0.0, 0.0});
  CHECK(p.waypoints.size() == 10);
  CHECK(p.total_cost == doctest::Approx(0.9));
  CHECK(p.length() == doctest::Approx(0.9));
  const auto d = plan_path(t, {0.0, 0.0, 0.0}, {0.9, 0.9, 0.0});
  CHECK(d.total_cost == doctest::Approx(0.9 * std::sqrt(2.0)));
  check_path_shape(d);
}

TEST_CASE("cell costs are charged on entry") {
  const auto t = synthetic(1, 5, {{constant(0.0f), [](std::size_t, std::size_t j) { return static_cast<float>(j); }}});
  const auto p = plan_path(t, {0.0, 0.0, 0.0}, {0.4, 0.0, 0.0});
  CHECK(p.total_cost == doctest::Approx(1 + 2 + 3 + 4 + 0.4));
}

TEST_CASE("detours around barriers") {
  const auto t = synthetic(9, 9, {{constant(0.0f), [](std::size_t i, std::size_t j) {
                                     return j == 4 && i < 8 ? 50.0f : 0.0f;
                                   }}});
  const auto p = plan_path(t, {0.0, 0.0, 0.0}, {0.8, 0.0, 0.0});
  check_path_shape(p);
  for (const auto& w : p.waypoints) CHECK_FALSE((w.j == 4 && w.i < 8));
  CHECK(p.waypoints.size() > 9);
}

TEST_CASE("gateway cells connect slices") {
  const auto t = deck(0.0f);
  const auto p = plan_path(t, {0.0, 0.2, 0.0}, {1.9, 0.2, 1.0});
  check_path_shape(p);
  CHECK(p.total_cost == doctest::Approx(1.9));
  CHECK(p.waypoints.back().z == 1.0);
  CHECK(p.waypoints.back().k == 1);
  CHECK(p.waypoints.front().k == 0);
  // the lower floor under the deck is a different node
  const auto low = plan_path(t, {0.0, 0.2, 0.0}, {1.9, 0.2, 0.0});
  CHECK(low.waypoints.back().z == 0.0);
}

TEST_CASE("a barrier in one slice cuts moves of that slice only") {
  const auto t = deck(50.0f);
  CHECK_THROWS_AS(plan_path(t, {0.0, 0.2, 0.0}, {1.9, 0.2, 1.0}), NoPathError);
  CHECK_NOTHROW(plan_path(t, {0.0, 0.2, 0.0}, {1.9, 0.2, 0.0}));
}

TEST_CASE("co-located cells merge into one node with the cheapest cost") {
  const auto t = synthetic(3, 3, {{constant(0.0f), constant(7.0f)}, {constant(0.0f), constant(2.0f)}});
  const Planner planner(t);
  const auto a = planner.canonical(1, 1, 0), b = planner.canonical(1, 1, 1);
  REQUIRE(a);
  REQUIRE(b);
  CHECK(*a == *b);
  CHECK(planner.node_cost(*a) == 2.0);
  CHECK(planner.best_slice(*a) == 1);
  CHECK(planner.last_slice(*a) == 1);
  const auto p = planner.plan({0.0, 0.0, 0.0}, {0.2, 0.0, 0.0});
  CHECK(p.total_cost == doctest::Approx(4.2));
  CHECK(p.waypoints[1].k == 1);
}

TEST_CASE("snapping rules") {
  auto t = synthetic(3, 3, {{constant(0.0f), constant(1.0f)}, {constant(0.3f), constant(0.0f)}});
  const Planner planner(t);
  // nearest elevation wins
  CHECK(planner.snap({0.1, 0.1, 0.05})->k == 0);
  CHECK(planner.snap({0.1, 0.1, 0.2})->k == 1);
  // equal distance: lower cost wins
  CHECK(planner.snap({0.1, 0.1, static_cast<double>(0.3f) / 2})->k == 1);
  // too far above any ground, or outside the grid
  CHECK_FALSE(planner.snap({0.1, 0.1, 0.9}));
  CHECK_FALSE(planner.snap({-1.0, 0.1, 0.0}));
  CHECK_THROWS_AS(planner.plan({0.1, 0.1, 0.9}, {0.0, 0.0, 0.0}), UnsnappableError);
  try {
    planner.plan({0.0, 0.0, 0.0}, {5.0, 5.0, 0.0});
  } catch (const UnsnappableError& e) {
    CHECK(e.which() == "goal");
  }
  // barrier cells do not snap
  const auto walled = synthetic(3, 3, {{constant(0.0f), constant(50.0f)}});
  CHECK_THROWS_AS(plan_path(walled, {0.1, 0.1, 0.0}, {0.0, 0.0, 0.0}), UnsnappableError);
}

TEST_CASE("start equal to goal gives a single waypoint") {
  const auto t = synthetic(3, 3, {{constant(0.0f), constant(0.0f)}});
  const auto p = plan_path(t, {0.1, 0.1, 0.0}, {0.1, 0.1, 0.0});
  CHECK(p.waypoints.size() == 1);
  CHECK(p.total_cost == 0.0);
  CHECK(p.length() == 0.0);
}

TEST_CASE("the planner requires costs") {
  auto t = synthetic(3, 3, {{constant(0.0f), constant(0.0f)}});
  t.slices[0].cost.reset();
  CHECK_THROWS_AS(Planner{t}, InvalidArgument);
  CHECK_THROWS_AS(build_reference_graph(t), InvalidArgument);
}

TEST_CASE("reference graph is symmetric") {
  const auto g = build_reference_graph(deck(0.0f));
  std::map<std::pair<std::size_t, std::size_t>, double> w;
  for (const auto& e : g.edges) w[{e.from, e.to}] = e.cost;
  for (const auto& e : g.edges) CHECK(w.count({e.to, e.from}) == 1);
  CHECK(g.edges.size() % 2 == 0);
}

TEST_CASE("costs match Dijkstra on random scenes") {
  std::mt19937_64 rng(99);
  int found = 0;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto t = oracle::random_scene(seed);
    const auto graph = build_reference_graph(t);
    const Planner planner(t);
    for (int q = 0; q < 4; ++q) {
      const auto a = oracle::random_node_point(graph, t.grid, rng);
      const auto b = oracle::random_node_point(graph, t.grid, rng);
      const auto sa = oracle::snap(graph, t.grid, a, 0.5), sb = oracle::snap(graph, t.grid, b, 0.5);
      REQUIRE(sa);
      REQUIRE(sb);
      const auto expected = oracle::shortest_cost(graph, *sa, *sb);
      if (expected) {
        const auto p = planner.plan(a, b);
        CHECK(p.total_cost == doctest::Approx(*expected).epsilon(1e-9));
        check_path_shape(p);
        ++found;
      } else {
        CHECK_THROWS_AS(planner.plan(a, b), NoPathError);
      }
    }
  }
  CHECK(found > 0);
}

TEST_CASE("concurrent queries agree with sequential ones") {
  const auto t = oracle::random_scene(3);
  const auto graph = build_reference_graph(t);
  const Planner planner(t);
  std::mt19937_64 rng(5);
  std::vector<std::pair<Point3, Point3>> queries;
  for (int q = 0; q < 8; ++q)
    queries.emplace_back(oracle::random_node_point(graph, t.grid, rng), oracle::random_node_point(graph, t.grid, rng));
  auto run = [&](std::size_t q) {
    try {
      return planner.plan(queries[q].first, queries[q].second).total_cost;
    } catch (const NoPathError&) {
      return -1.0;
    }
  };
  std::vector<double> seq(queries.size()), par(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) seq[q] = run(q);
  std::vector<std::thread> pool;
  for (std::size_t q = 0; q < queries.size(); ++q) pool.emplace_back([&, q] { par[q] = run(q); });
  for (auto& th : pool) th.join();
  CHECK(seq == par);
}
