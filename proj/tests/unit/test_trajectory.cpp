#include <doctest.h>

#include <cmath>
#include <vector>

#include "tomo/errors.hpp"
#include "tomo/planner.hpp"
#include "tomo/trajectory.hpp"
#include "tomo/traversability.hpp"

using namespace tomo;

namespace {

// Floor over [0, L] x [0, W]; optional slab at height `slab_z` over x in [a, b].
Tomogram corridor(double L, double W, double slab_z = 0.0, double a = 0.0, double b = 0.0) {
  std::vector<Point3> pts;
  for (double x = 0.0; x <= L + 1e-9; x += 0.05)
    for (double y = 0.0; y <= W + 1e-9; y += 0.05) {
      pts.push_back({x, y, 0.0});
      if (slab_z > 0.0 && x >= a && x <= b) pts.push_back({x, y, slab_z});
    }
  return evaluate_tomogram(build_tomogram(PointCloud(pts), 0.5, 0.1), TravParams{});
}

BoundaryState at(double x, double y, double z) {
  BoundaryState s;
  s.p = {x, y, z};
  return s;
}

}  // namespace

TEST_CASE("piece derivatives follow the power basis") {
  TrajectoryPiece p;
  p.coeffs.col(0) << 1, 2, 3, 4, 5, 6;
  p.duration = 2.0;
  const double t = 0.7;
  CHECK(p.eval(t, 0).x() == doctest::Approx(1 + 2 * t + 3 * t * t + 4 * std::pow(t, 3) + 5 * std::pow(t, 4) + 6 * std::pow(t, 5)));
  CHECK(p.eval(t, 1).x() == doctest::Approx(2 + 6 * t + 12 * t * t + 20 * std::pow(t, 3) + 30 * std::pow(t, 4)));
  CHECK(p.eval(t, 3).x() == doctest::Approx(24 + 120 * t + 360 * t * t));
  CHECK(p.eval(t, 5).x() == doctest::Approx(720));
  CHECK(p.eval(t, 0).y() == 0.0);
}

TEST_CASE("one rest-to-rest piece is the closed-form quintic") {
  const double T = 2.0;
  const auto traj = solve_min_jerk(at(0, 0, 0), at(3, -1, 0.5), {}, {T});
  REQUIRE(traj.size() == 1);
  for (double t : {0.0, 0.3, 1.0, 1.7, 2.0}) {
    const double s = t / T;
    const double shape = 10 * std::pow(s, 3) - 15 * std::pow(s, 4) + 6 * std::pow(s, 5);
    CHECK(traj.eval(t).x() == doctest::Approx(3.0 * shape));
    CHECK(traj.eval(t).y() == doctest::Approx(-1.0 * shape));
  }
  CHECK(traj.eval(T / 2, 1).x() == doctest::Approx(15.0 * 3.0 / (8.0 * T)));
  CHECK(traj.eval(0.0, 1).norm() == doctest::Approx(0.0));
  CHECK(traj.eval(T, 2).norm() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("a waypoint on the single-piece optimum reproduces it") {
  const double T = 2.0;
  const auto one = solve_min_jerk(at(0, 0, 0), at(3, 1, 0), {}, {T});
  const auto two = solve_min_jerk(at(0, 0, 0), at(3, 1, 0), {one.eval(0.8)}, {0.8, T - 0.8});
  for (double t = 0.0; t <= T; t += 0.1) CHECK((two.eval(t) - one.eval(t)).norm() < 1e-9);
  CHECK(two.jerk_cost() == doctest::Approx(one.jerk_cost()));
}

TEST_CASE("multi-piece splines are C4 and pass through waypoints") {
  const std::vector<Eigen::Vector3d> wps{{1, 0, 0.5}, {2, 1, 0.7}, {2.5, 2, 0.6}};
  const auto traj = solve_min_jerk(at(0, 0, 0.6), at(4, 2, 0.6), wps, {1.0, 1.5, 0.8, 1.2});
  CHECK(traj.duration() == doctest::Approx(4.5));
  for (int order = 0; order <= 4; ++order) CHECK(traj.continuity_residual(order) < 1e-7);
  CHECK((traj.eval(1.0) - wps[0]).norm() < 1e-9);
  CHECK((traj.eval(2.5) - wps[1]).norm() < 1e-9);
  CHECK((traj.eval(3.3) - wps[2]).norm() < 1e-9);
  const auto [piece, local] = traj.locate(2.6);
  CHECK(piece == 2);
  CHECK(local == doctest::Approx(0.1));
  CHECK_THROWS_AS(solve_min_jerk(at(0, 0, 0), at(1, 0, 0), wps, {1.0}), InvalidArgument);
  CHECK_THROWS_AS(solve_min_jerk(at(0, 0, 0), at(1, 0, 0), {}, {0.0}), InvalidArgument);
}

TEST_CASE("sample counts") {
  const auto traj = solve_min_jerk(at(0, 0, 0), at(1, 0, 0), {}, {1.0});
  const auto a = sample_trajectory(traj, 0.3);
  CHECK(a.size() == 5);  // floor(1/0.3) + 2
  CHECK(a.back().t == 1.0);
  CHECK(a[3].t == doctest::Approx(0.9));
  CHECK(sample_trajectory(traj, 0.25).size() == 5);
  CHECK(sample_trajectory(traj, 0.1).size() == 11);
  CHECK(sample_trajectory(traj, 5.0).size() == 2);
  CHECK_THROWS_AS(sample_trajectory(traj, 0.0), InvalidArgument);
}

TEST_CASE("bilinear lookup is exact on planes and refuses holes") {
  Layer l(GridGeometry{4, 5, 0.5, 1.0, 2.0});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) l(i, j) = static_cast<float>(0.5 * (1.0 + 0.5 * j) - 0.25 * (2.0 + 0.5 * i));
  const auto s = query_elevation_bilinear(l, 1.8, 2.3);
  REQUIRE(s);
  CHECK(s->value == doctest::Approx(0.5 * 1.8 - 0.25 * 2.3));
  CHECK(s->dx == doctest::Approx(0.5));
  CHECK(s->dy == doctest::Approx(-0.25));
  // last row and column are reachable
  CHECK(query_elevation_bilinear(l, 3.0, 3.5));
  CHECK_FALSE(query_elevation_bilinear(l, 3.01, 3.0));
  CHECK_FALSE(query_elevation_bilinear(l, 0.99, 3.0));
  l(1, 1) = kInvalid;
  CHECK_FALSE(query_elevation_bilinear(l, 1.6, 2.6));
  CHECK(query_elevation_bilinear(l, 2.6, 3.1));
}

TEST_CASE("bilinear interpolation of a saddle") {
  Layer l(GridGeometry{2, 2, 1.0, 0.0, 0.0});
  l(0, 0) = 0.0f, l(0, 1) = 1.0f, l(1, 0) = 1.0f, l(1, 1) = 0.0f;
  const auto s = query_elevation_bilinear(l, 0.25, 0.5);
  REQUIRE(s);
  CHECK(s->value == doctest::Approx(0.5));
  CHECK(s->dx == doctest::Approx(0.0));
  CHECK(s->dy == doctest::Approx(0.5));
}

TEST_CASE("analytic gradient matches finite differences") {
  const auto t = corridor(6.0, 2.0, 0.9, 2.5, 3.5);
  const auto path = plan_path(t, {0.5, 1.0, 0.0}, {5.5, 1.0, 0.0});
  OptConfig cfg;
  const TrajectoryProblem problem(t, path, rest_state(path.waypoints.front(), cfg.d_ref),
                                  rest_state(path.waypoints.back(), cfg.d_ref), cfg);
  Eigen::VectorXd x = problem.initial_guess();
  // move off the initial guess so that every penalty term is active
  for (Eigen::Index n = 0; n < x.size(); ++n) x[n] += 0.03 * std::sin(1.7 * static_cast<double>(n) + 0.3);
  Eigen::VectorXd g;
  problem.evaluate(x, &g);
  Eigen::VectorXd fd(x.size());
  for (Eigen::Index n = 0; n < x.size(); ++n) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[n]));
    Eigen::VectorXd a = x, b = x;
    a[n] += h;
    b[n] -= h;
    fd[n] = (problem.evaluate(a, nullptr) - problem.evaluate(b, nullptr)) / (2 * h);
  }
  CHECK((g - fd).norm() / fd.norm() < 1e-4);
}

TEST_CASE("optimized trajectory dips under a low ceiling") {
  const auto t = corridor(6.0, 2.0, 0.55, 2.5, 3.5);
  const auto path = plan_path(t, {0.5, 1.0, 0.0}, {5.5, 1.0, 0.0});
  OptConfig cfg;
  const auto report = optimize_trajectory(t, path, rest_state(path.waypoints.front(), cfg.d_ref),
                                          rest_state(path.waypoints.back(), cfg.d_ref), cfg);
  CHECK(report.violations.within(cfg));
  CHECK(report.final_objective <= report.initial_objective);
  const auto under = report.trajectory.eval(report.trajectory.duration() / 2);
  bool dipped = false;
  for (const auto& s : sample_trajectory(report.trajectory, 0.01)) {
    if (s.position.x() > 2.6 && s.position.x() < 3.4) {
      CHECK(s.position.z() <= 0.55 + cfg.height_tolerance);
      CHECK(s.position.z() >= 0.5 - cfg.height_tolerance);
      dipped = true;
    }
    CHECK(s.velocity.norm() <= cfg.v_max * (1 + cfg.kinematic_tolerance));
  }
  CHECK(dipped);
  CHECK(under.z() < cfg.d_ref);
}

TEST_CASE("pieces that cut across an obstacle are split and the trajectory goes around") {
  // Wall across most of the corridor; the only way through is the gap at large y.
  std::vector<Point3> pts;
  for (double x = 0.0; x <= 6.0 + 1e-9; x += 0.05)
    for (double y = 0.0; y <= 3.0 + 1e-9; y += 0.05) {
      const bool wall = x >= 2.8 && x <= 3.2 && y <= 1.9;
      pts.push_back({x, y, wall ? 1.2 : 0.0});
    }
  const auto t = evaluate_tomogram(build_tomogram(PointCloud(pts), 0.5, 0.1), TravParams{});
  const auto path = plan_path(t, {0.5, 0.5, 0.0}, {5.5, 0.5, 0.0});
  OptConfig cfg;
  const auto start = rest_state(path.waypoints.front(), cfg.d_ref), goal = rest_state(path.waypoints.back(), cfg.d_ref);
  const TrajectoryProblem problem(t, path, start, goal, cfg);
  CHECK(problem.pieces() > static_cast<std::size_t>(std::ceil(path.length() / cfg.piece_length)));
  const auto report = optimize_trajectory(t, path, start, goal, cfg);
  CHECK(report.violations.within(cfg));
  CHECK(report.violations.invalid_samples == 0);
  for (const auto& s : sample_trajectory(report.trajectory, 0.02))
    if (s.position.x() > 2.8 && s.position.x() < 3.2) CHECK(s.position.y() > 1.9);
}

TEST_CASE("stationary and degenerate paths") {
  const auto t = corridor(2.0, 2.0);
  const auto path = plan_path(t, {1.0, 1.0, 0.0}, {1.0, 1.0, 0.0});
  const auto rest = rest_state(path.waypoints.front(), 0.65);
  CHECK(rest.p.z() == doctest::Approx(0.65));
  const auto report = optimize_trajectory(t, path, rest, rest);
  CHECK(report.trajectory.size() == 1);
  CHECK(report.trajectory.duration() == 1.0);
  CHECK((report.trajectory.eval(0.5) - rest.p).norm() == 0.0);
  BoundaryState moving = rest;
  moving.v.x() = 0.1;
  CHECK_THROWS_AS(optimize_trajectory(t, path, rest, moving), DegeneratePathError);
  CHECK_THROWS_AS(optimize_trajectory(t, PathResult{}, rest, rest), DegeneratePathError);
}

TEST_CASE("single piece with fixed durations and no height term is the quintic") {
  const auto t = corridor(4.0, 2.0);
  const auto path = plan_path(t, {0.5, 1.0, 0.0}, {3.0, 1.0, 0.0});
  OptConfig cfg;
  cfg.min_pieces = 1;
  cfg.piece_length = 100.0;
  cfg.fix_durations = true;
  cfg.w_z = 0.0;
  const auto start = rest_state(path.waypoints.front(), cfg.d_ref), goal = rest_state(path.waypoints.back(), cfg.d_ref);
  const auto report = optimize_trajectory(t, path, start, goal, cfg);
  REQUIRE(report.trajectory.size() == 1);
  const double T = report.trajectory.duration();
  CHECK(T == doctest::Approx(2.5 / 0.5));
  CHECK(report.trajectory.eval(T / 2, 1).x() == doctest::Approx(15.0 * 2.5 / (8.0 * T)));
}

TEST_CASE("configuration checks") {
  OptConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.v_max = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = OptConfig{};
  cfg.min_pieces = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  Violations v;
  CHECK(v.within(OptConfig{}));
  v.velocity = 0.2;
  CHECK_FALSE(v.within(OptConfig{}));
  v = Violations{};
  v.invalid_samples = 1;
  CHECK_FALSE(v.within(OptConfig{}));
}
