#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "tomo/errors.hpp"
#include "tomo/planner.hpp"
#include "tomo/tomogram.hpp"

namespace tomo {

/// One quintic piece: q(t) = coeffs^T [1, t, ..., t^5], t in [0, duration].
struct TrajectoryPiece {
  Eigen::Matrix<double, 6, 3> coeffs = Eigen::Matrix<double, 6, 3>::Zero();
  double duration = 1.0;

  /// order-th time derivative at local time t (order 0..5).
  Eigen::Vector3d eval(double t, int order = 0) const;
};

class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<TrajectoryPiece> pieces);

  const std::vector<TrajectoryPiece>& pieces() const { return pieces_; }
  std::size_t size() const { return pieces_.size(); }
  double duration() const { return total_; }

  /// Piece index and local time for global time t (clamped to [0, duration]).
  std::pair<std::size_t, double> locate(double t) const;
  Eigen::Vector3d eval(double t, int order = 0) const;

  /// Integral of the squared jerk norm over all pieces.
  double jerk_cost() const;
  /// Largest jump of derivative `order` across any joint.
  double continuity_residual(int order) const;

 private:
  std::vector<TrajectoryPiece> pieces_;
  std::vector<double> starts_;
  double total_ = 0.0;
};

/// Position, velocity and acceleration of a boundary.
struct BoundaryState {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d a = Eigen::Vector3d::Zero();
};

struct OptConfig {
  // Objective.
  double w_z = 100.0;  // weight of integrated squared deviation from ground + d_ref
  double w_T = 1.0;    // weight of total duration
  // Robot and map.
  double d_min = 0.50;
  double d_ref = 0.65;
  double c_safe = 40.0;            // interpolated travel cost ceiling
  double c_barrier = 50.0;         // cost charged where the map is unknown
  double ceiling_inflation = 0.2;  // radius of the min-filter applied to ceilings [m]
  // Kinematic limits.
  double v_max = 1.0;
  double a_max = 2.0;
  double yaw_rate_max = 2.0;  // rad/s, applied above 0.05 m/s planar speed
  // Penalties (cubic hinges integrated over time).
  double w_height = 1e7;
  double w_safety = 1e2;
  double w_kinematic = 1e3;
  double height_margin = 5e-3;  // band shrink used inside the penalty [m]
  double cost_margin = 2.0;     // the safety hinge starts at c_safe - cost_margin
  int samples_per_piece = 32;
  // Solver.
  int max_iterations = 300;
  double gradient_tolerance = 1e-5;
  int penalty_rounds = 4;  // re-solves with 10x penalty weights while constraints stay violated
  // Initialization.
  double piece_length = 1.5;
  double min_piece_length = 0.4;  // floor for halving pieces whose initial spline leaves the corridor
  int min_pieces = 2;
  bool fix_durations = false;
  double min_duration = 0.1;
  // Acceptance of the result.
  double height_tolerance = 1e-3;
  double cost_tolerance = 1.0;
  double kinematic_tolerance = 0.05;  // fraction of each limit

  void validate() const;
};

/// Worst constraint excess measured on a dense resampling of a trajectory.
struct Violations {
  double below_ground_band = 0.0;  // (e^G + d_min) - q_z [m]
  double above_ceiling = 0.0;      // q_z - inflated ceiling [m]
  double cost = 0.0;               // interpolated c^T - C_safe
  double velocity = 0.0;           // |v| - v_max
  double acceleration = 0.0;       // |a| - a_max
  double yaw_rate = 0.0;           // |omega| - limit
  std::size_t invalid_samples = 0;  // samples over unknown/out-of-grid ground

  bool within(const OptConfig& cfg) const;
};

struct OptimizationReport {
  Trajectory trajectory;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  Violations violations;
};

/// Thrown when penalties stay above tolerance; carries the best trajectory.
class InfeasibleTrajectoryError : public Error {
 public:
  InfeasibleTrajectoryError(const std::string& what, OptimizationReport report)
      : Error(what), report_(std::move(report)) {}
  const OptimizationReport& report() const { return report_; }

 private:
  OptimizationReport report_;
};

class DegeneratePathError : public Error {
 public:
  using Error::Error;
};

/// Bilinear surface value and its exact planimetric gradient.
struct BilinearSample {
  double value = 0.0;
  double dx = 0.0;
  double dy = 0.0;
};

/// nullopt when the 2x2 support leaves the grid or touches an invalid cell.
std::optional<BilinearSample> query_elevation_bilinear(const Layer& layer, double x, double y);

/// Map context seen by one sample of the trajectory.
struct Environment {
  bool valid = false;
  BilinearSample ground;
  BilinearSample ceiling;  // inflated; open sky reads as ground + d_ref + 1 m
  BilinearSample cost;
  std::size_t slice = 0;
};

/// Smoothing problem for one path: decision vector is the M-1 interior
/// waypoints (xyz) followed by M log-durations (omitted with fix_durations).
class TrajectoryProblem {
 public:
  TrajectoryProblem(const Tomogram& tomogram, const PathResult& path, const BoundaryState& start,
                    const BoundaryState& goal, const OptConfig& config);

  std::size_t pieces() const { return pieces_; }
  std::size_t num_variables() const;
  Eigen::VectorXd initial_guess() const { return x0_; }

  /// Total objective; fills grad (resized) when non-null. Returns +inf when
  /// the durations leave the representable range.
  double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const;
  Trajectory trajectory(const Eigen::VectorXd& x) const;

  /// Map lookups for a body position. The slice is the one whose ground at
  /// the nearest cell is closest to z - d_ref, preferring cells below
  /// c_barrier and the cheapest among co-located ties.
  Environment environment(const Eigen::Vector3d& p) const;
  Violations violations(const Trajectory& trajectory, int samples_per_piece = 64) const;

  const OptConfig& config() const { return cfg_; }
  /// Multiplier on the height, safety and kinematic penalty weights.
  void set_penalty_scale(double scale) { penalty_scale_ = scale; }

 private:
  struct Unpacked {
    std::vector<Eigen::Vector3d> waypoints;  // interior only
    std::vector<double> durations;
  };
  Unpacked unpack(const Eigen::VectorXd& x) const;
  std::optional<std::size_t> select_slice(const Eigen::Vector3d& p) const;
  const Layer& inflated_ceiling(std::size_t slice) const;

  const Tomogram* tomogram_;
  PathResult path_;
  BoundaryState start_, goal_;
  OptConfig cfg_;
  std::size_t pieces_ = 1;
  std::vector<double> fixed_durations_;
  Eigen::VectorXd x0_;
  std::vector<Layer> ceilings_;  // inflated, per slice
  double penalty_scale_ = 1.0;
};

/// Smooths a planned path into an M-piece quintic trajectory. A zero-length
/// path with identical boundary states yields one stationary piece.
/// Throws DegeneratePathError, InfeasibleTrajectoryError.
OptimizationReport optimize_trajectory(const Tomogram& tomogram, const PathResult& path, const BoundaryState& start,
                                       const BoundaryState& goal, const OptConfig& config = {});

/// Rest state at a waypoint, body at ground + d_ref.
BoundaryState rest_state(const Waypoint& w, double d_ref);

/// Minimum-jerk coefficients for the pieces given interior waypoints and
/// durations (continuity through the 4th derivative at joints).
Trajectory solve_min_jerk(const BoundaryState& start, const BoundaryState& goal,
                          const std::vector<Eigen::Vector3d>& waypoints, const std::vector<double>& durations);

struct TrajectorySample {
  double t = 0.0;
  Eigen::Vector3d position, velocity, acceleration;
};

/// Samples at 0, dt, 2dt, ... plus the exact final time.
std::vector<TrajectorySample> sample_trajectory(const Trajectory& trajectory, double dt);

}  // namespace tomo
