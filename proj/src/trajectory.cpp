#include "tomo/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <ceres/first_order_function.h>
#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>
#include <fmt/format.h>

namespace tomo {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Coeffs = Eigen::Matrix<double, 6, 3>;

// order-th derivative of [1, t, ..., t^5].
Vec6 basis(double t, int order) {
  Vec6 b = Vec6::Zero();
  for (int k = order; k < 6; ++k) {
    double f = 1.0;
    for (int m = 0; m < order; ++m) f *= static_cast<double>(k - m);
    double tp = 1.0;
    for (int m = 0; m < k - order; ++m) tp *= t;
    b[k] = f * tp;
  }
  return b;
}

// Q(T)_kl = integral over [0, T] of the jerk basis products.
Eigen::Matrix<double, 6, 6> jerk_gram(double T) {
  Eigen::Matrix<double, 6, 6> q = Eigen::Matrix<double, 6, 6>::Zero();
  for (int k = 3; k < 6; ++k)
    for (int l = 3; l < 6; ++l) {
      const double fk = k * (k - 1) * (k - 2), fl = l * (l - 1) * (l - 2);
      const int e = k + l - 5;
      q(k, l) = fk * fl * std::pow(T, e) / e;
    }
  return q;
}

// Linear system A(T) C = B(q) of the minimum-jerk spline; C stacks piece coefficients.
struct SplineSystem {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  Eigen::MatrixXd coeffs;
  bool ok = false;
};

void assemble_and_solve(const BoundaryState& start, const BoundaryState& goal,
                        const std::vector<Eigen::Vector3d>& waypoints, const std::vector<double>& durations,
                        SplineSystem& sys) {
  const auto m = static_cast<int>(durations.size());
  const int n = 6 * m;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(36 * m + 12 * m));
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 3);
  auto put_row = [&](int row, int piece, const Vec6& b, double sign = 1.0) {
    for (int k = 0; k < 6; ++k)
      if (b[k] != 0.0) trip.emplace_back(row, 6 * piece + k, sign * b[k]);
  };
  const Eigen::Vector3d s0[3] = {start.p, start.v, start.a};
  const Eigen::Vector3d g0[3] = {goal.p, goal.v, goal.a};
  for (int d = 0; d < 3; ++d) {
    put_row(d, 0, basis(0.0, d));
    rhs.row(d) = s0[d].transpose();
  }
  for (int i = 0; i + 1 < m; ++i) {
    const int base = 3 + 6 * i;
    const double T = durations[static_cast<std::size_t>(i)];
    put_row(base, i, basis(T, 0));
    rhs.row(base) = waypoints[static_cast<std::size_t>(i)].transpose();
    for (int d = 0; d < 5; ++d) {
      put_row(base + 1 + d, i, basis(T, d));
      put_row(base + 1 + d, i + 1, basis(0.0, d), -1.0);
    }
  }
  const double T_last = durations.back();
  for (int d = 0; d < 3; ++d) {
    put_row(n - 3 + d, m - 1, basis(T_last, d));
    rhs.row(n - 3 + d) = g0[d].transpose();
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();
  sys.lu.analyzePattern(a);
  sys.lu.factorize(a);
  sys.ok = sys.lu.info() == Eigen::Success;
  if (sys.ok) sys.coeffs = sys.lu.solve(rhs);
}

Trajectory to_trajectory(const Eigen::MatrixXd& coeffs, const std::vector<double>& durations) {
  std::vector<TrajectoryPiece> pieces(durations.size());
  for (std::size_t i = 0; i < durations.size(); ++i) {
    pieces[i].coeffs = coeffs.block<6, 3>(static_cast<Eigen::Index>(6 * i), 0);
    pieces[i].duration = durations[i];
  }
  return Trajectory(std::move(pieces));
}

double cube(double v) { return v * v * v; }

constexpr double kMinDuration = 1e-3;
constexpr double kOpenSkyClearance = 1.0;  // above ground + d_ref where no ceiling exists [m]
constexpr double kMaxDuration = 1e4;
constexpr double kYawSpeedFloor = 0.05;
constexpr double kColocated = 1e-6;

}  // namespace

Eigen::Vector3d TrajectoryPiece::eval(double t, int order) const { return coeffs.transpose() * basis(t, order); }

Trajectory::Trajectory(std::vector<TrajectoryPiece> pieces) : pieces_(std::move(pieces)) {
  starts_.reserve(pieces_.size());
  for (const auto& p : pieces_) {
    starts_.push_back(total_);
    total_ += p.duration;
  }
}

std::pair<std::size_t, double> Trajectory::locate(double t) const {
  if (pieces_.empty()) return {0, 0.0};
  t = std::clamp(t, 0.0, total_);
  auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
  std::size_t i = static_cast<std::size_t>(std::distance(starts_.begin(), it)) - 1;
  return {i, std::min(t - starts_[i], pieces_[i].duration)};
}

Eigen::Vector3d Trajectory::eval(double t, int order) const {
  const auto [i, local] = locate(t);
  return pieces_[i].eval(local, order);
}

double Trajectory::jerk_cost() const {
  double j = 0.0;
  for (const auto& p : pieces_) j += (p.coeffs.transpose() * jerk_gram(p.duration) * p.coeffs).trace();
  return j;
}

double Trajectory::continuity_residual(int order) const {
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < pieces_.size(); ++i)
    worst = std::max(worst, (pieces_[i].eval(pieces_[i].duration, order) - pieces_[i + 1].eval(0.0, order))
                                .lpNorm<Eigen::Infinity>());
  return worst;
}

void OptConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidArgument(fmt::format("invalid trajectory configuration: {}", what));
  };
  require(w_z >= 0.0 && w_T >= 0.0 && w_height >= 0.0 && w_safety >= 0.0 && w_kinematic >= 0.0, "weights >= 0");
  require(v_max > 0.0 && a_max > 0.0 && yaw_rate_max > 0.0, "kinematic limits > 0");
  require(d_min > 0.0 && d_min <= d_ref, "0 < d_min <= d_ref");
  require(c_safe > 0.0 && c_barrier > 0.0, "c_safe, c_barrier > 0");
  require(ceiling_inflation >= 0.0 && height_margin >= 0.0 && cost_margin >= 0.0,
          "ceiling_inflation, height_margin, cost_margin >= 0");
  require(samples_per_piece >= 1 && max_iterations >= 0 && penalty_rounds >= 1,
          "samples_per_piece >= 1, max_iterations >= 0, penalty_rounds >= 1");
  require(piece_length > 0.0 && min_piece_length > 0.0 && min_pieces >= 1 && min_duration > 0.0,
          "initialization parameters");
  require(height_tolerance >= 0.0 && cost_tolerance >= 0.0 && kinematic_tolerance >= 0.0, "tolerances >= 0");
}

bool Violations::within(const OptConfig& cfg) const {
  return invalid_samples == 0 && below_ground_band <= cfg.height_tolerance && above_ceiling <= cfg.height_tolerance &&
         cost <= cfg.cost_tolerance && velocity <= cfg.kinematic_tolerance * cfg.v_max &&
         acceleration <= cfg.kinematic_tolerance * cfg.a_max && yaw_rate <= cfg.kinematic_tolerance * cfg.yaw_rate_max;
}

std::optional<BilinearSample> query_elevation_bilinear(const Layer& layer, double x, double y) {
  const auto& g = layer.grid();
  const double u = (x - g.origin_x) / g.resolution;
  const double v = (y - g.origin_y) / g.resolution;
  if (!std::isfinite(u) || !std::isfinite(v)) return std::nullopt;
  auto j0 = static_cast<std::int64_t>(std::floor(u));
  auto i0 = static_cast<std::int64_t>(std::floor(v));
  // A query exactly on the last row/column uses the cell pair below it.
  if (j0 == static_cast<std::int64_t>(g.cols) - 1 && u == static_cast<double>(j0)) --j0;
  if (i0 == static_cast<std::int64_t>(g.rows) - 1 && v == static_cast<double>(i0)) --i0;
  if (!g.contains(i0, j0) || !g.contains(i0 + 1, j0 + 1)) return std::nullopt;
  const double fx = u - static_cast<double>(j0), fy = v - static_cast<double>(i0);
  const auto i = static_cast<std::size_t>(i0), j = static_cast<std::size_t>(j0);
  const float c00 = layer(i, j), c01 = layer(i, j + 1), c10 = layer(i + 1, j), c11 = layer(i + 1, j + 1);
  if (!is_valid(c00) || !is_valid(c01) || !is_valid(c10) || !is_valid(c11)) return std::nullopt;
  const double v00 = c00, v01 = c01, v10 = c10, v11 = c11;
  BilinearSample s;
  s.value = (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v01 + (1 - fx) * fy * v10 + fx * fy * v11;
  s.dx = ((1 - fy) * (v01 - v00) + fy * (v11 - v10)) / g.resolution;
  s.dy = ((1 - fx) * (v10 - v00) + fx * (v11 - v01)) / g.resolution;
  return s;
}

BoundaryState rest_state(const Waypoint& w, double d_ref) {
  BoundaryState s;
  s.p = Eigen::Vector3d(w.x, w.y, w.z + d_ref);
  return s;
}

Trajectory solve_min_jerk(const BoundaryState& start, const BoundaryState& goal,
                          const std::vector<Eigen::Vector3d>& waypoints, const std::vector<double>& durations) {
  if (durations.empty() || waypoints.size() + 1 != durations.size())
    throw InvalidArgument("need one more duration than interior waypoints");
  for (double t : durations)
    if (!(t > 0.0) || !std::isfinite(t)) throw InvalidArgument("piece durations must be positive");
  SplineSystem sys;
  assemble_and_solve(start, goal, waypoints, durations, sys);
  if (!sys.ok) throw Error("minimum-jerk system is singular");
  return to_trajectory(sys.coeffs, durations);
}

// ---------------------------------------------------------------------------

TrajectoryProblem::TrajectoryProblem(const Tomogram& tomogram, const PathResult& path, const BoundaryState& start,
                                     const BoundaryState& goal, const OptConfig& config)
    : tomogram_(&tomogram), path_(path), start_(start), goal_(goal), cfg_(config) {
  cfg_.validate();
  if (!tomogram.evaluated()) throw InvalidArgument("trajectory optimization requires an evaluated tomogram");
  const auto& wps = path_.waypoints;
  if (wps.empty()) throw DegeneratePathError("path has no waypoints");

  std::vector<double> arc(wps.size(), 0.0);
  for (std::size_t n = 1; n < wps.size(); ++n)
    arc[n] = arc[n - 1] + std::sqrt(std::pow(wps[n].x - wps[n - 1].x, 2) + std::pow(wps[n].y - wps[n - 1].y, 2) +
                                    std::pow(wps[n].z - wps[n - 1].z, 2));
  const double length = arc.back();
  if (!(length > 1e-9)) throw DegeneratePathError("path has zero length");

  // Ceilings shrunk by a min-filter. Open sky reads as a fixed clearance above
  // the local ground so the bound stays well scaled next to overhangs.
  const auto& grid = tomogram.grid;
  const int radius = static_cast<int>(std::floor(cfg_.ceiling_inflation / grid.resolution + 1e-9));
  for (const auto& slice : tomogram.slices) {
    const Layer& ceil = slice.ceiling;
    Layer out(grid);
    for (std::size_t i = 0; i < grid.rows; ++i)
      for (std::size_t j = 0; j < grid.cols; ++j) {
        const float g = slice.ground(i, j);
        float lowest = static_cast<float>((is_valid(g) ? static_cast<double>(g) : slice.plane_height) + cfg_.d_ref +
                                          kOpenSkyClearance);
        for (int di = -radius; di <= radius; ++di)
          for (int dj = -radius; dj <= radius; ++dj) {
            if (di * di + dj * dj > radius * radius) continue;
            const auto a = static_cast<std::int64_t>(i) + di, b = static_cast<std::int64_t>(j) + dj;
            if (!grid.contains(a, b)) continue;
            const float c = ceil(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
            if (is_valid(c)) lowest = std::min(lowest, c);
          }
        out(i, j) = lowest;
      }
    ceilings_.push_back(std::move(out));
  }

  // Arc-length decimation of the path into piece endpoints.
  auto at_arc = [&](double s) {
    auto it = std::upper_bound(arc.begin(), arc.end(), s);
    std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(std::distance(arc.begin(), it)), wps.size() - 1);
    std::size_t lo = hi == 0 ? 0 : hi - 1;
    const double span = arc[hi] - arc[lo];
    const double f = span > 0.0 ? std::clamp((s - arc[lo]) / span, 0.0, 1.0) : 0.0;
    return Eigen::Vector3d(wps[lo].x + f * (wps[hi].x - wps[lo].x), wps[lo].y + f * (wps[hi].y - wps[lo].y),
                           wps[lo].z + f * (wps[hi].z - wps[lo].z) + cfg_.d_ref);
  };
  const auto uniform = static_cast<std::size_t>(
      std::max<double>(cfg_.min_pieces, std::ceil(length / cfg_.piece_length - 1e-9)));
  std::vector<double> knots;
  for (std::size_t i = 0; i <= uniform; ++i) knots.push_back(length * static_cast<double>(i) / static_cast<double>(uniform));

  std::vector<Eigen::Vector3d> ends;
  auto place = [&] {
    pieces_ = knots.size() - 1;
    ends.assign({start_.p});
    for (std::size_t i = 1; i < pieces_; ++i) ends.push_back(at_arc(knots[i]));
    ends.push_back(goal_.p);
    fixed_durations_.clear();
    for (std::size_t i = 0; i < pieces_; ++i)
      fixed_durations_.push_back(std::max(cfg_.min_duration, (ends[i + 1] - ends[i]).norm() / (0.5 * cfg_.v_max)));
  };
  // A piece whose initial spline leaves the safe corridor is halved until it
  // stays inside or reaches min_piece_length.
  auto leaves_corridor = [&](const TrajectoryPiece& piece) {
    for (int n = 0; n <= cfg_.samples_per_piece; ++n) {
      const Eigen::Vector3d q = piece.eval(piece.duration * n / cfg_.samples_per_piece);
      const auto env = environment(q);
      if (!env.valid || env.cost.value > cfg_.c_safe - cfg_.cost_margin ||
          q.z() < env.ground.value + cfg_.d_min || q.z() > env.ceiling.value)
        return true;
    }
    return false;
  };
  for (place();; place()) {
    const auto traj = solve_min_jerk(start_, goal_, {ends.begin() + 1, ends.end() - 1}, fixed_durations_);
    std::vector<double> refined{knots.front()};
    for (std::size_t i = 0; i < pieces_; ++i) {
      if (knots[i + 1] - knots[i] >= 2.0 * cfg_.min_piece_length && leaves_corridor(traj.pieces()[i]))
        refined.push_back(0.5 * (knots[i] + knots[i + 1]));
      refined.push_back(knots[i + 1]);
    }
    if (refined.size() == knots.size()) break;
    knots = std::move(refined);
  }

  x0_.resize(static_cast<Eigen::Index>(num_variables()));
  for (std::size_t i = 1; i < pieces_; ++i) x0_.segment<3>(static_cast<Eigen::Index>(3 * (i - 1))) = ends[i];
  if (!cfg_.fix_durations)
    for (std::size_t i = 0; i < pieces_; ++i)
      x0_[static_cast<Eigen::Index>(3 * (pieces_ - 1) + i)] = std::log(fixed_durations_[i]);
}

std::size_t TrajectoryProblem::num_variables() const {
  return 3 * (pieces_ - 1) + (cfg_.fix_durations ? 0 : pieces_);
}

TrajectoryProblem::Unpacked TrajectoryProblem::unpack(const Eigen::VectorXd& x) const {
  Unpacked u;
  for (std::size_t i = 1; i < pieces_; ++i) u.waypoints.push_back(x.segment<3>(static_cast<Eigen::Index>(3 * (i - 1))));
  if (cfg_.fix_durations) {
    u.durations = fixed_durations_;
  } else {
    for (std::size_t i = 0; i < pieces_; ++i)
      u.durations.push_back(std::exp(x[static_cast<Eigen::Index>(3 * (pieces_ - 1) + i)]));
  }
  return u;
}

const Layer& TrajectoryProblem::inflated_ceiling(std::size_t slice) const { return ceilings_[slice]; }

std::optional<std::size_t> TrajectoryProblem::select_slice(const Eigen::Vector3d& p) const {
  const auto& grid = tomogram_->grid;
  const auto cell = grid.nearest(p.x(), p.y());
  if (!grid.contains(cell.i, cell.j)) return std::nullopt;
  const auto i = static_cast<std::size_t>(cell.i), j = static_cast<std::size_t>(cell.j);
  const double target = p.z() - cfg_.d_ref;
  // Closest ground, cheapest among co-located ties. A traversable cell wins
  // over a closer barrier within one slice interval, which picks the right
  // tread where a cell straddles a step edge.
  std::optional<std::size_t> closest, open;
  double closest_dz = 0.0, open_dz = 0.0;
  auto better = [&](std::optional<std::size_t>& pick, double& pick_dz, std::size_t s, double dz) {
    const auto cost = [&](std::size_t k) { return (*tomogram_->slices[k].cost)(i, j); };
    if (!pick || dz < pick_dz - kColocated || (dz <= pick_dz + kColocated && cost(s) < cost(*pick)))
      pick = s, pick_dz = dz;
  };
  for (std::size_t s = 0; s < tomogram_->slices.size(); ++s) {
    const auto& slice = tomogram_->slices[s];
    const float g = slice.ground(i, j);
    if (!is_valid(g)) continue;
    const double dz = std::abs(g - target);
    better(closest, closest_dz, s, dz);
    if ((*slice.cost)(i, j) < cfg_.c_barrier) better(open, open_dz, s, dz);
  }
  if (open && open_dz <= closest_dz + tomogram_->slice_interval) return open;
  return closest;
}

Environment TrajectoryProblem::environment(const Eigen::Vector3d& p) const {
  Environment env;
  const auto slice_index = select_slice(p);
  if (!slice_index) return env;
  env.slice = *slice_index;
  const auto& slice = tomogram_->slices[env.slice];
  // Edge cells cover half a cell past their centres; there the lookup holds
  // the edge value.
  const auto& grid = tomogram_->grid;
  const double x = std::clamp(p.x(), grid.origin_x, grid.cell_x(grid.cols - 1));
  const double y = std::clamp(p.y(), grid.origin_y, grid.cell_y(grid.rows - 1));
  auto g = query_elevation_bilinear(slice.ground, x, y);
  auto c = query_elevation_bilinear(*slice.cost, x, y);
  auto h = query_elevation_bilinear(inflated_ceiling(env.slice), x, y);
  if (!g || !c || !h) return env;
  if (x != p.x()) g->dx = c->dx = h->dx = 0.0;
  if (y != p.y()) g->dy = c->dy = h->dy = 0.0;
  env.valid = true;
  env.ground = *g;
  env.cost = *c;
  env.ceiling = *h;
  return env;
}

double TrajectoryProblem::evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
  const auto inf = std::numeric_limits<double>::infinity();
  if (static_cast<std::size_t>(x.size()) != num_variables()) throw InvalidArgument("decision vector size mismatch");
  if (!x.allFinite()) return inf;
  const Unpacked u = unpack(x);
  for (double t : u.durations)
    if (!(t >= kMinDuration && t <= kMaxDuration)) return inf;

  SplineSystem sys;
  assemble_and_solve(start_, goal_, u.waypoints, u.durations, sys);
  if (!sys.ok || !sys.coeffs.allFinite()) return inf;

  const auto m = pieces_;
  OptConfig cfg = cfg_;
  cfg.w_height *= penalty_scale_;
  cfg.w_safety *= penalty_scale_;
  cfg.w_kinematic *= penalty_scale_;
  Eigen::MatrixXd dC = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(6 * m), 3);
  std::vector<double> dT(m, 0.0);
  double total = 0.0;
  const int samples = cfg.samples_per_piece;

  for (std::size_t i = 0; i < m; ++i) {
    const Coeffs c = sys.coeffs.block<6, 3>(static_cast<Eigen::Index>(6 * i), 0);
    const double T = u.durations[i];
    auto dci = dC.block<6, 3>(static_cast<Eigen::Index>(6 * i), 0);

    const auto q = jerk_gram(T);
    total += (c.transpose() * q * c).trace() + cfg.w_T * T;
    dci += 2.0 * q * c;
    dT[i] += (c.transpose() * basis(T, 3)).squaredNorm() + cfg.w_T;

    const double step = T / samples;
    for (int s = 0; s <= samples; ++s) {
      const double alpha = static_cast<double>(s) / samples;
      const double t = alpha * T;
      const double w = (s == 0 || s == samples) ? 0.5 : 1.0;
      const Vec6 b0 = basis(t, 0), b1 = basis(t, 1), b2 = basis(t, 2), b3 = basis(t, 3);
      const Eigen::Vector3d pos = c.transpose() * b0, vel = c.transpose() * b1, acc = c.transpose() * b2,
                            jerk = c.transpose() * b3;
      double pen = 0.0;
      Eigen::Vector3d gp = Eigen::Vector3d::Zero(), gv = Eigen::Vector3d::Zero(), ga = Eigen::Vector3d::Zero();

      const Environment env = environment(pos);
      if (!env.valid) {
        pen += cfg.w_safety * cube(std::max(0.0, cfg.c_barrier - cfg.c_safe + cfg.cost_margin));
      } else {
        const Eigen::Vector3d grad_ground(env.ground.dx, env.ground.dy, 0.0);
        // Body height tracking.
        const double dev = pos.z() - env.ground.value - cfg.d_ref;
        pen += cfg.w_z * dev * dev;
        gp += 2.0 * cfg.w_z * dev * (Eigen::Vector3d::UnitZ() - grad_ground);
        // Height band.
        const double low = env.ground.value + cfg.d_min + cfg.height_margin - pos.z();
        if (low > 0.0) {
          pen += cfg.w_height * cube(low);
          gp += 3.0 * cfg.w_height * low * low * (grad_ground - Eigen::Vector3d::UnitZ());
        }
        const double high = pos.z() - env.ceiling.value + cfg.height_margin;
        if (high > 0.0) {
          pen += cfg.w_height * cube(high);
          gp += 3.0 * cfg.w_height * high * high *
                (Eigen::Vector3d::UnitZ() - Eigen::Vector3d(env.ceiling.dx, env.ceiling.dy, 0.0));
        }
        // Travel cost.
        const double over = env.cost.value - (cfg.c_safe - cfg.cost_margin);
        if (over > 0.0) {
          pen += cfg.w_safety * cube(over);
          gp += 3.0 * cfg.w_safety * over * over * Eigen::Vector3d(env.cost.dx, env.cost.dy, 0.0);
        }
      }
      // Kinematic limits.
      const double sv = vel.squaredNorm() - cfg.v_max * cfg.v_max;
      if (sv > 0.0) {
        pen += cfg.w_kinematic * cube(sv);
        gv += 6.0 * cfg.w_kinematic * sv * sv * vel;
      }
      const double sa = acc.squaredNorm() - cfg.a_max * cfg.a_max;
      if (sa > 0.0) {
        pen += cfg.w_kinematic * cube(sa);
        ga += 6.0 * cfg.w_kinematic * sa * sa * acc;
      }
      const double planar = vel.x() * vel.x() + vel.y() * vel.y();
      if (planar > kYawSpeedFloor * kYawSpeedFloor) {
        const double num = vel.x() * acc.y() - vel.y() * acc.x();
        const double omega = num / planar;
        const double so = omega * omega - cfg.yaw_rate_max * cfg.yaw_rate_max;
        if (so > 0.0) {
          pen += cfg.w_kinematic * cube(so);
          const double dpdw = 6.0 * cfg.w_kinematic * so * so * omega;
          const double d2 = planar * planar;
          gv.x() += dpdw * (acc.y() * planar - num * 2.0 * vel.x()) / d2;
          gv.y() += dpdw * (-acc.x() * planar - num * 2.0 * vel.y()) / d2;
          ga.x() += dpdw * (-vel.y() / planar);
          ga.y() += dpdw * (vel.x() / planar);
        }
      }

      total += w * step * pen;
      dci += w * step * (b0 * gp.transpose() + b1 * gv.transpose() + b2 * ga.transpose());
      dT[i] += w * pen / samples + w * step * alpha * (gp.dot(vel) + gv.dot(acc) + ga.dot(jerk));
    }
  }

  if (grad != nullptr) {
    // Adjoint: dK/dB = A^-T dK/dC, and dK/dT gains -G^T (dA/dT) C.
    const Eigen::MatrixXd adj = sys.lu.transpose().solve(dC);
    grad->setZero(static_cast<Eigen::Index>(num_variables()));
    for (std::size_t i = 1; i < m; ++i)
      grad->segment<3>(static_cast<Eigen::Index>(3 * (i - 1))) =
          adj.row(static_cast<Eigen::Index>(3 + 6 * (i - 1))).transpose();
    if (!cfg.fix_durations) {
      const auto n = static_cast<Eigen::Index>(6 * m);
      for (std::size_t i = 0; i < m; ++i) {
        const Coeffs c = sys.coeffs.block<6, 3>(static_cast<Eigen::Index>(6 * i), 0);
        const double T = u.durations[i];
        double g = dT[i];
        if (i + 1 < m) {
          const auto base = static_cast<Eigen::Index>(3 + 6 * i);
          g -= adj.row(base).dot((c.transpose() * basis(T, 1)).transpose());
          for (int d = 0; d < 5; ++d)
            g -= adj.row(base + 1 + d).dot((c.transpose() * basis(T, d + 1)).transpose());
        } else {
          for (int d = 0; d < 3; ++d) g -= adj.row(n - 3 + d).dot((c.transpose() * basis(T, d + 1)).transpose());
        }
        (*grad)[static_cast<Eigen::Index>(3 * (m - 1) + i)] = g * T;
      }
    }
  }
  return total;
}

Trajectory TrajectoryProblem::trajectory(const Eigen::VectorXd& x) const {
  const Unpacked u = unpack(x);
  return solve_min_jerk(start_, goal_, u.waypoints, u.durations);
}

Violations TrajectoryProblem::violations(const Trajectory& traj, int samples_per_piece) const {
  Violations v;
  v.below_ground_band = v.above_ceiling = v.cost = v.velocity = v.acceleration = v.yaw_rate =
      -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& piece = traj.pieces()[i];
    for (int s = 0; s <= samples_per_piece; ++s) {
      const double t = piece.duration * s / samples_per_piece;
      const Eigen::Vector3d p = piece.eval(t, 0), vel = piece.eval(t, 1), acc = piece.eval(t, 2);
      const Environment env = environment(p);
      if (!env.valid) {
        ++v.invalid_samples;
      } else {
        v.below_ground_band = std::max(v.below_ground_band, env.ground.value + cfg_.d_min - p.z());
        v.above_ceiling = std::max(v.above_ceiling, p.z() - env.ceiling.value);
        v.cost = std::max(v.cost, env.cost.value - cfg_.c_safe);
      }
      v.velocity = std::max(v.velocity, vel.norm() - cfg_.v_max);
      v.acceleration = std::max(v.acceleration, acc.norm() - cfg_.a_max);
      const double planar = std::hypot(vel.x(), vel.y());
      if (planar > kYawSpeedFloor) {
        const double omega = (vel.x() * acc.y() - vel.y() * acc.x()) / (planar * planar);
        v.yaw_rate = std::max(v.yaw_rate, std::abs(omega) - cfg_.yaw_rate_max);
      }
    }
  }
  return v;
}

namespace {

class CeresObjective final : public ceres::FirstOrderFunction {
 public:
  explicit CeresObjective(const TrajectoryProblem& problem) : problem_(problem) {}
  bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
    const Eigen::Map<const Eigen::VectorXd> x(parameters, NumParameters());
    Eigen::VectorXd g;
    const double f = problem_.evaluate(x, gradient != nullptr ? &g : nullptr);
    if (!std::isfinite(f)) return false;
    *cost = f;
    if (gradient != nullptr) {
      if (!g.allFinite()) return false;
      Eigen::Map<Eigen::VectorXd>(gradient, NumParameters()) = g;
    }
    return true;
  }
  int NumParameters() const override { return static_cast<int>(problem_.num_variables()); }

 private:
  const TrajectoryProblem& problem_;
};

}  // namespace

OptimizationReport optimize_trajectory(const Tomogram& tomogram, const PathResult& path, const BoundaryState& start,
                                       const BoundaryState& goal, const OptConfig& config) {
  config.validate();
  if (path.waypoints.empty()) throw DegeneratePathError("path has no waypoints");
  if (path.length() <= 1e-9 && std::abs(path.waypoints.front().z - path.waypoints.back().z) <= 1e-9) {
    const bool at_rest = start.v.isZero() && start.a.isZero() && goal.v.isZero() && goal.a.isZero();
    if (!at_rest || start.p != goal.p) throw DegeneratePathError("zero-length path with differing boundary states");
    TrajectoryPiece piece;
    piece.coeffs.row(0) = start.p.transpose();
    piece.duration = 1.0;
    OptimizationReport report;
    report.trajectory = Trajectory({piece});
    return report;
  }

  TrajectoryProblem problem(tomogram, path, start, goal, config);
  Eigen::VectorXd x = problem.initial_guess();
  OptimizationReport report;
  report.initial_objective = problem.evaluate(x, nullptr);
  if (!std::isfinite(report.initial_objective)) throw Error("trajectory initialization is not finite");

  // Penalty continuation: while the result violates a constraint, stiffen the
  // penalties tenfold and resume from the current point.
  double scale = 1.0;
  for (int round = 0;; ++round) {
    problem.set_penalty_scale(scale);
    if (problem.num_variables() > 0 && config.max_iterations > 0) {
      ceres::GradientProblemSolver::Options options;
      options.line_search_direction_type = ceres::LBFGS;
      options.line_search_type = ceres::WOLFE;
      options.max_num_iterations = config.max_iterations;
      options.gradient_tolerance = config.gradient_tolerance;
      options.function_tolerance = 1e-12;
      options.parameter_tolerance = 1e-12;
      options.logging_type = ceres::SILENT;
      ceres::GradientProblem ceres_problem(new CeresObjective(problem));
      ceres::GradientProblemSolver::Summary summary;
      const double before = problem.evaluate(x, nullptr);
      Eigen::VectorXd trial = x;
      ceres::Solve(options, ceres_problem, trial.data(), &summary);
      report.iterations += static_cast<int>(summary.iterations.size());
      const double f = problem.evaluate(trial, nullptr);
      if (std::isfinite(f) && f <= before) x = trial;
    }
    report.violations = problem.violations(problem.trajectory(x));
    if (report.violations.within(config) || round + 1 >= config.penalty_rounds || problem.num_variables() == 0) break;
    scale *= 10.0;
  }
  problem.set_penalty_scale(1.0);
  report.final_objective = problem.evaluate(x, nullptr);
  report.trajectory = problem.trajectory(x);
  if (!report.violations.within(config)) {
    const auto& v = report.violations;
    throw InfeasibleTrajectoryError(
        fmt::format("trajectory constraints violated after optimization (band low {:.4g} m, ceiling {:.4g} m, cost "
                    "{:.4g}, speed {:.4g}, accel {:.4g}, yaw {:.4g}, invalid samples {})",
                    v.below_ground_band, v.above_ceiling, v.cost, v.velocity, v.acceleration, v.yaw_rate,
                    v.invalid_samples),
        std::move(report));
  }
  return report;
}

std::vector<TrajectorySample> sample_trajectory(const Trajectory& trajectory, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("sample step must be positive");
  const double total = trajectory.duration();
  std::vector<TrajectorySample> out;
  auto push = [&](double t) {
    out.push_back({t, trajectory.eval(t, 0), trajectory.eval(t, 1), trajectory.eval(t, 2)});
  };
  const double ratio = total / dt;
  const double whole = std::round(ratio);
  const bool integral = std::abs(ratio - whole) <= 1e-9 * std::max(1.0, ratio);
  const auto n = static_cast<std::size_t>(integral ? whole : std::floor(ratio));
  for (std::size_t k = 0; k < n; ++k) push(static_cast<double>(k) * dt);
  if (!integral) push(static_cast<double>(n) * dt);
  push(total);
  return out;
}

}  // namespace tomo
