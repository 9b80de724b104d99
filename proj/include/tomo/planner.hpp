#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "tomo/tomogram.hpp"

namespace tomo {

struct PlannerOptions {
  double c_barrier = 50.0;
  double eps_e = 1e-6;  // co-location tolerance between adjacent slices [m]
  double d_min = 0.50;  // start/goal snap within 0.5*d_min of the ground
};

/// A canonical 3D node: the lowest slice of a run of adjacent slices that
/// share the ground elevation at (i, j).
struct NodeKey {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;
  friend bool operator==(const NodeKey&, const NodeKey&) = default;
};

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;  // ground elevation
  std::size_t k = 0;  // slice holding the node's lowest cost
  std::size_t i = 0;
  std::size_t j = 0;
  double cost_so_far = 0.0;
};

struct PathResult {
  std::vector<Waypoint> waypoints;
  double total_cost = 0.0;
  std::size_t expanded = 0;

  /// Planimetric polyline length [m].
  double length() const;
};

/// Read-only search space over an evaluated tomogram. Co-located cells of
/// adjacent slices form one node whose cost is their minimum; a node links to
/// the 8-neighbours of every slice it spans, so gateway moves are free. A move
/// within slice k needs both cells below c_barrier in slice k itself.
/// Safe to query from several threads at once.
class Planner {
 public:
  explicit Planner(const Tomogram& tomogram, PlannerOptions options = {});

  /// Throws UnsnappableError / NoPathError.
  PathResult plan(const Point3& start, const Point3& goal) const;

  /// Canonical node for a query point, if one is traversable there.
  std::optional<NodeKey> snap(const Point3& p) const;

  /// Canonical node containing slice k at (i, j); nullopt where ground is invalid.
  std::optional<NodeKey> canonical(std::size_t i, std::size_t j, std::size_t k) const;
  /// Minimum cost over the node's co-located cells.
  double node_cost(const NodeKey& key) const;
  /// Slice of the node's minimum-cost member (lowest on tie).
  std::size_t best_slice(const NodeKey& key) const;
  /// Last slice of the node's co-located run.
  std::size_t last_slice(const NodeKey& key) const;

  /// Octile planimetric distance between two cells [m].
  double heuristic(std::size_t i0, std::size_t j0, std::size_t i1, std::size_t j1) const;

  const Tomogram& tomogram() const { return *tomogram_; }
  const PlannerOptions& options() const { return options_; }

 private:
  std::size_t id(const NodeKey& key) const { return key.k * cells_ + tomogram_->grid.flat(key.i, key.j); }
  NodeKey key(std::size_t id) const;

  const Tomogram* tomogram_;
  PlannerOptions options_;
  std::size_t cells_ = 0;
  std::size_t slices_ = 0;
  std::vector<std::int32_t> head_;  // per (slice, cell): head slice of its run, -1 if ground invalid
  std::vector<std::int32_t> tail_;  // at heads: last slice of the run
  std::vector<float> cost_;         // at heads: min cost over the run
  std::vector<std::int32_t> best_;  // at heads: argmin slice
};

/// Convenience wrapper building a Planner for one query.
PathResult plan_path(const Tomogram& tomogram, const Point3& start, const Point3& goal,
                     const PlannerOptions& options = {});

/// Explicit materialization of the planner's graph, for oracle searches.
struct ReferenceGraph {
  struct Node {
    NodeKey key;
    double cost = 0.0;
    double elevation = 0.0;
  };
  struct Edge {
    std::size_t from = 0;
    std::size_t to = 0;
    double cost = 0.0;  // cost(to) + planimetric step
  };
  std::vector<Node> nodes;  // traversable canonical nodes only
  std::vector<Edge> edges;  // directed, both orientations present
  std::optional<std::size_t> find(const NodeKey& key) const;
  std::size_t undirected_edge_count() const { return edges.size() / 2; }
};

ReferenceGraph build_reference_graph(const Tomogram& tomogram, const PlannerOptions& options = {});

}  // namespace tomo
