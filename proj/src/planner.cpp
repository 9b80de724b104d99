#include "tomo/planner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <queue>
#include <set>

#include <fmt/format.h>

#include "tomo/errors.hpp"

namespace tomo {

namespace {

constexpr std::array<std::array<int, 2>, 8> kNeighbours{
    {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}}};

void require_evaluated(const Tomogram& t) {
  if (!t.evaluated()) throw InvalidArgument("planning requires an evaluated tomogram");
}

}  // namespace

double PathResult::length() const {
  double len = 0.0;
  for (std::size_t n = 1; n < waypoints.size(); ++n)
    len += std::hypot(waypoints[n].x - waypoints[n - 1].x, waypoints[n].y - waypoints[n - 1].y);
  return len;
}

Planner::Planner(const Tomogram& tomogram, PlannerOptions options)
    : tomogram_(&tomogram), options_(options), cells_(tomogram.grid.cells()), slices_(tomogram.slices.size()) {
  require_evaluated(tomogram);
  head_.assign(slices_ * cells_, -1);
  tail_.assign(slices_ * cells_, -1);
  cost_.assign(slices_ * cells_, std::numeric_limits<float>::infinity());
  best_.assign(slices_ * cells_, -1);
  for (std::size_t n = 0; n < cells_; ++n) {
    std::int32_t head = -1;
    for (std::size_t s = 0; s < slices_; ++s) {
      const float e = tomogram.slices[s].ground.values()[n];
      const float c = tomogram.slices[s].cost->values()[n];
      if (!is_valid(e)) {
        head = -1;
        continue;
      }
      const bool joins = head >= 0 &&
                         std::abs(static_cast<double>(e) - tomogram.slices[s - 1].ground.values()[n]) <= options_.eps_e;
      if (!joins) head = static_cast<std::int32_t>(s);
      const std::size_t h = static_cast<std::size_t>(head) * cells_ + n;
      head_[s * cells_ + n] = head;
      tail_[h] = static_cast<std::int32_t>(s);
      if (c < cost_[h]) {
        cost_[h] = c;
        best_[h] = static_cast<std::int32_t>(s);
      }
    }
  }
}

NodeKey Planner::key(std::size_t id) const {
  const std::size_t k = id / cells_, n = id % cells_;
  return {n / tomogram_->grid.cols, n % tomogram_->grid.cols, k};
}

std::optional<NodeKey> Planner::canonical(std::size_t i, std::size_t j, std::size_t k) const {
  if (k >= slices_ || i >= tomogram_->grid.rows || j >= tomogram_->grid.cols) return std::nullopt;
  const auto h = head_[k * cells_ + tomogram_->grid.flat(i, j)];
  if (h < 0) return std::nullopt;
  return NodeKey{i, j, static_cast<std::size_t>(h)};
}

double Planner::node_cost(const NodeKey& key) const { return cost_[id(key)]; }
std::size_t Planner::best_slice(const NodeKey& key) const { return static_cast<std::size_t>(best_[id(key)]); }
std::size_t Planner::last_slice(const NodeKey& key) const { return static_cast<std::size_t>(tail_[id(key)]); }

double Planner::heuristic(std::size_t i0, std::size_t j0, std::size_t i1, std::size_t j1) const {
  const double di = std::abs(static_cast<double>(i0) - static_cast<double>(i1));
  const double dj = std::abs(static_cast<double>(j0) - static_cast<double>(j1));
  const double lo = std::min(di, dj), hi = std::max(di, dj);
  return tomogram_->grid.resolution * (std::numbers::sqrt2 * lo + (hi - lo));
}

std::optional<NodeKey> Planner::snap(const Point3& p) const {
  const auto& grid = tomogram_->grid;
  const CellIndex c = grid.nearest(p.x, p.y);
  if (!grid.contains(c.i, c.j)) return std::nullopt;
  const auto i = static_cast<std::size_t>(c.i), j = static_cast<std::size_t>(c.j);
  std::optional<NodeKey> best;
  double best_dz = 0.0, best_cost = 0.0;
  for (std::size_t s = 0; s < slices_; ++s) {
    const auto key = canonical(i, j, s);
    if (!key || key->k != s) continue;  // visit each run once, at its head
    const double cost = node_cost(*key);
    if (!(cost < options_.c_barrier)) continue;
    const double dz = std::abs(static_cast<double>(tomogram_->slices[s].ground(i, j)) - p.z);
    if (dz > 0.5 * options_.d_min) continue;
    if (!best || dz < best_dz || (dz == best_dz && cost < best_cost)) {
      best = key;
      best_dz = dz;
      best_cost = cost;
    }
  }
  return best;
}

PathResult Planner::plan(const Point3& start, const Point3& goal) const {
  const auto s = snap(start);
  if (!s) throw UnsnappableError("start", fmt::format("no traversable ground near ({}, {}, {})", start.x, start.y, start.z));
  const auto g = snap(goal);
  if (!g) throw UnsnappableError("goal", fmt::format("no traversable ground near ({}, {}, {})", goal.x, goal.y, goal.z));

  const auto& grid = tomogram_->grid;
  const double r = grid.resolution;
  const double diag = r * std::numbers::sqrt2;
  const auto barrier = options_.c_barrier;
  const std::size_t total = slices_ * cells_;
  const std::size_t start_id = id(*s), goal_id = id(*g);

  struct Entry {
    double f, h;
    std::uint64_t seq;
    std::size_t node;
    double g;
  };
  auto worse = [](const Entry& a, const Entry& b) {
    if (a.f != b.f) return a.f > b.f;
    if (a.h != b.h) return a.h > b.h;
    return a.seq > b.seq;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> open(worse);
  std::vector<double> dist(total, std::numeric_limits<double>::infinity());
  std::vector<std::int64_t> parent(total, -1);
  std::vector<std::uint8_t> closed(total, 0);
  std::uint64_t seq = 0;

  dist[start_id] = 0.0;
  {
    const double h = heuristic(s->i, s->j, g->i, g->j);
    open.push({h, h, seq++, start_id, 0.0});
  }
  PathResult result;
  bool found = false;
  while (!open.empty()) {
    const Entry top = open.top();
    open.pop();
    if (closed[top.node] || top.g > dist[top.node]) continue;
    closed[top.node] = 1;
    ++result.expanded;
    if (top.node == goal_id) {
      found = true;
      break;
    }
    const NodeKey u = key(top.node);
    const std::size_t last = static_cast<std::size_t>(tail_[top.node]);
    const std::size_t un = grid.flat(u.i, u.j);
    for (std::size_t slice = u.k; slice <= last; ++slice) {
      // Moves within a slice need both cells traversable in that slice.
      const auto& slice_cost = tomogram_->slices[slice].cost->values();
      if (!(slice_cost[un] < barrier)) continue;
      for (const auto& [di, dj] : kNeighbours) {
        const auto vi = static_cast<std::int64_t>(u.i) + di, vj = static_cast<std::int64_t>(u.j) + dj;
        if (!grid.contains(vi, vj)) continue;
        const std::size_t vn = grid.flat(static_cast<std::size_t>(vi), static_cast<std::size_t>(vj));
        const auto vh = head_[slice * cells_ + vn];
        if (vh < 0 || !(slice_cost[vn] < barrier)) continue;
        const std::size_t v = static_cast<std::size_t>(vh) * cells_ + vn;
        const double cv = cost_[v];
        if (!(cv < barrier) || closed[v]) continue;
        const double nd = top.g + cv + (di != 0 && dj != 0 ? diag : r);
        if (nd < dist[v]) {
          dist[v] = nd;
          parent[v] = static_cast<std::int64_t>(top.node);
          const double h = heuristic(static_cast<std::size_t>(vi), static_cast<std::size_t>(vj), g->i, g->j);
          open.push({nd + h, h, seq++, v, nd});
        }
      }
    }
  }
  if (!found)
    throw NoPathError(fmt::format("no path between ({}, {}, {}) and ({}, {}, {})", start.x, start.y, start.z, goal.x,
                                  goal.y, goal.z));

  std::vector<std::size_t> chain;
  for (auto n = static_cast<std::int64_t>(goal_id); n >= 0; n = parent[static_cast<std::size_t>(n)])
    chain.push_back(static_cast<std::size_t>(n));
  std::reverse(chain.begin(), chain.end());
  result.total_cost = dist[goal_id];
  for (const auto node : chain) {
    const NodeKey k = key(node);
    const auto best = static_cast<std::size_t>(best_[node]);
    result.waypoints.push_back({grid.cell_x(k.j), grid.cell_y(k.i),
                                static_cast<double>(tomogram_->slices[best].ground(k.i, k.j)), best, k.i, k.j,
                                dist[node]});
  }
  return result;
}

PathResult plan_path(const Tomogram& tomogram, const Point3& start, const Point3& goal,
                     const PlannerOptions& options) {
  return Planner(tomogram, options).plan(start, goal);
}

std::optional<std::size_t> ReferenceGraph::find(const NodeKey& key) const {
  for (std::size_t n = 0; n < nodes.size(); ++n)
    if (nodes[n].key == key) return n;
  return std::nullopt;
}

ReferenceGraph build_reference_graph(const Tomogram& tomogram, const PlannerOptions& options) {
  require_evaluated(tomogram);
  const auto& grid = tomogram.grid;
  const std::size_t slices = tomogram.slices.size();

  // Canonical slice for every (i, j, k) with valid ground, by walking down
  // through co-located neighbours.
  auto canonical_slice = [&](std::size_t i, std::size_t j, std::size_t k) {
    while (k > 0) {
      const float below = tomogram.slices[k - 1].ground(i, j);
      if (!is_valid(below) ||
          std::abs(static_cast<double>(tomogram.slices[k].ground(i, j)) - static_cast<double>(below)) > options.eps_e)
        break;
      --k;
    }
    return k;
  };
  auto group_cost = [&](std::size_t i, std::size_t j, std::size_t head) {
    double c = tomogram.slices[head].cost->operator()(i, j);
    for (std::size_t k = head + 1; k < slices; ++k) {
      if (!is_valid(tomogram.slices[k].ground(i, j)) || canonical_slice(i, j, k) != head) break;
      c = std::min(c, static_cast<double>(tomogram.slices[k].cost->operator()(i, j)));
    }
    return c;
  };

  ReferenceGraph graph;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::size_t> index;
  auto node_of = [&](std::size_t i, std::size_t j, std::size_t k) -> std::optional<std::size_t> {
    if (!is_valid(tomogram.slices[k].ground(i, j))) return std::nullopt;
    const std::size_t head = canonical_slice(i, j, k);
    const auto it = index.find({head, i, j});
    if (it != index.end()) return it->second;
    const double c = group_cost(i, j, head);
    if (!(c < options.c_barrier)) return std::nullopt;
    graph.nodes.push_back({NodeKey{i, j, head}, c, tomogram.slices[head].ground(i, j)});
    index.emplace(std::make_tuple(head, i, j), graph.nodes.size() - 1);
    return graph.nodes.size() - 1;
  };

  std::set<std::pair<std::size_t, std::size_t>> seen;
  const double r = grid.resolution;
  for (std::size_t k = 0; k < slices; ++k) {
    for (std::size_t i = 0; i < grid.rows; ++i) {
      for (std::size_t j = 0; j < grid.cols; ++j) {
        const auto& cost = *tomogram.slices[k].cost;
        if (!(cost(i, j) < options.c_barrier)) continue;
        const auto a = node_of(i, j, k);
        if (!a) continue;
        for (int di = -1; di <= 1; ++di) {
          for (int dj = -1; dj <= 1; ++dj) {
            if (di == 0 && dj == 0) continue;
            const auto bi = static_cast<std::int64_t>(i) + di, bj = static_cast<std::int64_t>(j) + dj;
            if (!grid.contains(bi, bj) ||
                !(cost(static_cast<std::size_t>(bi), static_cast<std::size_t>(bj)) < options.c_barrier))
              continue;
            const auto b = node_of(static_cast<std::size_t>(bi), static_cast<std::size_t>(bj), k);
            if (!b || !seen.insert({*a, *b}).second) continue;
            const double step = (di != 0 && dj != 0) ? r * std::sqrt(2.0) : r;
            graph.edges.push_back({*a, *b, graph.nodes[*b].cost + step});
          }
        }
      }
    }
  }
  return graph;
}

}  // namespace tomo
