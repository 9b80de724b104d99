#include "tomo/traversability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "tomo/errors.hpp"
#include "tomo/parallel.hpp"

namespace tomo {

void TravParams::validate(double r_g) const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidArgument(fmt::format("invalid traversability parameters: {}", what));
  };
  require(d_min > 0.0 && d_min <= d_ref, "0 < d_min <= d_ref");
  require(theta_s > 0.0 && theta_s <= theta_b, "0 < theta_s <= theta_b");
  require(theta_p >= 0.0 && theta_p <= 1.0, "0 <= theta_p <= 1");
  require(c_barrier > 0.0, "c_barrier > 0");
  require(alpha_d >= 0.0 && alpha_b >= 0.0 && alpha_s >= 0.0, "scaling factors >= 0");
  require(r_g <= d_inf + 1e-6 && d_inf < d_sm, "r_g <= d_inf < d_sm");
  require(d_inf >= r_c, "d_inf >= r_c");
  require(step_patch_radius >= 0, "step_patch_radius >= 0");
}

int TravParams::patch_radius(double r_g) const {
  if (step_patch_radius > 0) return step_patch_radius;
  return std::max(1, static_cast<int>(std::ceil(0.3 / r_g - 1e-9)));
}

double interval_cost_value(double clearance, const TravParams& p) {
  if (clearance < p.d_min) return p.c_barrier;
  return std::max(0.0, p.alpha_d * (p.d_ref - clearance));
}

double terrain_cost_value(double gx, double gy, double gentle_fraction, const TravParams& p) {
  const double m_xy = std::max(std::abs(gx), std::abs(gy));
  const double m_grad = std::sqrt(gx * gx + gy * gy);
  if (m_xy > p.theta_b) return p.c_barrier;
  if (m_grad < p.theta_s) {
    const double r = m_grad / p.theta_s;
    return p.alpha_s * r * r;
  }
  if (gentle_fraction > p.theta_p) {
    const double r = m_xy / p.theta_b;
    return p.alpha_b * r * r;
  }
  return p.c_barrier;
}

double kernel_weight(double distance, double d_inf, double d_sm, double r_g) {
  return std::max(0.0, std::min(1.0 - (distance - d_inf) / (d_sm - r_g), 1.0));
}

namespace {

void require_aligned(const Layer& a, const Layer& b) {
  if (!(a.grid() == b.grid())) throw InvalidArgument("layers are not aligned");
}

}  // namespace

Layer interval_cost(const Layer& ground, const Layer& ceiling, const TravParams& params) {
  require_aligned(ground, ceiling);
  Layer out(ground.grid(), 0.0f);
  const auto& g = ground.values();
  const auto& c = ceiling.values();
  auto& o = out.values();
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (!is_valid(g[n]))
      o[n] = static_cast<float>(params.c_barrier);
    else if (!is_valid(c[n]))
      o[n] = 0.0f;
    else
      o[n] = static_cast<float>(interval_cost_value(static_cast<double>(c[n]) - static_cast<double>(g[n]), params));
  }
  return out;
}

Layer ground_cost(const Layer& ground, const TravParams& params, unsigned threads) {
  const auto& grid = ground.grid();
  const std::size_t rows = grid.rows, cols = grid.cols;
  const double r = grid.resolution;
  const auto inf = std::numeric_limits<double>::infinity();

  // Per-meter gradient along one axis; NaN when the cell has no valid neighbour on that axis.
  auto diff = [&](std::size_t i, std::size_t j, int di, int dj) {
    const double e = ground(i, j);
    const auto ia = static_cast<std::int64_t>(i) - di, ja = static_cast<std::int64_t>(j) - dj;
    const auto ib = static_cast<std::int64_t>(i) + di, jb = static_cast<std::int64_t>(j) + dj;
    const bool lo = grid.contains(ia, ja) && ground.valid(static_cast<std::size_t>(ia), static_cast<std::size_t>(ja));
    const bool hi = grid.contains(ib, jb) && ground.valid(static_cast<std::size_t>(ib), static_cast<std::size_t>(jb));
    if (lo && hi)
      return (static_cast<double>(ground(static_cast<std::size_t>(ib), static_cast<std::size_t>(jb))) -
              static_cast<double>(ground(static_cast<std::size_t>(ia), static_cast<std::size_t>(ja)))) /
             (2.0 * r);
    if (hi) return (static_cast<double>(ground(static_cast<std::size_t>(ib), static_cast<std::size_t>(jb))) - e) / r;
    if (lo) return (e - static_cast<double>(ground(static_cast<std::size_t>(ia), static_cast<std::size_t>(ja)))) / r;
    return std::numeric_limits<double>::quiet_NaN();
  };

  std::vector<double> gx(grid.cells(), inf), gy(grid.cells(), inf);
  std::vector<std::uint8_t> gentle(grid.cells(), 0);
  parallel_for(rows, threads, [&](std::size_t i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (!ground.valid(i, j)) continue;
      const std::size_t n = grid.flat(i, j);
      gx[n] = diff(i, j, 0, 1);
      gy[n] = diff(i, j, 1, 0);
      if (std::isnan(gx[n]) || std::isnan(gy[n])) continue;  // isolated
      gentle[n] = std::sqrt(gx[n] * gx[n] + gy[n] * gy[n]) < params.theta_s;
    }
  });

  // Summed-area table of gentle cells for the step-edge patch fraction.
  std::vector<std::uint32_t> sat((rows + 1) * (cols + 1), 0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      sat[(i + 1) * (cols + 1) + j + 1] = gentle[grid.flat(i, j)] + sat[i * (cols + 1) + j + 1] +
                                          sat[(i + 1) * (cols + 1) + j] - sat[i * (cols + 1) + j];
  const auto radius = static_cast<std::int64_t>(params.patch_radius(r));
  const double patch_cells = static_cast<double>((2 * radius + 1) * (2 * radius + 1));

  Layer out(grid, static_cast<float>(params.c_barrier));
  parallel_for(rows, threads, [&](std::size_t i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t n = grid.flat(i, j);
      if (!ground.valid(i, j) || std::isnan(gx[n]) || std::isnan(gy[n])) continue;
      const auto si = static_cast<std::int64_t>(i), sj = static_cast<std::int64_t>(j);
      const auto i0 = static_cast<std::size_t>(std::max<std::int64_t>(0, si - radius));
      const auto j0 = static_cast<std::size_t>(std::max<std::int64_t>(0, sj - radius));
      const auto i1 = static_cast<std::size_t>(std::min<std::int64_t>(static_cast<std::int64_t>(rows), si + radius + 1));
      const auto j1 = static_cast<std::size_t>(std::min<std::int64_t>(static_cast<std::int64_t>(cols), sj + radius + 1));
      const double count = static_cast<double>(sat[i1 * (cols + 1) + j1] - sat[i0 * (cols + 1) + j1] -
                                               sat[i1 * (cols + 1) + j0] + sat[i0 * (cols + 1) + j0]);
      out(i, j) = static_cast<float>(terrain_cost_value(gx[n], gy[n], count / patch_cells, params));
    }
  });
  return out;
}

Layer fuse_costs(const Layer& interval, const Layer& terrain, const TravParams& params) {
  require_aligned(interval, terrain);
  Layer out(interval.grid());
  const auto& a = interval.values();
  const auto& b = terrain.values();
  auto& o = out.values();
  for (std::size_t n = 0; n < a.size(); ++n) {
    if (!is_valid(a[n]) || !is_valid(b[n]))
      o[n] = static_cast<float>(params.c_barrier);
    else
      o[n] = static_cast<float>(std::min(params.c_barrier, static_cast<double>(a[n]) + static_cast<double>(b[n])));
  }
  return out;
}

InflationKernel build_kernel(double d_inf, double d_sm, double r_g) {
  if (!(r_g > 0.0) || !(r_g <= d_inf + 1e-6) || !(d_inf < d_sm))
    throw InvalidArgument("inflation kernel requires 0 < r_g <= d_inf < d_sm");
  InflationKernel k;
  k.radius = static_cast<int>(std::ceil(d_sm / r_g - 1e-9));
  const int side = k.side();
  k.weights.assign(static_cast<std::size_t>(side * side), 0.0);
  for (int m = 0; m < side; ++m) {
    for (int n = 0; n < side; ++n) {
      const double d = r_g * std::hypot(m - k.radius, n - k.radius);
      if (d > d_sm + 1e-9) continue;
      k.weights[static_cast<std::size_t>(m * side + n)] = kernel_weight(d, d_inf, d_sm, r_g);
    }
  }
  return k;
}

Layer inflate(const Layer& cost, const InflationKernel& kernel, unsigned threads) {
  struct Tap {
    int dm, dn;
    double w;
  };
  std::vector<Tap> taps;
  for (int m = 0; m < kernel.side(); ++m)
    for (int n = 0; n < kernel.side(); ++n)
      if (kernel(m, n) > 0.0) taps.push_back({m - kernel.radius, n - kernel.radius, kernel(m, n)});
  // Heaviest taps first so the scan can stop once no tap can beat the running max.
  std::stable_sort(taps.begin(), taps.end(), [](const Tap& a, const Tap& b) { return a.w > b.w; });

  const auto& grid = cost.grid();
  float peak = 0.0f;
  for (float v : cost.values())
    if (is_valid(v)) peak = std::max(peak, v);

  Layer out(grid, 0.0f);
  const auto rows = static_cast<std::int64_t>(grid.rows), cols = static_cast<std::int64_t>(grid.cols);
  parallel_for(grid.rows, threads, [&](std::size_t row) {
    const auto i = static_cast<std::int64_t>(row);
    for (std::int64_t j = 0; j < cols; ++j) {
      double best = 0.0;
      for (const auto& t : taps) {
        if (t.w * peak <= best) break;
        const auto a = i + t.dm, b = j + t.dn;
        if (a < 0 || b < 0 || a >= rows || b >= cols) continue;
        const float c = cost(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
        if (!is_valid(c)) continue;
        best = std::max(best, t.w * static_cast<double>(c));
      }
      out(row, static_cast<std::size_t>(j)) = static_cast<float>(best);
    }
  });
  return out;
}

Tomogram evaluate_tomogram(Tomogram tomogram, const TravParams& params, unsigned threads) {
  params.validate(tomogram.grid.resolution);
  const auto kernel = build_kernel(params.d_inf, params.d_sm, tomogram.grid.resolution);
  for (auto& slice : tomogram.slices) {
    const Layer c_i = interval_cost(slice.ground, slice.ceiling, params);
    const Layer c_g = ground_cost(slice.ground, params, threads);
    slice.cost = inflate(fuse_costs(c_i, c_g, params), kernel, threads);
  }
  return tomogram;
}

}  // namespace tomo
