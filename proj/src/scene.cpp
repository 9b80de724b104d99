#include "tomo/scene.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "tomo/errors.hpp"

namespace tomo {

SceneKind parse_scene_kind(std::string_view name) {
  if (name == "flat_plane") return SceneKind::flat_plane;
  if (name == "spiral_stair") return SceneKind::spiral_stair;
  if (name == "two_floor_building") return SceneKind::two_floor_building;
  if (name == "ramp_over_tunnel") return SceneKind::ramp_over_tunnel;
  if (name == "random_multilayer") return SceneKind::random_multilayer;
  throw InvalidArgument(fmt::format("unknown scene kind '{}'", name));
}

std::string_view to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::flat_plane: return "flat_plane";
    case SceneKind::spiral_stair: return "spiral_stair";
    case SceneKind::two_floor_building: return "two_floor_building";
    case SceneKind::ramp_over_tunnel: return "ramp_over_tunnel";
    case SceneKind::random_multilayer: return "random_multilayer";
  }
  return "?";
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// splitmix64: fixed, platform-independent stream (std distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

// Out of line: GCC 11 at -O3 -fPIC drops this round-trip when SLP-vectorizing the callers.
[[gnu::noinline]] double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

class Sampler {
 public:
  Sampler(const SceneSpec& spec)
      : spacing_(1.0 / std::sqrt(spec.density)), noise_(spec.noise), rng_(spec.seed) {}

  double spacing() const { return spacing_; }

  void add(double x, double y, double z) {
    const double dz = noise_ > 0.0 ? rng_.uniform(-noise_, noise_) : 0.0;
    points_.push_back({to_f32(x), to_f32(y), to_f32(z + dz)});
  }

  // Lattice over [x0,x1]x[y0,y1]; height(x,y) gives the surface.
  template <class Height>
  void rect(double x0, double y0, double x1, double y1, Height&& height) {
    const auto nx = static_cast<long>(std::lround((x1 - x0) / spacing_));
    const auto ny = static_cast<long>(std::lround((y1 - y0) / spacing_));
    const double sx = (x1 - x0) / static_cast<double>(std::max(1L, nx));
    const double sy = (y1 - y0) / static_cast<double>(std::max(1L, ny));
    for (long iy = 0; iy < ny; ++iy) {
      for (long ix = 0; ix < nx; ++ix) {
        const double x = x0 + (static_cast<double>(ix) + 0.5 + jitter()) * sx;
        const double y = y0 + (static_cast<double>(iy) + 0.5 + jitter()) * sy;
        add(x, y, height(x, y));
      }
    }
  }

  void flat(double x0, double y0, double x1, double y1, double z) {
    rect(x0, y0, x1, y1, [z](double, double) { return z; });
  }

  // Vertical wall segment sampled in (along, z).
  void wall(double xa, double ya, double xb, double yb, double z0, double z1) {
    const double len = std::hypot(xb - xa, yb - ya);
    const auto n = std::max(1L, static_cast<long>(std::lround(len / spacing_)));
    const auto nz = std::max(1L, static_cast<long>(std::lround((z1 - z0) / spacing_)));
    for (long k = 0; k <= nz; ++k) {
      const double z = z0 + (z1 - z0) * static_cast<double>(k) / static_cast<double>(nz);
      for (long i = 0; i < n; ++i) {
        const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        add(xa + t * (xb - xa), ya + t * (yb - ya), z);
      }
    }
  }

  void box_walls(double x0, double y0, double x1, double y1, double z0, double z1) {
    wall(x0, y0, x1, y0, z0, z1);
    wall(x1, y0, x1, y1, z0, z1);
    wall(x1, y1, x0, y1, z0, z1);
    wall(x0, y1, x0, y0, z0, z1);
  }

  Rng& rng() { return rng_; }
  std::vector<Point3> take() && { return std::move(points_); }

 private:
  double jitter() { return rng_.uniform(-0.25, 0.25); }

  double spacing_;
  double noise_;
  Rng rng_;
  std::vector<Point3> points_;
};

double stair_profile(double rise, double step) {
  if (step <= 0.0) return rise;
  return std::floor(rise / step + 1e-9) * step;
}

void gen_spiral(const SceneSpec& spec, Sampler& s) {
  const auto geo = spiral_geometry(spec);
  const double r_in = spec.inner_radius;
  const double r_out = geo.outer_radius;
  const double total_angle = kTwoPi * spec.turns;
  const double top = spec.turns * spec.rise_per_turn;

  // Base floor around the stair foot and a landing at the top.
  s.flat(0.0, 0.0, spec.length, spec.width, 0.0);
  // Polar lattice on the annulus, arc spacing ~ lattice spacing.
  const double dr = s.spacing();
  for (double r = r_in + 0.5 * dr; r < r_out; r += dr) {
    const double dth = dr / r;
    const auto n = static_cast<long>(std::ceil(total_angle / dth));
    for (long i = 0; i < n; ++i) {
      const double th = (static_cast<double>(i) + 0.5) * total_angle / static_cast<double>(n);
      const double z = stair_profile(th / kTwoPi * spec.rise_per_turn, spec.step_height);
      s.add(geo.cx + r * std::cos(th), geo.cy + r * std::sin(th), z);
    }
  }
  // Central column up to the top.
  if (r_in > 2.0 * dr) {
    const double rc = 0.5 * r_in;
    const auto n = std::max(8L, static_cast<long>(std::ceil(kTwoPi * rc / dr)));
    for (double z = 0.0; z <= top + 1.0; z += dr)
      for (long i = 0; i < n; ++i) {
        const double th = kTwoPi * static_cast<double>(i) / static_cast<double>(n);
        s.add(geo.cx + rc * std::cos(th), geo.cy + rc * std::sin(th), z);
      }
  }
}

void gen_two_floor(const SceneSpec& spec, Sampler& s) {
  const double L = spec.length, W = spec.width, H = spec.height;
  const double step = 0.15, tread = 0.3;
  const double run = H / step * tread;
  const double x_upper = std::min(L, 2.0 + run);
  s.flat(0.0, 0.0, L, W, 0.0);
  // Stairs along the y=0 edge, 1.5 m wide, reaching the upper floor.
  s.rect(2.0, 0.0, x_upper, std::min(1.5, W),
         [&](double x, double) { return std::min(H, std::floor((x - 2.0) / tread + 1e-9) * step + step); });
  // Upper floor slab with its underside.
  s.flat(x_upper, 0.0, L, W, H);
  s.flat(x_upper, std::min(1.5, W), L, W, H - 0.2);
  // Outer walls.
  s.box_walls(0.0, 0.0, L, W, 0.0, H + 1.0);
}

void gen_ramp_over_tunnel(const SceneSpec& spec, Sampler& s) {
  const double W = spec.width, H = spec.height;
  const double slope = 0.25;
  const double run = H / slope;
  // The floor grows to hold both ramps, the deck and 2 m of approach.
  const double L = std::max(spec.length, 2.0 * run + 6.0);
  const double deck = std::max(2.0, L - 2.0 * run - 4.0);
  const double x0 = 0.5 * (L - 2.0 * run - deck);
  const double y0 = 0.5 * W - 1.0, y1 = 0.5 * W + 1.0;
  auto road = [&](double x, double) {
    if (x < x0 + run) return (x - x0) * slope;
    if (x < x0 + run + deck) return H;
    return H - (x - x0 - run - deck) * slope;
  };
  s.flat(0.0, 0.0, L, W, 0.0);
  s.rect(x0, y0, x0 + 2.0 * run + deck, y1, road);
  // Deck underside forms the tunnel ceiling.
  s.flat(x0 + run, y0, x0 + run + deck, y1, H - 0.3);
}

void gen_random_multilayer(const SceneSpec& spec, Sampler& s) {
  const double L = spec.length, W = spec.width;
  auto& rng = s.rng();
  s.flat(0.0, 0.0, L, W, 0.0);
  const int platforms = 1 + static_cast<int>(rng.next() % 3);
  for (int p = 0; p < platforms; ++p) {
    const double w = rng.uniform(1.5, 0.4 * L), d = rng.uniform(1.5, 0.4 * W);
    const double x0 = rng.uniform(0.0, L - w), y0 = rng.uniform(0.0, W - d);
    const double z = rng.uniform(0.9, std::max(1.0, spec.height));
    s.flat(x0, y0, x0 + w, y0 + d, z);
    s.flat(x0, y0, x0 + w, y0 + d, z - 0.1);
    // Stairs down to the floor from the -x or +x side when there is room.
    const double step = 0.15, tread = 0.3;
    const double run = std::ceil(z / step) * tread;
    const double sw = std::min(d, 1.2);
    if (x0 - run >= 0.0) {
      s.rect(x0 - run, y0, x0, y0 + sw, [&](double x, double) {
        return std::min(z, std::floor((x - (x0 - run)) / tread + 1e-9) * step + step);
      });
    } else if (x0 + w + run <= L) {
      s.rect(x0 + w, y0, x0 + w + run, y0 + sw, [&](double x, double) {
        return std::min(z, std::floor((x0 + w + run - x) / tread + 1e-9) * step + step);
      });
    }
  }
  // Low overhangs: slabs with clearance near the robot's height band.
  const int overhangs = static_cast<int>(rng.next() % 3);
  for (int o = 0; o < overhangs; ++o) {
    const double w = rng.uniform(0.6, 2.0), d = rng.uniform(0.6, 2.0);
    const double x0 = rng.uniform(0.0, L - w), y0 = rng.uniform(0.0, W - d);
    s.flat(x0, y0, x0 + w, y0 + d, rng.uniform(0.4, 0.8));
  }
  // Pillars.
  const int pillars = static_cast<int>(rng.next() % 4);
  for (int q = 0; q < pillars; ++q) {
    const double a = rng.uniform(0.2, 0.6);
    const double x0 = rng.uniform(0.0, L - a), y0 = rng.uniform(0.0, W - a);
    s.box_walls(x0, y0, x0 + a, y0 + a, 0.0, rng.uniform(1.0, std::max(1.1, spec.height + 0.5)));
  }
}

}  // namespace

SpiralGeometry spiral_geometry(const SceneSpec& spec) {
  return {0.5 * spec.length, 0.5 * spec.width, 0.5 * std::min(spec.length, spec.width) - 0.5};
}

std::vector<double> spiral_surface_heights(const SceneSpec& spec, double x, double y) {
  const auto geo = spiral_geometry(spec);
  const double r = std::hypot(x - geo.cx, y - geo.cy);
  std::vector<double> out;
  if (r < spec.inner_radius || r > geo.outer_radius) return out;
  double th = std::atan2(y - geo.cy, x - geo.cx);
  if (th < 0.0) th += kTwoPi;
  for (; th < kTwoPi * spec.turns; th += kTwoPi)
    out.push_back(stair_profile(th / kTwoPi * spec.rise_per_turn, spec.step_height));
  return out;
}

PointCloud generate_scene(const SceneSpec& spec) {
  if (!(spec.length > 0.0) || !(spec.width > 0.0) || !(spec.height > 0.0))
    throw InvalidArgument("scene dimensions must be positive");
  if (!(spec.density > 0.0)) throw InvalidArgument("scene density must be positive");
  if (!(spec.noise >= 0.0)) throw InvalidArgument("scene noise must be non-negative");
  Sampler s(spec);
  switch (spec.kind) {
    case SceneKind::flat_plane: s.flat(0.0, 0.0, spec.length, spec.width, 0.0); break;
    case SceneKind::spiral_stair:
      if (!(spec.turns > 0.0) || !(spec.rise_per_turn > 0.0) || !(spec.inner_radius >= 0.0) ||
          !(spec.step_height >= 0.0) || spiral_geometry(spec).outer_radius <= spec.inner_radius)
        throw InvalidArgument("invalid spiral parameters");
      gen_spiral(spec, s);
      break;
    case SceneKind::two_floor_building: gen_two_floor(spec, s); break;
    case SceneKind::ramp_over_tunnel: gen_ramp_over_tunnel(spec, s); break;
    case SceneKind::random_multilayer: gen_random_multilayer(spec, s); break;
  }
  return PointCloud(std::move(s).take());
}

}  // namespace tomo
