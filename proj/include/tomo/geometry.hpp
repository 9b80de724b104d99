#pragma once

#include <algorithm>
#include <cmath>
#include <span>

namespace tomo {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
  friend bool operator==(const Point3&, const Point3&) = default;
};

struct Bounds {
  Point3 min;
  Point3 max;

  static Bounds of(std::span<const Point3> points) {
    Bounds b{points.front(), points.front()};
    for (const auto& p : points) {
      b.min.x = std::min(b.min.x, p.x);
      b.min.y = std::min(b.min.y, p.y);
      b.min.z = std::min(b.min.z, p.z);
      b.max.x = std::max(b.max.x, p.x);
      b.max.y = std::max(b.max.y, p.y);
      b.max.z = std::max(b.max.z, p.z);
    }
    return b;
  }
};

}  // namespace tomo
