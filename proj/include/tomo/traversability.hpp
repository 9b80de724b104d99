#pragma once

#include <vector>

#include "tomo/tomogram.hpp"

namespace tomo {

/// Robot-aware thresholds and weights. Defaults are the quadruped set used
/// throughout the project (d_s = 0.5 lives in the build step).
struct TravParams {
  double d_min = 0.50;  // minimum ground-ceiling clearance [m]
  double d_ref = 0.65;  // nominal body height [m]
  double theta_b = 1.70;  // barrier slope (rise/run)
  double theta_s = 0.36;  // gentle slope (rise/run)
  double theta_p = 0.20;  // min fraction of gentle cells around a step edge
  double c_barrier = 50.0;
  double alpha_d = 20.0;
  double alpha_b = 20.0;
  double alpha_s = 15.0;
  double d_inf = 0.2;  // inflation radius [m]
  double d_sm = 0.4;   // safe margin [m]
  double r_c = 0.2;    // collision radius [m]
  int step_patch_radius = 0;  // cells; 0 picks ceil(0.3 m / r_g)

  /// Throws InvalidArgument when an invariant does not hold for grid pitch r_g.
  void validate(double r_g) const;
  int patch_radius(double r_g) const;
};

/// Square odd-sided weight mask centred on (radius, radius).
struct InflationKernel {
  int radius = 0;  // side = 2*radius + 1
  std::vector<double> weights;  // row-major

  int side() const { return 2 * radius + 1; }
  double operator()(int m, int n) const { return weights[static_cast<std::size_t>(m * side() + n)]; }
};

/// Clearance cost for one cell; +inf clearance is open sky.
double interval_cost_value(double clearance, const TravParams& params);

/// Terrain cost from per-meter gradients and the fraction of gentle cells in
/// the surrounding patch (only consulted for step edges).
double terrain_cost_value(double gx, double gy, double gentle_fraction, const TravParams& params);

/// max(0, min(1 - (d - d_inf)/(d_sm - r_g), 1)).
double kernel_weight(double distance, double d_inf, double d_sm, double r_g);

Layer interval_cost(const Layer& ground, const Layer& ceiling, const TravParams& params);
Layer ground_cost(const Layer& ground, const TravParams& params, unsigned threads = 0);
Layer fuse_costs(const Layer& interval, const Layer& terrain, const TravParams& params);

/// side = 2*ceil(d_sm/r_g)+1; weights from kernel_weight, zeroed past d_sm.
InflationKernel build_kernel(double d_inf, double d_sm, double r_g);

/// Sliding-window maximum of kernel-weighted costs; cells past the border
/// contribute nothing.
Layer inflate(const Layer& cost, const InflationKernel& kernel, unsigned threads = 0);

/// Fills every slice's cost layer. Deterministic for any thread count.
Tomogram evaluate_tomogram(Tomogram tomogram, const TravParams& params, unsigned threads = 0);

}  // namespace tomo
