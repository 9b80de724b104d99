#pragma once

#include <cstddef>
#include <vector>

#include "tomo/tomogram.hpp"

namespace tomo {

struct SimplifyOptions {
  double eps_e = 1e-6;     // elevation equality tolerance [m]
  double c_barrier = 50.0;
};

/// Flat indices (i*cols + j) of the traversable cells of slice k that are not
/// covered by slice k-1 or k+1 (same elevation within eps_e and no higher cost).
/// Throws InvalidArgument when a cost layer is missing or k is out of range.
std::vector<std::size_t> unique_cells(const Tomogram& tomogram, std::size_t k, const SimplifyOptions& options = {});

/// Repeated ascending sweeps that drop slices without unique cells, comparing
/// against the current surviving neighbours, until a sweep removes nothing.
/// Survivors keep their plane heights and are renumbered 0..n-1.
Tomogram simplify_tomogram(Tomogram tomogram, const SimplifyOptions& options = {});

}  // namespace tomo
