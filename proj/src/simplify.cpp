#include "tomo/simplify.hpp"

#include <fmt/format.h>

#include "tomo/errors.hpp"

namespace tomo {

namespace {

// Uniqueness of slice `mid` against optional neighbours; returns early when
// `first_only` is set so removal checks stay cheap.
std::vector<std::size_t> unique_against(const TomogramSlice* below, const TomogramSlice& mid,
                                        const TomogramSlice* above, const SimplifyOptions& opt, bool first_only) {
  std::vector<std::size_t> out;
  const auto& g = mid.ground.values();
  const auto& c = mid.cost->values();
  const auto barrier = static_cast<float>(opt.c_barrier);

  // True when this side does not already hold the same 3D cell at no higher cost.
  auto side_unique = [&](const TomogramSlice* other, std::size_t n, bool other_is_below) {
    if (other == nullptr) return true;
    const float ge = other->ground.values()[n];
    if (!is_valid(ge)) return true;
    const double rise = other_is_below ? static_cast<double>(g[n]) - ge : static_cast<double>(ge) - g[n];
    return rise > opt.eps_e || c[n] < other->cost->values()[n];
  };

  for (std::size_t n = 0; n < g.size(); ++n) {
    if (!is_valid(g[n]) || !(c[n] < barrier)) continue;
    if (side_unique(below, n, true) && side_unique(above, n, false)) {
      out.push_back(n);
      if (first_only) break;
    }
  }
  return out;
}

void require_costs(const Tomogram& t) {
  for (const auto& s : t.slices)
    if (!s.cost) throw InvalidArgument("tomogram slice has no cost layer; evaluate it first");
}

}  // namespace

std::vector<std::size_t> unique_cells(const Tomogram& tomogram, std::size_t k, const SimplifyOptions& options) {
  if (k >= tomogram.slices.size())
    throw InvalidArgument(fmt::format("slice index {} out of range (have {})", k, tomogram.slices.size()));
  require_costs(tomogram);
  const auto& s = tomogram.slices;
  return unique_against(k > 0 ? &s[k - 1] : nullptr, s[k], k + 1 < s.size() ? &s[k + 1] : nullptr, options, false);
}

Tomogram simplify_tomogram(Tomogram tomogram, const SimplifyOptions& options) {
  require_costs(tomogram);
  auto& slices = tomogram.slices;
  bool removed = true;
  while (removed && slices.size() > 1) {
    removed = false;
    for (std::size_t k = 0; k < slices.size();) {
      const TomogramSlice* below = k > 0 ? &slices[k - 1] : nullptr;
      const TomogramSlice* above = k + 1 < slices.size() ? &slices[k + 1] : nullptr;
      if (slices.size() > 1 && unique_against(below, slices[k], above, options, true).empty()) {
        slices.erase(slices.begin() + static_cast<std::ptrdiff_t>(k));
        removed = true;
      } else {
        ++k;
      }
    }
  }
  for (std::size_t k = 0; k < slices.size(); ++k) slices[k].index = static_cast<int>(k);
  return tomogram;
}

}  // namespace tomo
