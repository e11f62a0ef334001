#pragma once

// Roller strokes synthesised from a sheet state: one stroke per targeted
// sector, laid along the sector's mean region orientation and run from just
// behind the region out to the nearest sheet edge.

#include <algorithm>
#include <numeric>
#include <vector>

#include "drape/error.hpp"
#include "drape/geometry.hpp"
#include "drape/sheet_state.hpp"

namespace drape {

inline constexpr double kDefaultRollerHalfWidth = 15.0;

struct RefinementPaths {
  std::vector<PathGeometry> paths;
  bool fallback = false;  // no live sector: harmless edge sweeps were emitted
};

namespace detail {

inline PathGeometry center_to_nearest_edge(const SheetGeometry& geom, double half_width) {
  const NearestEdge e = nearest_edge(geom.center, geom.polygon);
  return {geom.center, e.foot, half_width};
}

}  // namespace detail

/// Sectors are ranked by severity mu_h * a * b (descending, ties by id) and
/// the top n are targeted, cycling when n exceeds the live sector count.
inline RefinementPaths generate_refinement_paths(const SheetState& state, int n, const SheetGeometry& geom,
                                                 double half_width = kDefaultRollerHalfWidth) {
  if (n < 1) throw InputError("refinement path count must be >= 1");
  std::vector<const SectorGaussians*> live;
  for (const auto& s : state.sectors)
    if (!s.is_sentinel()) live.push_back(&s);

  RefinementPaths out;
  if (live.empty()) {
    out.fallback = true;
    out.paths.assign(static_cast<std::size_t>(n), detail::center_to_nearest_edge(geom, half_width));
    return out;
  }
  auto severity = [](const SectorGaussians* s) { return s->mu1.z() * s->mu2.x() * s->mu2.y(); };
  std::stable_sort(live.begin(), live.end(), [&](const auto* l, const auto* r) {
    const double sl = severity(l), sr = severity(r);
    if (sl != sr) return sl > sr;
    return l->id < r->id;
  });

  for (int i = 0; i < n; ++i) {
    const SectorGaussians& s = *live[static_cast<std::size_t>(i) % live.size()];
    const Vec2 c{s.mu1.x(), s.mu1.y()};
    Vec2 u = unit_at(s.mu2.z());
    const auto fwd = ray_polygon_exit(c, u, geom.polygon);
    const auto back = ray_polygon_exit(c, -u, geom.polygon);
    if (!fwd && !back) {
      out.paths.push_back(detail::center_to_nearest_edge(geom, half_width));
      continue;
    }
    double reach = fwd ? *fwd : 0.0;
    if (!fwd || (back && *back < *fwd)) {
      u = -u;
      reach = *back;
    }
    const double a = s.mu2.x();
    PathGeometry p{c - a * u, c + reach * u, half_width};
    if ((p.end - p.start).norm() < 1e-9) p.end = p.start + u;  // region sits on the edge
    out.paths.push_back(p);
  }
  return out;
}

}  // namespace drape
