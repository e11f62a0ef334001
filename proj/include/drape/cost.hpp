#pragma once

// Plan cost terms: per-action execution cost and the sheet-state utility.
// Both are lower-is-better and expressed in path-equivalents.

#include <algorithm>

#include <nlohmann/json.hpp>

#include "drape/plan.hpp"
#include "drape/sheet_state.hpp"

namespace drape {

struct CostWeights {
  double w_h = 1.0;            // per mm of mean sector height
  double w_area = 0.01;        // per mm^2 of a*b
  double w_sigma = 1e-4;       // per unit of covariance trace
  double w_unk = 0.5;          // per node whose action has no learned effect
  double area_unit = 1e4;      // mm^2; utility is per area_unit of sheet
  double c_path = 1.0;
  double c_refinement = 1.0;   // per generated path
  double c_peel = 0.2;
  double c_capture = 0.2;
  double c_end = 0.0;
};

inline double action_cost(const Action& a, const CostWeights& w = {}) {
  switch (a.kind) {
    case ActionKind::path: return w.c_path;
    case ActionKind::refinement: return w.c_refinement * a.arg;
    case ActionKind::peel: return w.c_peel;
    case ActionKind::capture: return w.c_capture;
    case ActionKind::end: return w.c_end;
  }
  return 0.0;
}

inline double sector_utility(const SectorGaussians& s, const CostWeights& w) {
  if (s.is_sentinel()) return 0.0;
  return w.w_h * std::max(0.0, s.mu1.z()) + w.w_area * (s.mu2.x() * s.mu2.y()) +
         w.w_sigma * (s.sigma1.trace() + s.sigma2.trace());
}

inline double state_utility(const SheetState& x, const CostWeights& w = {}) {
  double sum = 0.0;
  for (const auto& s : x.sectors) sum += sector_utility(s, w);
  return sum / (x.geometry.area() / w.area_unit);
}

inline double total_trace(const SheetState& x) {
  double t = 0.0;
  for (const auto& s : x.sectors) t += s.sigma1.trace() + s.sigma2.trace();
  return t;
}

inline nlohmann::json to_json(const CostWeights& w) {
  return {{"w_h", w.w_h},         {"w_area", w.w_area},   {"w_sigma", w.w_sigma},
          {"w_unk", w.w_unk},     {"area_unit", w.area_unit}, {"c_path", w.c_path},
          {"c_refinement", w.c_refinement}, {"c_peel", w.c_peel}, {"c_capture", w.c_capture},
          {"c_end", w.c_end}};
}

inline CostWeights cost_weights_from_json(const nlohmann::json& j) {
  CostWeights w;
  w.w_h = j.value("w_h", w.w_h);
  w.w_area = j.value("w_area", w.w_area);
  w.w_sigma = j.value("w_sigma", w.w_sigma);
  w.w_unk = j.value("w_unk", w.w_unk);
  w.area_unit = j.value("area_unit", w.area_unit);
  w.c_path = j.value("c_path", w.c_path);
  w.c_refinement = j.value("c_refinement", w.c_refinement);
  w.c_peel = j.value("c_peel", w.c_peel);
  w.c_capture = j.value("c_capture", w.c_capture);
  w.c_end = j.value("c_end", w.c_end);
  for (double v : {w.w_h, w.w_area, w.w_sigma, w.w_unk, w.c_path, w.c_refinement, w.c_peel, w.c_capture, w.c_end})
    if (v < 0.0) throw InputError("cost weights must be non-negative");
  if (!(w.area_unit > 0.0)) throw InputError("area_unit must be positive");
  return w;
}

}  // namespace drape
