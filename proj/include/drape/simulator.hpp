#pragma once

// Ground-truth layup process: true uncompacted regions evolve under roller
// strokes with seeded process noise, captures are rendered from them, and a
// correction controller finishes the sheet after the plan's end action.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drape/error.hpp"
#include "drape/experiment_log.hpp"
#include "drape/geometry.hpp"
#include "drape/plan.hpp"
#include "drape/refinement_paths.hpp"
#include "drape/rng.hpp"
#include "drape/sheet_state.hpp"

namespace drape {

inline constexpr int kGroundTruthVersion = 1;

struct RegionSpec {
  int count_min = 5;
  int count_max = 8;
  double a_min = 16.0, a_max = 34.0;       // major semi-axis, mm
  double aspect_min = 0.4, aspect_max = 0.9;  // b / a
  double peak_min = 1.5, peak_max = 5.0;   // mm
  double edge_margin = 25.0;               // min centroid distance to the boundary, mm
};

struct NoiseScales {
  double height_rel = 0.05;   // relative sigma on peak height per stroke
  double centroid = 1.0;      // mm
  double axis = 0.5;          // mm
  double theta = 0.03;        // rad
  double sensor = 0.05;       // mm, per capture point

  static NoiseScales none() { return {0, 0, 0, 0, 0}; }
};

struct ControllerParams {
  double height_threshold = 0.5;  // sector mean height that triggers correction, mm
  int max_cycles = 20;
};

struct GroundTruthParams {
  /// Height reduction factor r(j) for the j-th stroke (1-based); strokes
  /// beyond the list use the last entry.
  std::vector<double> reduction{0.8, 0.8 - 0.5 / 7, 0.8 - 1.0 / 7, 0.8 - 1.5 / 7,
                                0.8 - 2.0 / 7, 0.8 - 2.5 / 7, 0.8 - 3.0 / 7, 0.3};
  double edge_drift = 6.0;             // mm per stroke along the stroke direction
  double tension_length = 15.0;        // mm; strokes also flatten nearby regions, decaying with distance
  double carry_power = 4.0;            // share of the remaining stroke a region rides along: |cos|^p
  double orientation_relaxation = 0.15;  // rad per stroke toward edge-orthogonal
  double alignment_floor = 0.25;
  double extinction_height = 0.2;      // mm
  bool edge_escape = true;             // regions pushed past the boundary vent
  double roller_half_width = kDefaultRollerHalfWidth;
  double peel_disturbance = 0.05;      // relative height increase on peel
  double grid_pitch = 4.0;             // mm
  int path_count = 16;
  NoiseScales noise;
  RegionSpec regions;
  StateParams state;
  ControllerParams controller;

  double reduction_at(int j) const {
    if (reduction.empty()) return 0.0;
    const auto idx = static_cast<std::size_t>(std::clamp(j, 1, static_cast<int>(reduction.size())) - 1);
    return reduction[idx];
  }

  void validate() const {
    for (double r : reduction)
      if (!(r > 0.0 && r < 1.0)) throw InputError("reduction factors must lie in (0, 1)");
    if (edge_drift < 0 || carry_power < 0 || tension_length < 0 || orientation_relaxation < 0) throw InputError("rates must be non-negative");
    if (alignment_floor < 0 || alignment_floor > 1) throw InputError("alignment_floor must lie in [0, 1]");
    if (grid_pitch <= 0 || roller_half_width <= 0) throw InputError("grid pitch and roller width must be positive");
    if (regions.count_min < 0 || regions.count_max < regions.count_min) throw InputError("bad region count range");
    if (controller.max_cycles < 0) throw InputError("max_cycles must be >= 0");
  }
};

struct SheetSpec {
  std::string name;
  SheetGeometry geometry;
};

/// Built-in sheets: a squarish 300 x 300 mm sheet and a 400 x 250 mm one.
inline SheetSpec builtin_sheet(const std::string& name, int sector_count = 8) {
  if (name == "sheet1") return {name, {Vec2::Zero(), centered_rectangle(300.0, 300.0), sector_count}};
  if (name == "sheet2") return {name, {Vec2::Zero(), centered_rectangle(400.0, 250.0), sector_count}};
  throw InputError("unknown sheet '" + name + "' (expected sheet1 or sheet2)");
}

struct TrueRegion {
  Vec2 centroid = Vec2::Zero();
  double a = 0.0;
  double b = 0.0;
  double theta = 0.0;
  double peak = 0.0;

  friend bool operator==(const TrueRegion& l, const TrueRegion& r) {
    return l.centroid == r.centroid && l.a == r.a && l.b == r.b && l.theta == r.theta && l.peak == r.peak;
  }
};

struct SimState {
  SheetGeometry geometry;
  std::vector<TrueRegion> regions;
  int paths_executed = 0;  // cumulative stroke count j
  bool peeled = false;
  std::uint64_t seed = 0;
  Rng rng;

  double volume() const {
    double v = 0.0;
    for (const auto& r : regions) v += r.peak * r.a * r.b;
    return v;
  }
};

inline SimState init_sheet(const SheetSpec& spec, const GroundTruthParams& params, std::uint64_t seed) {
  params.validate();
  spec.geometry.validate();
  SimState sim{spec.geometry, {}, 0, false, seed, Rng(mix_seed(seed, 0))};
  const auto& rs = params.regions;
  const int count = sim.rng.uniform_int(rs.count_min, rs.count_max);
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& v : spec.geometry.polygon) {
    xmin = std::min(xmin, v.x());
    xmax = std::max(xmax, v.x());
    ymin = std::min(ymin, v.y());
    ymax = std::max(ymax, v.y());
  }
  for (int i = 0; i < count; ++i) {
    TrueRegion r;
    r.a = sim.rng.uniform(rs.a_min, rs.a_max);
    r.b = r.a * sim.rng.uniform(rs.aspect_min, rs.aspect_max);
    r.theta = sim.rng.uniform(0.0, kPi);
    r.peak = sim.rng.uniform(rs.peak_min, rs.peak_max);
    for (int attempt = 0;; ++attempt) {
      const Vec2 c{sim.rng.uniform(xmin, xmax), sim.rng.uniform(ymin, ymax)};
      if (point_in_polygon(c, spec.geometry.polygon) && nearest_edge(c, spec.geometry.polygon).distance >= rs.edge_margin) {
        r.centroid = c;
        break;
      }
      if (attempt > 10000) throw InputError("edge margin leaves no room for regions");
    }
    sim.regions.push_back(r);
  }
  return sim;
}

/// Radial stroke `index` (1-based) from the sheet center to the boundary.
/// Stroke 1 points to the top-right diagonal (45 degrees); numbering runs
/// clockwise in equal steps.
inline PathGeometry path_geometry(int index, const SheetGeometry& geom, int path_count = 16,
                                  double half_width = kDefaultRollerHalfWidth) {
  if (index < 1 || index > path_count)
    throw InputError("path index " + std::to_string(index) + " outside [1, " + std::to_string(path_count) + "]");
  const double step = 2.0 * kPi / path_count;
  const double ang = kPi / 4.0 - (index - 1) * step;
  const Vec2 dir = unit_at(ang);
  const auto t = ray_polygon_exit(geom.center, dir, geom.polygon);
  if (!t) throw InputError("sheet center is not enclosed by the polygon");
  return {geom.center, geom.center + *t * dir, half_width};
}

namespace detail {

/// Whether the region's (a, b) ellipse comes within half_width of the
/// stroke segment.
inline bool stroke_hits(const TrueRegion& r, const PathGeometry& p) {
  const Vec2 major = unit_at(r.theta);
  const Vec2 minor{-major.y(), major.x()};
  const double a = std::max(r.a, 1e-9), b = std::max(r.b, 1e-9);
  auto to_local = [&](const Vec2& q) {
    const Vec2 d = q - r.centroid;
    return Vec2{d.dot(major) / a, d.dot(minor) / b};
  };
  // Segment crosses the ellipse interior.
  if (point_segment_distance(Vec2::Zero(), to_local(p.start), to_local(p.end)) <= 1.0) return true;
  constexpr int kSamples = 64;
  for (int i = 0; i < kSamples; ++i) {
    const double t = 2.0 * kPi * i / kSamples;
    const Vec2 q = r.centroid + a * std::cos(t) * major + b * std::sin(t) * minor;
    if (point_segment_distance(q, p.start, p.end) <= p.half_width) return true;
  }
  return false;
}

/// Share of the region's width (measured across the stroke) that lies under
/// the roller strip. A stroke along the major axis of a narrow region
/// covers all of it; a crossing stroke covers a roller-wide band.
inline double covered_fraction(const TrueRegion& r, const PathGeometry& p) {
  const Vec2 dir = p.direction();
  const Vec2 normal{-dir.y(), dir.x()};
  const Vec2 major = unit_at(r.theta);
  const double s = cross2(dir, major), c = dir.dot(major);
  const double extent = std::sqrt(r.a * r.a * s * s + r.b * r.b * c * c);
  if (extent <= 1e-9) return 1.0;
  const double offset = (r.centroid - p.start).dot(normal);
  const double overlap = std::min(extent, offset + p.half_width) - std::max(-extent, offset - p.half_width);
  return std::clamp(overlap / (2.0 * extent), 0.0, 1.0);
}

inline void remove_finished(SimState& sim, const GroundTruthParams& params) {
  std::erase_if(sim.regions, [&](const TrueRegion& r) {
    if (r.peak < params.extinction_height) return true;
    return params.edge_escape && !point_in_polygon(r.centroid, sim.geometry.polygon);
  });
}

}  // namespace detail

/// One roller stroke over the true sheet. Strokes of the correction
/// controller act on an already tacked sheet and always use the final
/// reduction factor.
inline void apply_stroke(SimState& sim, const PathGeometry& stroke, const GroundTruthParams& params,
                         bool corrective = false) {
  ++sim.paths_executed;
  const double r_j = corrective ? params.reduction_at(static_cast<int>(params.reduction.size()))
                                : params.reduction_at(sim.paths_executed);
  const Vec2 dir = stroke.direction();
  const double dir_angle = std::atan2(dir.y(), dir.x());
  const auto& nz = params.noise;
  for (auto& r : sim.regions) {
    if (!detail::stroke_hits(r, stroke)) {
      // Sheet tension around the pressed strip relieves slack nearby.
      if (params.tension_length > 0.0) {
        const double gap = std::max(0.0, point_segment_distance(r.centroid, stroke.start, stroke.end) -
                                             stroke.half_width - r.b);
        r.peak *= 1.0 - r_j * std::exp(-gap / params.tension_length);
      }
      continue;
    }
    r.peak *= 1.0 - r_j * std::max(params.alignment_floor, detail::covered_fraction(r, stroke));
    // Trapped air travels ahead of the roller, at most to where the stroke
    // ends; a stroke ending on the boundary can vent the region. How far it
    // rides depends on how well the stroke follows the region's axis.
    const double ahead = std::max(0.0, (stroke.end - r.centroid).dot(dir));
    const double carry = std::pow(std::abs(std::cos(dir_angle - r.theta)), params.carry_power);
    r.centroid += std::min(ahead + 1.0, params.edge_drift + carry * ahead) * dir;

    const NearestEdge edge = nearest_edge(r.centroid, sim.geometry.polygon);
    const double target = fold_axial(std::atan2(edge.edge_direction.y(), edge.edge_direction.x()) + kPi / 2.0);
    const double turn = axial_difference(target, r.theta);
    r.theta = fold_axial(r.theta + std::clamp(turn, -params.orientation_relaxation, params.orientation_relaxation));

    r.peak = std::max(0.0, r.peak * (1.0 + sim.rng.normal(0.0, nz.height_rel)));
    r.centroid.x() += sim.rng.normal(0.0, nz.centroid);
    r.centroid.y() += sim.rng.normal(0.0, nz.centroid);
    r.a = std::max(0.0, r.a + sim.rng.normal(0.0, nz.axis));
    r.b = std::max(0.0, r.b + sim.rng.normal(0.0, nz.axis));
    r.theta = fold_axial(r.theta + sim.rng.normal(0.0, nz.theta));
    if (r.b > r.a) {
      std::swap(r.a, r.b);
      r.theta = fold_axial(r.theta + kPi / 2.0);
    }
  }
  detail::remove_finished(sim, params);
}

/// Physical effect of a plan action. Refinement actions need their strokes.
inline void apply_action(SimState& sim, const Action& action, const GroundTruthParams& params,
                         std::span<const PathGeometry> refinement_paths = {}) {
  switch (action.kind) {
    case ActionKind::path:
      apply_stroke(sim, path_geometry(action.arg, sim.geometry, params.path_count, params.roller_half_width), params);
      break;
    case ActionKind::refinement:
      if (refinement_paths.empty()) throw InputError("refinement action executed without stroke geometry");
      for (const auto& p : refinement_paths) apply_stroke(sim, p, params);
      break;
    case ActionKind::peel:
      sim.peeled = true;
      for (auto& r : sim.regions)
        r.peak = std::max(0.0, r.peak * (1.0 + params.peel_disturbance + sim.rng.normal(0.0, params.noise.height_rel)));
      break;
    case ActionKind::capture:
    case ActionKind::end:
      break;
  }
}

/// Height map on a regular grid over the sheet. Each region is a Gaussian
/// bump whose 2-sigma ellipse is (a, b, theta); sensor noise is seeded per
/// capture index.
inline CaptureFrame render_capture(const SimState& sim, int t, const GroundTruthParams& params) {
  CaptureFrame f;
  f.t = t;
  Rng noise(mix_seed(sim.seed, 1'000'000 + static_cast<std::uint64_t>(t)));
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& v : sim.geometry.polygon) {
    xmin = std::min(xmin, v.x());
    xmax = std::max(xmax, v.x());
    ymin = std::min(ymin, v.y());
    ymax = std::max(ymax, v.y());
  }
  const double pitch = params.grid_pitch;
  for (double y = ymin + pitch / 2; y < ymax; y += pitch) {
    for (double x = xmin + pitch / 2; x < xmax; x += pitch) {
      const Vec2 p{x, y};
      if (!point_in_polygon(p, sim.geometry.polygon)) continue;
      double h = 0.0;
      for (const auto& r : sim.regions) {
        const Vec2 major = unit_at(r.theta);
        const Vec2 d = p - r.centroid;
        const double u = d.dot(major) / std::max(r.a, 1e-9);
        const double v = (d.x() * -major.y() + d.y() * major.x()) / std::max(r.b, 1e-9);
        const double m2 = u * u + v * v;
        if (m2 < 40.0) h += r.peak * std::exp(-2.0 * m2);
      }
      h += noise.normal(0.0, params.noise.sensor);
      f.points.push_back({x, y, std::max(0.0, h)});
    }
  }
  return f;
}

/// Corrective stroke for an observed region: a pass over the region along
/// its major axis, spanning the fitted ellipse (at least one roller width)
/// and clipped to the sheet.
inline PathGeometry corrective_stroke(const RegionEllipse& e, const SheetGeometry& geom, double half_width) {
  const Vec2 u = unit_at(e.theta);
  const double reach = std::max(e.a, half_width);
  const double fwd = std::min(reach, ray_polygon_exit(e.centroid, u, geom.polygon).value_or(0.0));
  const double back = std::min(reach, ray_polygon_exit(e.centroid, -u, geom.polygon).value_or(0.0));
  PathGeometry p{e.centroid - back * u, e.centroid + fwd * u, half_width};
  if ((p.end - p.start).norm() < 1e-9) p.end = p.start + u;
  return p;
}

struct CorrectionResult {
  int cycles = 0;
  int paths = 0;
  bool converged = true;
  std::vector<CorrectionRecord> records;
  std::vector<CaptureFrame> captures;
};

/// Inspect-and-fix loop: capture, estimate, and stroke every observed region
/// in sectors whose mean height exceeds the threshold; stops when no sector
/// does or after max_cycles (flagged as not converged).
inline CorrectionResult run_correction(SimState& sim, const GroundTruthParams& params, int first_capture_t = 0) {
  if (!sim.peeled) throw InputError("correction requires the backing film to be peeled (plan ordering violated)");
  CorrectionResult res;
  int t = first_capture_t;
  for (;;) {
    CaptureFrame frame = render_capture(sim, t, params);
    const SheetState state = build_state(frame, sim.geometry, params.state);
    std::vector<bool> offending(static_cast<std::size_t>(sim.geometry.sector_count), false);
    bool any = false;
    for (const auto& s : state.sectors)
      if (!s.is_sentinel() && s.mu1.z() > params.controller.height_threshold) any = offending[s.id - 1] = true;
    res.captures.push_back(std::move(frame));
    if (!any) break;
    if (res.cycles >= params.controller.max_cycles) {
      res.converged = false;
      break;
    }
    CorrectionRecord rec{res.cycles + 1, t, {}};
    for (const auto& e : extract_regions(res.captures.back(), params.state))
      if (offending[assign_sector(e.centroid, sim.geometry) - 1])
        rec.paths.push_back(corrective_stroke(e, sim.geometry, params.roller_half_width));
    for (const auto& p : rec.paths) apply_stroke(sim, p, params, true);
    res.paths += static_cast<int>(rec.paths.size());
    ++res.cycles;
    res.records.push_back(std::move(rec));
    ++t;
  }
  return res;
}

using RefinementGenerator = std::function<RefinementPaths(const SheetState&, int, const SheetGeometry&, double)>;

inline RefinementGenerator default_refinement_generator() {
  return [](const SheetState& s, int n, const SheetGeometry& g, double w) { return generate_refinement_paths(s, n, g, w); };
}

/// Executes a plan on a fresh sheet, capturing before the first action and
/// after every action; the end action hands over to the correction
/// controller. The plan is validated against `constraints` first.
inline ExperimentLog run_experiment(const DrapingPlan& plan, const SheetSpec& sheet, const GroundTruthParams& params,
                                    std::uint64_t seed, const ConstraintSet& constraints = initial_plan_constraints(),
                                    const RefinementGenerator& generator = default_refinement_generator()) {
  if (auto v = validate(plan, constraints); !v.empty())
    throw InputError("plan '" + plan.name + "' violates " + v.front().constraint + ": " + v.front().message);
  for (const auto& a : plan.actions) check_action_args(a, params.path_count);

  ExperimentLog log;
  log.plan = plan;
  log.sheet = sheet.name;
  log.geometry = sheet.geometry;
  log.seed = seed;

  SimState sim = init_sheet(sheet, params, seed);
  int t = 0;
  log.captures.push_back(render_capture(sim, t, params));
  SheetState current = build_state(log.captures.back(), sim.geometry, params.state);

  for (const auto& action : plan.actions) {
    StepRecord step;
    step.action = action;
    step.capture_before = t;
    step.before = current;
    if (action.kind == ActionKind::path) {
      step.paths.push_back(path_geometry(action.arg, sim.geometry, params.path_count, params.roller_half_width));
    } else if (action.kind == ActionKind::refinement) {
      step.paths = generator(current, action.arg, sim.geometry, params.roller_half_width).paths;
    }
    apply_action(sim, action, params, step.paths);
    ++t;
    log.captures.push_back(render_capture(sim, t, params));
    current = build_state(log.captures.back(), sim.geometry, params.state);
    step.capture_after = t;
    step.after = current;
    log.steps.push_back(std::move(step));

    if (action.kind == ActionKind::end) {
      CorrectionResult corr = run_correction(sim, params, t + 1);
      log.correction_cycles += corr.cycles;
      log.correction_paths += corr.paths;
      log.converged = log.converged && corr.converged;
      for (auto& r : corr.records) log.corrections.push_back(std::move(r));
      for (auto& c : corr.captures) log.captures.push_back(std::move(c));
      t = log.captures.back().t;
      current = build_state(log.captures.back(), sim.geometry, params.state);
    }
  }
  log.plan_paths = plan.path_equivalents();
  log.total_paths = log.plan_paths + log.correction_paths;
  return log;
}

// ---------------------------------------------------------------------------
// Config file

inline nlohmann::json to_json(const GroundTruthParams& p) {
  return {{"version", kGroundTruthVersion},
          {"reduction", p.reduction},
          {"edge_drift", p.edge_drift},
          {"carry_power", p.carry_power},
          {"tension_length", p.tension_length},
          {"orientation_relaxation", p.orientation_relaxation},
          {"alignment_floor", p.alignment_floor},
          {"extinction_height", p.extinction_height},
          {"edge_escape", p.edge_escape},
          {"roller_half_width", p.roller_half_width},
          {"peel_disturbance", p.peel_disturbance},
          {"grid_pitch", p.grid_pitch},
          {"path_count", p.path_count},
          {"noise",
           {{"height_rel", p.noise.height_rel},
            {"centroid", p.noise.centroid},
            {"axis", p.noise.axis},
            {"theta", p.noise.theta},
            {"sensor", p.noise.sensor}}},
          {"regions",
           {{"count_min", p.regions.count_min},
            {"count_max", p.regions.count_max},
            {"a_min", p.regions.a_min},
            {"a_max", p.regions.a_max},
            {"aspect_min", p.regions.aspect_min},
            {"aspect_max", p.regions.aspect_max},
            {"peak_min", p.regions.peak_min},
            {"peak_max", p.regions.peak_max},
            {"edge_margin", p.regions.edge_margin}}},
          {"state", {{"h_min", p.state.h_min}, {"link_radius", p.state.link_radius}}},
          {"controller",
           {{"height_threshold", p.controller.height_threshold}, {"max_cycles", p.controller.max_cycles}}}};
}

/// Missing keys keep their defaults.
inline GroundTruthParams ground_truth_from_json(const nlohmann::json& j) {
  if (j.value("version", kGroundTruthVersion) != kGroundTruthVersion) throw InputError("unsupported ground-truth version");
  GroundTruthParams p;
  p.reduction = j.value("reduction", p.reduction);
  p.edge_drift = j.value("edge_drift", p.edge_drift);
  p.carry_power = j.value("carry_power", p.carry_power);
  p.tension_length = j.value("tension_length", p.tension_length);
  p.orientation_relaxation = j.value("orientation_relaxation", p.orientation_relaxation);
  p.alignment_floor = j.value("alignment_floor", p.alignment_floor);
  p.extinction_height = j.value("extinction_height", p.extinction_height);
  p.edge_escape = j.value("edge_escape", p.edge_escape);
  p.roller_half_width = j.value("roller_half_width", p.roller_half_width);
  p.peel_disturbance = j.value("peel_disturbance", p.peel_disturbance);
  p.grid_pitch = j.value("grid_pitch", p.grid_pitch);
  p.path_count = j.value("path_count", p.path_count);
  if (j.contains("noise")) {
    const auto& n = j["noise"];
    p.noise.height_rel = n.value("height_rel", p.noise.height_rel);
    p.noise.centroid = n.value("centroid", p.noise.centroid);
    p.noise.axis = n.value("axis", p.noise.axis);
    p.noise.theta = n.value("theta", p.noise.theta);
    p.noise.sensor = n.value("sensor", p.noise.sensor);
  }
  if (j.contains("regions")) {
    const auto& r = j["regions"];
    p.regions.count_min = r.value("count_min", p.regions.count_min);
    p.regions.count_max = r.value("count_max", p.regions.count_max);
    p.regions.a_min = r.value("a_min", p.regions.a_min);
    p.regions.a_max = r.value("a_max", p.regions.a_max);
    p.regions.aspect_min = r.value("aspect_min", p.regions.aspect_min);
    p.regions.aspect_max = r.value("aspect_max", p.regions.aspect_max);
    p.regions.peak_min = r.value("peak_min", p.regions.peak_min);
    p.regions.peak_max = r.value("peak_max", p.regions.peak_max);
    p.regions.edge_margin = r.value("edge_margin", p.regions.edge_margin);
  }
  if (j.contains("state")) {
    p.state.h_min = j["state"].value("h_min", p.state.h_min);
    p.state.link_radius = j["state"].value("link_radius", p.state.link_radius);
  }
  if (j.contains("controller")) {
    p.controller.height_threshold = j["controller"].value("height_threshold", p.controller.height_threshold);
    p.controller.max_cycles = j["controller"].value("max_cycles", p.controller.max_cycles);
  }
  p.validate();
  return p;
}

}  // namespace drape
