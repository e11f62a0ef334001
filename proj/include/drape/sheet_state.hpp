#pragma once

// Sheet state estimation: turns height captures of the sheet into per-sector
// Gaussian summaries of the uncompacted regions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "drape/error.hpp"
#include "drape/geometry.hpp"

namespace drape {

struct SheetGeometry {
  Vec2 center = Vec2::Zero();
  std::vector<Vec2> polygon;
  int sector_count = 8;

  double area() const { return polygon_area(polygon); }

  void validate() const {
    if (sector_count < 2) throw InputError("sector_count must be >= 2");
    if (polygon.size() < 3) throw InputError("sheet polygon needs at least 3 vertices");
    if (!point_in_polygon(center, polygon)) throw InputError("sheet center lies outside its polygon");
  }
};

struct CapturePoint {
  double x = 0.0;
  double y = 0.0;
  double h = 0.0;  // height above the mold surface, mm

  Vec2 xy() const { return {x, y}; }
  friend bool operator==(const CapturePoint&, const CapturePoint&) = default;
};

struct CaptureFrame {
  int t = 0;
  std::vector<CapturePoint> points;
  friend bool operator==(const CaptureFrame&, const CaptureFrame&) = default;
};

struct RegionEllipse {
  Vec2 centroid = Vec2::Zero();
  double a = 0.0;  // major semi-axis (2 sigma)
  double b = 0.0;  // minor semi-axis (2 sigma)
  double theta = 0.0;
  double mean_height = 0.0;
};

struct SectorGaussians {
  int id = 1;
  Vec3 mu1 = Vec3::Zero();     // (x, y, h)
  Mat3 sigma1 = Mat3::Zero();
  Vec3 mu2 = Vec3::Zero();     // (a, b, theta)
  Mat3 sigma2 = Mat3::Zero();
  int sample_count = 0;        // regions summarised; 0 = compacted

  bool is_sentinel() const { return sample_count == 0; }

  static SectorGaussians sentinel(int id) {
    SectorGaussians s;
    s.id = id;
    return s;
  }

  friend bool operator==(const SectorGaussians& l, const SectorGaussians& r) {
    return l.id == r.id && l.mu1 == r.mu1 && l.sigma1 == r.sigma1 && l.mu2 == r.mu2 && l.sigma2 == r.sigma2 &&
           l.sample_count == r.sample_count;
  }
};

struct SheetState {
  SheetGeometry geometry;
  std::vector<SectorGaussians> sectors;
  int time = 0;

  int active_sector_count() const {
    return static_cast<int>(std::count_if(sectors.begin(), sectors.end(), [](const auto& s) { return !s.is_sentinel(); }));
  }
  bool fully_compacted() const { return active_sector_count() == 0; }

  static SheetState compacted(const SheetGeometry& geom, int time = 0) {
    SheetState s{geom, {}, time};
    for (int i = 1; i <= geom.sector_count; ++i) s.sectors.push_back(SectorGaussians::sentinel(i));
    return s;
  }
};

struct StateParams {
  double h_min = 0.5;        // mm
  double link_radius = 12.0; // mm
};

// ---------------------------------------------------------------------------

/// Angular wedge index in [1, k]; sector 1 starts on +x and sectors run
/// counter-clockwise. The center itself belongs to sector 1.
inline int assign_sector(const Vec2& p, const SheetGeometry& geom) {
  const Vec2 d = p - geom.center;
  if (d.x() == 0.0 && d.y() == 0.0) return 1;
  double ang = std::atan2(d.y(), d.x());
  if (ang < 0.0) ang += 2.0 * kPi;
  const double wedge = 2.0 * kPi / geom.sector_count;
  // Boundaries belong to the upper wedge; the slack absorbs trig rounding.
  int i = static_cast<int>(std::floor(ang / wedge + 1e-9)) + 1;
  if (i > geom.sector_count) i = 1;
  return std::clamp(i, 1, geom.sector_count);
}

inline std::vector<CapturePoint> filter_uncompacted(std::span<const CapturePoint> points, double h_min) {
  if (!(h_min > 0.0)) throw InputError("h_min must be positive");
  std::vector<CapturePoint> out;
  for (const auto& p : points)
    if (p.h > h_min) out.push_back(p);
  return out;
}

namespace detail {

struct DisjointSet {
  std::vector<std::size_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace detail

/// Single-linkage connected components in the xy plane. Components are ordered
/// by (min x, min y); points keep their input order inside a component.
inline std::vector<std::vector<CapturePoint>> segment_regions(std::span<const CapturePoint> points, double link_radius) {
  if (!(link_radius > 0.0)) throw InputError("link_radius must be positive");
  const std::size_t n = points.size();
  detail::DisjointSet dsu(n);

  // Bucket into cells of side link_radius; neighbours lie in the 3x3 block.
  std::map<std::pair<long long, long long>, std::vector<std::size_t>> cells;
  auto cell_of = [&](const CapturePoint& p) {
    return std::pair{static_cast<long long>(std::floor(p.x / link_radius)),
                     static_cast<long long>(std::floor(p.y / link_radius))};
  };
  for (std::size_t i = 0; i < n; ++i) cells[cell_of(points[i])].push_back(i);
  const double r2 = link_radius * link_radius;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [cx, cy] = cell_of(points[i]);
    for (long long dx = -1; dx <= 1; ++dx)
      for (long long dy = -1; dy <= 1; ++dy) {
        auto it = cells.find({cx + dx, cy + dy});
        if (it == cells.end()) continue;
        for (std::size_t j : it->second) {
          if (j <= i) continue;
          const double ddx = points[i].x - points[j].x, ddy = points[i].y - points[j].y;
          if (ddx * ddx + ddy * ddy <= r2) dsu.unite(i, j);
        }
      }
  }

  std::map<std::size_t, std::vector<CapturePoint>> by_root;
  for (std::size_t i = 0; i < n; ++i) by_root[dsu.find(i)].push_back(points[i]);
  std::vector<std::vector<CapturePoint>> groups;
  groups.reserve(by_root.size());
  for (auto& [root, g] : by_root) groups.push_back(std::move(g));

  auto key = [](const std::vector<CapturePoint>& g) {
    double mx = g.front().x, my = g.front().y;
    for (const auto& p : g) {
      mx = std::min(mx, p.x);
      my = std::min(my, p.y);
    }
    return std::pair{mx, my};
  };
  std::stable_sort(groups.begin(), groups.end(), [&](const auto& l, const auto& r) { return key(l) < key(r); });
  return groups;
}

/// Principal-axis ellipse of a point group: semi-axes are 2 sigma along the
/// eigenvectors of the xy covariance; theta is folded into [0, pi) and an
/// isotropic spread resolves to theta = 0.
inline RegionEllipse fit_ellipse(std::span<const CapturePoint> group) {
  if (group.empty()) throw InputError("fit_ellipse needs a non-empty group");
  const double n = static_cast<double>(group.size());
  double mx = 0, my = 0, mh = 0;
  for (const auto& p : group) {
    mx += p.x;
    my += p.y;
    mh += p.h;
  }
  mx /= n;
  my /= n;
  mh /= n;
  RegionEllipse e;
  e.centroid = {mx, my};
  e.mean_height = mh;
  if (group.size() == 1) return e;

  double sxx = 0, syy = 0, sxy = 0;
  for (const auto& p : group) {
    const double dx = p.x - mx, dy = p.y - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  sxx /= n;
  syy /= n;
  sxy /= n;
  const double mean = (sxx + syy) / 2.0;
  const double half_diff = (sxx - syy) / 2.0;
  const double rad = std::hypot(half_diff, sxy);
  const double l1 = mean + rad;
  const double l2 = std::max(mean - rad, 0.0);
  e.a = 2.0 * std::sqrt(std::max(l1, 0.0));
  e.b = 2.0 * std::sqrt(l2);
  e.theta = (rad == 0.0) ? 0.0 : fold_axial(0.5 * std::atan2(2.0 * sxy, sxx - syy));
  return e;
}

namespace detail {

/// Covariance of a symmetric accumulation, symmetrised exactly.
inline Mat3 symmetrize(const Mat3& m) { return (m + m.transpose()) / 2.0; }

inline SectorGaussians fit_sector(int id, std::span<const std::pair<RegionEllipse, std::vector<CapturePoint>>> regions) {
  SectorGaussians s = SectorGaussians::sentinel(id);
  if (regions.empty()) return s;
  s.sample_count = static_cast<int>(regions.size());

  if (regions.size() == 1) {
    const auto& [ell, pts] = regions.front();
    s.mu1 = {ell.centroid.x(), ell.centroid.y(), ell.mean_height};
    Mat3 c = Mat3::Zero();
    for (const auto& p : pts) {
      const Vec3 d = Vec3{p.x, p.y, p.h} - s.mu1;
      c += d * d.transpose();
    }
    s.sigma1 = symmetrize(c / static_cast<double>(pts.size()));
    s.mu2 = {ell.a, ell.b, ell.theta};
    return s;
  }

  // G1: region centroids and mean heights weighted by region point count.
  double wsum = 0.0;
  Vec3 m1 = Vec3::Zero();
  for (const auto& [ell, pts] : regions) {
    const double w = static_cast<double>(pts.size());
    m1 += w * Vec3{ell.centroid.x(), ell.centroid.y(), ell.mean_height};
    wsum += w;
  }
  m1 /= wsum;
  Mat3 c1 = Mat3::Zero();
  for (const auto& [ell, pts] : regions) {
    const Vec3 d = Vec3{ell.centroid.x(), ell.centroid.y(), ell.mean_height} - m1;
    c1 += static_cast<double>(pts.size()) * d * d.transpose();
  }
  s.mu1 = m1;
  s.sigma1 = symmetrize(c1 / wsum);

  // G2: unweighted over (a, b, theta); theta averaged axially.
  const double n = static_cast<double>(regions.size());
  double ma = 0, mb = 0, s2 = 0, c2 = 0;
  for (const auto& [ell, pts] : regions) {
    ma += ell.a;
    mb += ell.b;
    s2 += std::sin(2.0 * ell.theta);
    c2 += std::cos(2.0 * ell.theta);
  }
  ma /= n;
  mb /= n;
  const double mt = (s2 == 0.0 && c2 == 0.0) ? 0.0 : fold_axial(0.5 * std::atan2(s2, c2));
  Mat3 cov2 = Mat3::Zero();
  for (const auto& [ell, pts] : regions) {
    const Vec3 d{ell.a - ma, ell.b - mb, axial_difference(ell.theta, mt)};
    cov2 += d * d.transpose();
  }
  s.mu2 = {ma, mb, mt};
  s.sigma2 = symmetrize(cov2 / n);
  return s;
}

}  // namespace detail

/// Full capture -> state pipeline: filter, segment, fit, then summarise the
/// regions of each sector (a region belongs to the sector of its centroid).
inline SheetState build_state(const CaptureFrame& frame, const SheetGeometry& geom, const StateParams& params = {}) {
  geom.validate();
  const auto filtered = filter_uncompacted(frame.points, params.h_min);
  const auto groups = segment_regions(filtered, params.link_radius);

  std::vector<std::vector<std::pair<RegionEllipse, std::vector<CapturePoint>>>> per_sector(geom.sector_count);
  for (const auto& g : groups) {
    RegionEllipse e = fit_ellipse(g);
    per_sector[assign_sector(e.centroid, geom) - 1].emplace_back(e, g);
  }

  SheetState state{geom, {}, frame.t};
  for (int i = 1; i <= geom.sector_count; ++i) state.sectors.push_back(detail::fit_sector(i, per_sector[i - 1]));
  return state;
}

/// Regions of a capture with their fitted ellipses, in segmentation order.
inline std::vector<RegionEllipse> extract_regions(const CaptureFrame& frame, const StateParams& params = {}) {
  const auto filtered = filter_uncompacted(frame.points, params.h_min);
  std::vector<RegionEllipse> out;
  for (const auto& g : segment_regions(filtered, params.link_radius)) out.push_back(fit_ellipse(g));
  return out;
}

// ---------------------------------------------------------------------------
// Serialisation

inline nlohmann::json to_json(const CaptureFrame& f) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : f.points) pts.push_back({p.x, p.y, p.h});
  return {{"t", f.t}, {"points", std::move(pts)}};
}

inline CaptureFrame capture_from_json(const nlohmann::json& j) {
  CaptureFrame f;
  f.t = j.at("t").get<int>();
  for (const auto& p : j.at("points")) {
    if (!p.is_array() || p.size() != 3) throw InputError("capture point must be [x, y, h]");
    CapturePoint cp{p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
    if (cp.h < 0.0) throw InputError("capture point with negative height");
    f.points.push_back(cp);
  }
  if (f.points.empty()) throw InputError("capture frame has no points");
  return f;
}

inline void write_captures(std::ostream& os, std::span<const CaptureFrame> frames) {
  for (const auto& f : frames) os << to_json(f).dump() << '\n';
}

inline std::vector<CaptureFrame> read_captures(std::istream& is) {
  std::vector<CaptureFrame> frames;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      frames.push_back(capture_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw InputError("capture line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return frames;
}

inline nlohmann::json mat_to_json(const Mat3& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

inline Mat3 mat_from_json(const nlohmann::json& j) {
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = j.at(r).at(c).get<double>();
  return m;
}

inline nlohmann::json to_json(const SectorGaussians& s) {
  return {{"id", s.id},
          {"mu1", {s.mu1.x(), s.mu1.y(), s.mu1.z()}},
          {"sigma1", mat_to_json(s.sigma1)},
          {"mu2", {s.mu2.x(), s.mu2.y(), s.mu2.z()}},
          {"sigma2", mat_to_json(s.sigma2)},
          {"n", s.sample_count}};
}

inline SectorGaussians sector_from_json(const nlohmann::json& j) {
  SectorGaussians s;
  s.id = j.at("id").get<int>();
  const auto& m1 = j.at("mu1");
  const auto& m2 = j.at("mu2");
  s.mu1 = {m1.at(0).get<double>(), m1.at(1).get<double>(), m1.at(2).get<double>()};
  s.mu2 = {m2.at(0).get<double>(), m2.at(1).get<double>(), m2.at(2).get<double>()};
  s.sigma1 = mat_from_json(j.at("sigma1"));
  s.sigma2 = mat_from_json(j.at("sigma2"));
  s.sample_count = j.at("n").get<int>();
  return s;
}

inline nlohmann::json to_json(const SheetGeometry& g) {
  nlohmann::json poly = nlohmann::json::array();
  for (const auto& v : g.polygon) poly.push_back({v.x(), v.y()});
  return {{"center", {g.center.x(), g.center.y()}}, {"polygon", std::move(poly)}, {"k", g.sector_count}};
}

inline SheetGeometry geometry_from_json(const nlohmann::json& j) {
  SheetGeometry g;
  g.center = {j.at("center").at(0).get<double>(), j.at("center").at(1).get<double>()};
  for (const auto& v : j.at("polygon")) g.polygon.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
  g.sector_count = j.at("k").get<int>();
  g.validate();
  return g;
}

inline nlohmann::json to_json(const SheetState& s) {
  nlohmann::json sectors = nlohmann::json::array();
  for (const auto& sg : s.sectors) sectors.push_back(to_json(sg));
  return {{"t", s.time}, {"sectors", std::move(sectors)}};
}

/// States are stored without geometry; the caller supplies it.
inline SheetState state_from_json(const nlohmann::json& j, const SheetGeometry& geom) {
  SheetState s{geom, {}, j.at("t").get<int>()};
  for (const auto& sg : j.at("sectors")) s.sectors.push_back(sector_from_json(sg));
  if (static_cast<int>(s.sectors.size()) != geom.sector_count) throw InputError("state sector count does not match geometry");
  return s;
}

}  // namespace drape
