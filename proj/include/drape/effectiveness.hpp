#pragma once

// Action-effectiveness model: per-sector changes of the state Gaussians
// observed across logged actions, pooled per (action bucket, sector).

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "drape/cost.hpp"
#include "drape/error.hpp"
#include "drape/experiment_log.hpp"
#include "drape/rng.hpp"
#include "drape/sheet_state.hpp"

namespace drape {

/// Change of the sector means across one action: (x, y, h) of the spatial
/// Gaussian and (a, b, theta) of the shape Gaussian.
struct DeltaVector {
  std::array<double, 6> v{};  // dx, dy, dh, da, db, dtheta

  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
  double dx() const { return v[0]; }
  double dy() const { return v[1]; }
  double dh() const { return v[2]; }
  double da() const { return v[3]; }
  double db() const { return v[4]; }
  double dtheta() const { return v[5]; }

  friend bool operator==(const DeltaVector&, const DeltaVector&) = default;
  friend auto operator<=>(const DeltaVector&, const DeltaVector&) = default;
};

/// Diagonal +-1 indicators of covariance growth (+1) or non-growth (-1).
struct SignMatrices {
  Mat3 u1 = Mat3::Zero();
  Mat3 u2 = Mat3::Zero();
  friend bool operator==(const SignMatrices& l, const SignMatrices& r) { return l.u1 == r.u1 && l.u2 == r.u2; }
};

inline double heaviside_sign(double x) { return x > 0.0 ? 1.0 : -1.0; }

inline DeltaVector compute_delta(const SectorGaussians& before, const SectorGaussians& after) {
  DeltaVector d;
  d[0] = after.mu1.x() - before.mu1.x();
  d[1] = after.mu1.y() - before.mu1.y();
  d[2] = after.mu1.z() - before.mu1.z();
  d[3] = after.mu2.x() - before.mu2.x();
  d[4] = after.mu2.y() - before.mu2.y();
  d[5] = axial_difference(after.mu2.z(), before.mu2.z());
  return d;
}

inline SignMatrices compute_signs(const SectorGaussians& before, const SectorGaussians& after) {
  SignMatrices s;
  for (int l = 0; l < 3; ++l) {
    s.u1(l, l) = heaviside_sign(after.sigma1(l, l) - before.sigma1(l, l));
    s.u2(l, l) = heaviside_sign(after.sigma2(l, l) - before.sigma2(l, l));
  }
  return s;
}

struct TransitionSample {
  Action action;
  int sector = 1;
  DeltaVector delta;
  SignMatrices signs;
  std::string plan;        // provenance
  std::uint64_t source = 0;  // seed of the source run
  int time = 0;            // 1-based step index in the source plan
};

/// One sample per (action, sector) for every step bracketed by states.
inline std::vector<TransitionSample> extract_transitions(const ExperimentLog& log) {
  std::vector<TransitionSample> out;
  const int k = log.geometry.sector_count;
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    const auto& step = log.steps[i];
    if (!step.before || !step.after) continue;
    if (static_cast<int>(step.before->sectors.size()) != k || static_cast<int>(step.after->sectors.size()) != k)
      throw InputError("log record " + std::to_string(i + 1) + ": state sector count differs from geometry");
    for (int s = 0; s < k; ++s) {
      const auto& b = step.before->sectors[s];
      const auto& a = step.after->sectors[s];
      if (b.id != s + 1 || a.id != s + 1)
        throw InputError("log record " + std::to_string(i + 1) + ": sector ids out of order");
      out.push_back({step.action, s + 1, compute_delta(b, a), compute_signs(b, a), log.plan.name, log.seed,
                     static_cast<int>(i) + 1});
    }
  }
  return out;
}

struct BucketKey {
  ActionKind kind = ActionKind::path;
  int arg = 0;  // path index for path actions, 0 otherwise
  int sector = 1;
  friend auto operator<=>(const BucketKey&, const BucketKey&) = default;
};

/// Path actions are keyed by index; every other kind (including all
/// refinement counts) shares one bucket.
inline int bucket_arg(const Action& a) { return a.kind == ActionKind::path ? a.arg : 0; }

struct Bucket {
  std::vector<TransitionSample> samples;  // canonical order, see insert()
  DeltaVector mean;
  DeltaVector variance;       // unbiased; zero for a single sample
  std::array<int, 3> u1_vote{};  // sum of diagonal signs
  std::array<int, 3> u2_vote{};

  bool singleton() const { return samples.size() == 1; }

  void insert(TransitionSample s) {
    auto key = [](const TransitionSample& t) { return std::tie(t.plan, t.source, t.time, t.delta); };
    auto pos = std::upper_bound(samples.begin(), samples.end(), s,
                                [&](const TransitionSample& l, const TransitionSample& r) { return key(l) < key(r); });
    samples.insert(pos, std::move(s));
    recompute();
  }

  void recompute() {
    const double n = static_cast<double>(samples.size());
    mean = {};
    variance = {};
    u1_vote = {};
    u2_vote = {};
    for (const auto& s : samples) {
      for (std::size_t c = 0; c < 6; ++c) mean[c] += s.delta[c];
      for (int l = 0; l < 3; ++l) {
        u1_vote[l] += static_cast<int>(s.signs.u1(l, l));
        u2_vote[l] += static_cast<int>(s.signs.u2(l, l));
      }
    }
    for (std::size_t c = 0; c < 6; ++c) mean[c] /= n;
    if (samples.size() > 1) {
      for (const auto& s : samples)
        for (std::size_t c = 0; c < 6; ++c) variance[c] += (s.delta[c] - mean[c]) * (s.delta[c] - mean[c]);
      for (std::size_t c = 0; c < 6; ++c) variance[c] /= (n - 1.0);
    }
  }
};

struct EffectivenessModel {
  std::map<BucketKey, Bucket> table;
  int sector_count = 0;
  int experiments = 0;

  bool empty() const { return table.empty(); }

  bool covers(const Action& a) const {
    auto it = table.lower_bound(BucketKey{a.kind, bucket_arg(a), 0});
    return it != table.end() && it->first.kind == a.kind && it->first.arg == bucket_arg(a);
  }

  const Bucket* find(const Action& a, int sector) const {
    auto it = table.find(BucketKey{a.kind, bucket_arg(a), sector});
    return it == table.end() ? nullptr : &it->second;
  }

  void add(TransitionSample s) {
    const BucketKey key{s.action.kind, bucket_arg(s.action), s.sector};
    table[key].insert(std::move(s));
  }
};

/// Pools transitions of all logs. Logs must agree on the sector count.
inline EffectivenessModel aggregate(std::span<const ExperimentLog> logs) {
  EffectivenessModel model;
  for (const auto& log : logs) {
    const int k = log.geometry.sector_count;
    if (model.sector_count != 0 && model.sector_count != k)
      throw InputError("cannot aggregate logs with different sector counts (" + std::to_string(model.sector_count) +
                       " vs " + std::to_string(k) + ")");
    model.sector_count = k;
    for (auto& t : extract_transitions(log)) model.add(std::move(t));
    ++model.experiments;
  }
  return model;
}

// ---------------------------------------------------------------------------
// Propagation

struct PropagationMode {
  bool sampled = false;
  std::uint64_t seed = 0;

  static PropagationMode expectation() { return {}; }
  static PropagationMode sample(std::uint64_t seed) { return {true, seed}; }
};

/// Covariance diagonal scale applied per bucket vote: shrink where most
/// observations saw the variance drop, grow where most saw it rise.
inline constexpr double kCovarianceShrink = 0.9;
inline constexpr double kCovarianceGrow = 1.1;

namespace detail {

/// D * S * D with D = diag(sqrt(scale)): scales the diagonal by `scale` and
/// keeps the matrix positive semidefinite.
inline Mat3 scale_covariance(const Mat3& s, const std::array<int, 3>& vote) {
  Vec3 d;
  for (int l = 0; l < 3; ++l) d[l] = std::sqrt(vote[l] > 0 ? kCovarianceGrow : kCovarianceShrink);
  return d.asDiagonal() * s * d.asDiagonal();
}

}  // namespace detail

/// Applies the learned mean change of `action` to every live sector.
/// Compacted sectors stay compacted; actions without data leave the state
/// unchanged (callers check model.covers()).
inline SheetState propagate(const SheetState& state, const Action& action, const EffectivenessModel& model,
                            PropagationMode mode = {}) {
  SheetState next = state;
  Rng rng(mix_seed(mode.seed, static_cast<std::uint64_t>(action.kind) * 1000 + static_cast<std::uint64_t>(action.arg)));
  for (auto& s : next.sectors) {
    if (s.is_sentinel()) continue;
    const Bucket* b = model.find(action, s.id);
    if (!b) continue;
    DeltaVector d = b->mean;
    if (mode.sampled)
      for (std::size_t c = 0; c < 6; ++c) d[c] += rng.normal(0.0, std::sqrt(b->variance[c]));
    s.mu1 += Vec3{d[0], d[1], d[2]};
    s.mu2 += Vec3{d[3], d[4], d[5]};
    s.mu1.z() = std::max(0.0, s.mu1.z());
    s.mu2.x() = std::max(0.0, s.mu2.x());
    s.mu2.y() = std::max(0.0, s.mu2.y());
    s.mu2.z() = fold_axial(s.mu2.z());
    if (s.mu1.z() == 0.0 && s.mu2.x() == 0.0 && s.mu2.y() == 0.0) {
      s = SectorGaussians::sentinel(s.id);
      continue;
    }
    s.sigma1 = detail::scale_covariance(s.sigma1, b->u1_vote);
    s.sigma2 = detail::scale_covariance(s.sigma2, b->u2_vote);
  }
  next.time = state.time + 1;
  return next;
}

/// Heuristic ranking score of an action in a state: change of the state
/// utility under expectation-mode propagation plus a covariance-trace term.
/// Lower is better.
inline double effectiveness_score(const Action& action, const SheetState& state, const EffectivenessModel& model,
                                  const CostWeights& w = {}) {
  const SheetState after = propagate(state, action, model, PropagationMode::expectation());
  return state_utility(after, w) - state_utility(state, w) + w.w_sigma * (total_trace(after) - total_trace(state));
}

// ---------------------------------------------------------------------------
// Model file: raw samples per bucket, so loading re-aggregates losslessly.

inline constexpr int kModelFormatVersion = 1;

inline std::string bucket_key_string(const BucketKey& k) {
  return std::string(to_string(k.kind)) + "|" + std::to_string(k.arg) + "|" + std::to_string(k.sector);
}

inline nlohmann::json to_json(const EffectivenessModel& m) {
  nlohmann::json buckets = nlohmann::json::object();
  for (const auto& [key, bucket] : m.table) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : bucket.samples) {
      nlohmann::json u1 = nlohmann::json::array(), u2 = nlohmann::json::array();
      for (int l = 0; l < 3; ++l) {
        u1.push_back(static_cast<int>(s.signs.u1(l, l)));
        u2.push_back(static_cast<int>(s.signs.u2(l, l)));
      }
      samples.push_back({{"action", to_string(s.action)},
                         {"delta", s.delta.v},
                         {"u1", u1},
                         {"u2", u2},
                         {"plan", s.plan},
                         {"source", s.source},
                         {"time", s.time}});
    }
    buckets[bucket_key_string(key)] = std::move(samples);
  }
  return {{"version", kModelFormatVersion}, {"k", m.sector_count}, {"experiments", m.experiments}, {"buckets", buckets}};
}

inline EffectivenessModel model_from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != kModelFormatVersion) throw InputError("unsupported model version");
  EffectivenessModel m;
  m.sector_count = j.at("k").get<int>();
  m.experiments = j.at("experiments").get<int>();
  for (const auto& [key, samples] : j.at("buckets").items()) {
    const auto p1 = key.find('|'), p2 = key.rfind('|');
    if (p1 == std::string::npos || p1 == p2) throw InputError("bad bucket key '" + key + "'");
    const int sector = std::stoi(key.substr(p2 + 1));
    for (const auto& s : samples) {
      TransitionSample t;
      t.action = parse_action(s.at("action").get<std::string>());
      t.sector = sector;
      t.delta.v = s.at("delta").get<std::array<double, 6>>();
      for (int l = 0; l < 3; ++l) {
        t.signs.u1(l, l) = s.at("u1").at(l).get<double>();
        t.signs.u2(l, l) = s.at("u2").at(l).get<double>();
      }
      t.plan = s.at("plan").get<std::string>();
      t.source = s.at("source").get<std::uint64_t>();
      t.time = s.at("time").get<int>();
      m.add(std::move(t));
    }
  }
  return m;
}

}  // namespace drape
