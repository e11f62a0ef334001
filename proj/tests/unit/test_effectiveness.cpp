#include <gtest/gtest.h>

#include <cmath>

#include "drape/cost.hpp"
#include "drape/effectiveness.hpp"
#include "drape/rng.hpp"

using namespace drape;

namespace {

SheetGeometry geom() { return {Vec2::Zero(), centered_rectangle(200, 100), 8}; }

SectorGaussians live(int id, double h, double a, double b, double theta = 0.3) {
  SectorGaussians s = SectorGaussians::sentinel(id);
  s.mu1 = {10.0 * id, 5.0, h};
  s.mu2 = {a, b, theta};
  s.sigma1 = Vec3(4, 4, 1).asDiagonal();
  s.sigma2 = Vec3(2, 2, 0.1).asDiagonal();
  s.sample_count = 1;
  return s;
}

SheetState state_with(std::initializer_list<SectorGaussians> live_sectors) {
  SheetState s = SheetState::compacted(geom());
  for (const auto& l : live_sectors) s.sectors[l.id - 1] = l;
  return s;
}

ExperimentLog log_of(const std::vector<std::pair<Action, std::pair<SheetState, SheetState>>>& steps,
                     std::uint64_t seed = 1, std::string plan = "P") {
  ExperimentLog log;
  log.plan.name = std::move(plan);
  log.geometry = geom();
  log.seed = seed;
  for (const auto& [a, st] : steps) {
    log.plan.actions.push_back(a);
    StepRecord r;
    r.action = a;
    r.before = st.first;
    r.after = st.second;
    log.steps.push_back(r);
  }
  return log;
}

SectorGaussians random_sector(Rng& rng) {
  SectorGaussians s = SectorGaussians::sentinel(rng.uniform_int(1, 8));
  s.mu1 = {rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(0, 10)};
  s.mu2 = {rng.uniform(0, 50), rng.uniform(0, 20), rng.uniform(0, kPi)};
  for (int l = 0; l < 3; ++l) {
    // Small integer diagonals make exact ties common.
    s.sigma1(l, l) = rng.uniform_int(0, 3);
    s.sigma2(l, l) = rng.uniform_int(0, 3);
  }
  s.sample_count = 2;
  return s;
}

}  // namespace

TEST(ComputeDelta, Examples) {
  auto b = live(1, 10, 20, 5), a = live(1, 2, 20, 5);
  EXPECT_EQ(compute_delta(b, a).dh(), -8.0);
  EXPECT_EQ(compute_delta(b, b), DeltaVector{});
  b.mu2.z() = 2.967;
  a.mu2.z() = 0.1;
  const double dt = compute_delta(b, a).dtheta();
  EXPECT_NEAR(dt, 0.1 + kPi - 2.967, 1e-12);
  EXPECT_NEAR(dt, 0.275, 1e-3);
}

TEST(ComputeDelta, Antisymmetric) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto x = random_sector(rng), y = random_sector(rng);
    const auto f = compute_delta(x, y), g = compute_delta(y, x);
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(f[c], -g[c]);
    // The fold sends exactly pi/2 to one end of the interval only.
    if (std::abs(std::abs(f.dtheta()) - kPi / 2) > 1e-9) {
      EXPECT_NEAR(f.dtheta(), -g.dtheta(), 1e-12);
    }
  }
}

TEST(ComputeSigns, Examples) {
  auto b = live(1, 1, 1, 1), a = b;
  a.sigma1 = Vec3(2, 5, 1).asDiagonal();
  const auto s = compute_signs(b, a);
  EXPECT_EQ(s.u1.diagonal(), Vec3(-1, 1, -1));
  EXPECT_TRUE(s.u1 == Mat3(s.u1.diagonal().asDiagonal()));
  const auto same = compute_signs(b, b);
  EXPECT_EQ(same.u1.diagonal(), Vec3(-1, -1, -1));
  EXPECT_EQ(same.u2.diagonal(), Vec3(-1, -1, -1));
  a.sigma1 = Vec3(5, 5, 2).asDiagonal();
  a.sigma2 = Vec3(3, 3, 1).asDiagonal();
  const auto up = compute_signs(b, a);
  EXPECT_EQ(up.u1.diagonal(), Vec3(1, 1, 1));
  EXPECT_EQ(up.u2.diagonal(), Vec3(1, 1, 1));
  EXPECT_EQ(heaviside_sign(0.0), -1.0);
  EXPECT_EQ(heaviside_sign(-0.0), -1.0);
}

TEST(Transitions, Counts) {
  const auto s = state_with({live(2, 3, 10, 5)});
  const auto one = log_of({{Action::path(1), {s, s}}});
  const auto samples = extract_transitions(one);
  ASSERT_EQ(samples.size(), 8u);
  for (const auto& t : samples) EXPECT_EQ(t.delta, DeltaVector{});
  for (int i = 0; i < 8; ++i) EXPECT_EQ(samples[i].sector, i + 1);

  std::vector<std::pair<Action, std::pair<SheetState, SheetState>>> steps;
  for (const auto& a : initial_plan_d1().actions) steps.push_back({a, {s, s}});
  EXPECT_EQ(extract_transitions(log_of(steps)).size(), 152u);
}

TEST(Transitions, CorruptRecordNamed) {
  auto s = state_with({});
  auto bad = s;
  bad.sectors.pop_back();
  const auto log = log_of({{Action::path(1), {s, s}}, {Action::peel(), {s, bad}}});
  try {
    extract_transitions(log);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("record 2"), std::string::npos);
  }
}

TEST(Aggregate, DuplicateLogsDoubleCounts) {
  const auto b = state_with({live(2, 6, 10, 5)}), a = state_with({live(2, 2, 8, 5)});
  const auto log = log_of({{Action::path(3), {b, a}}});
  const std::vector<ExperimentLog> once{log}, twice{log, log};
  const auto m1 = aggregate(once), m2 = aggregate(twice);
  const auto* b1 = m1.find(Action::path(3), 2);
  const auto* b2 = m2.find(Action::path(3), 2);
  ASSERT_TRUE(b1 && b2);
  EXPECT_EQ(b1->samples.size(), 1u);
  EXPECT_EQ(b2->samples.size(), 2u);
  EXPECT_EQ(b1->mean, b2->mean);
  EXPECT_EQ(b1->mean.dh(), -4.0);
  EXPECT_TRUE(b1->singleton());
  EXPECT_EQ(m2.experiments, 2);
  EXPECT_TRUE(aggregate(std::span<const ExperimentLog>{}).empty());
}

TEST(Aggregate, MixedSectorCountRejected) {
  auto l1 = log_of({{Action::path(1), {state_with({}), state_with({})}}});
  auto l2 = l1;
  l2.geometry.sector_count = 4;
  for (auto* st : {&*l2.steps[0].before, &*l2.steps[0].after}) {
    st->geometry.sector_count = 4;
    st->sectors.resize(4);
  }
  const std::vector<ExperimentLog> logs{l1, l2};
  EXPECT_THROW(aggregate(logs), InputError);
}

TEST(Aggregate, MeanAndUnbiasedVariance) {
  EffectivenessModel m;
  for (double v : {1.0, 2.0, 6.0}) {
    TransitionSample t;
    t.action = Action::path(5);
    t.sector = 4;
    t.delta[2] = v;
    t.time = static_cast<int>(v);
    m.add(t);
  }
  const auto* b = m.find(Action::path(5), 4);
  ASSERT_TRUE(b);
  EXPECT_DOUBLE_EQ(b->mean.dh(), 3.0);
  EXPECT_DOUBLE_EQ(b->variance.dh(), 7.0);
  EXPECT_TRUE(m.covers(Action::path(5)));
  EXPECT_FALSE(m.covers(Action::path(6)));
  // All refinement counts share one bucket.
  EXPECT_EQ(bucket_arg(Action::refinement(3)), bucket_arg(Action::refinement(7)));
}

TEST(Aggregate, InsertionOrderDoesNotMatter) {
  Rng rng(11);
  std::vector<TransitionSample> ts;
  for (int i = 0; i < 20; ++i) {
    TransitionSample t;
    t.action = Action::path(2);
    t.sector = 1;
    t.time = i;
    t.source = static_cast<std::uint64_t>(i % 3);
    for (std::size_t c = 0; c < 6; ++c) t.delta[c] = rng.uniform(-1, 1);
    ts.push_back(t);
  }
  EffectivenessModel a, b;
  for (const auto& t : ts) a.add(t);
  for (auto it = ts.rbegin(); it != ts.rend(); ++it) b.add(*it);
  EXPECT_EQ(a.find(Action::path(2), 1)->mean, b.find(Action::path(2), 1)->mean);
  EXPECT_EQ(a.find(Action::path(2), 1)->variance, b.find(Action::path(2), 1)->variance);
}

TEST(Propagate, SentinelStaysSentinel) {
  EffectivenessModel m;
  TransitionSample t;
  t.action = Action::path(1);
  t.sector = 3;
  t.delta[2] = 4.0;
  m.add(t);
  const auto s = state_with({});
  const auto next = propagate(s, Action::path(1), m);
  EXPECT_TRUE(next.fully_compacted());
  EXPECT_EQ(next.time, 1);
}

TEST(Propagate, SingleSampleRoundTrip) {
  // A model learned from one transition maps `before` onto `after` in
  // expectation (means only).
  const auto b = state_with({live(2, 6, 10, 5, 0.2), live(7, 3, 12, 4, 3.0)});
  const auto a = state_with({live(2, 2, 8, 6, 3.1), live(7, 1, 9, 2, 0.05)});
  const std::vector<ExperimentLog> logs{log_of({{Action::path(4), {b, a}}})};
  const auto m = aggregate(logs);
  const auto next = propagate(b, Action::path(4), m);
  for (int s : {1, 6}) {
    EXPECT_NEAR((next.sectors[s].mu1 - a.sectors[s].mu1).norm(), 0.0, 1e-12);
    EXPECT_NEAR(next.sectors[s].mu2.x(), a.sectors[s].mu2.x(), 1e-12);
    EXPECT_NEAR(next.sectors[s].mu2.y(), a.sectors[s].mu2.y(), 1e-12);
    EXPECT_NEAR(std::abs(axial_difference(next.sectors[s].mu2.z(), a.sectors[s].mu2.z())), 0.0, 1e-12);
  }
}

TEST(Propagate, ClampToSentinel) {
  EffectivenessModel m;
  TransitionSample t;
  t.action = Action::peel();
  t.sector = 1;
  t.delta.v = {0, 0, -5, -100, -100, 0};
  m.add(t);
  const auto next = propagate(state_with({live(1, 3, 10, 5)}), Action::peel(), m);
  EXPECT_TRUE(next.sectors[0].is_sentinel());

  t.delta.v = {0, 0, -5, 0, 0, 0};
  EffectivenessModel m2;
  m2.add(t);
  const auto kept = propagate(state_with({live(1, 3, 10, 5)}), Action::peel(), m2);
  EXPECT_EQ(kept.sectors[0].mu1.z(), 0.0);
  EXPECT_FALSE(kept.sectors[0].is_sentinel());
}

TEST(Propagate, CovarianceVoteScalesDiagonalAndStaysPsd) {
  EffectivenessModel m;
  TransitionSample t;
  t.action = Action::path(1);
  t.sector = 1;
  t.signs.u1 = Vec3(1, -1, -1).asDiagonal();
  t.signs.u2 = Vec3(-1, -1, 1).asDiagonal();
  m.add(t);
  auto s0 = live(1, 3, 10, 5);
  s0.sigma1 << 4, 1, 0, 1, 4, 0.5, 0, 0.5, 1;
  const auto next = propagate(state_with({s0}), Action::path(1), m).sectors[0];
  EXPECT_NEAR(next.sigma1(0, 0), 4 * kCovarianceGrow, 1e-12);
  EXPECT_NEAR(next.sigma1(1, 1), 4 * kCovarianceShrink, 1e-12);
  EXPECT_NEAR(next.sigma2(2, 2), 0.1 * kCovarianceGrow, 1e-12);
  Eigen::SelfAdjointEigenSolver<Mat3> es(next.sigma1);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
}

TEST(Propagate, SampledModeIsSeeded) {
  EffectivenessModel m;
  for (double v : {-1.0, -3.0}) {
    TransitionSample t;
    t.action = Action::path(1);
    t.sector = 1;
    t.delta[2] = v;
    t.time = static_cast<int>(-v);
    m.add(t);
  }
  const auto s = state_with({live(1, 5, 10, 5)});
  const auto x = propagate(s, Action::path(1), m, PropagationMode::sample(9));
  const auto y = propagate(s, Action::path(1), m, PropagationMode::sample(9));
  const auto z = propagate(s, Action::path(1), m, PropagationMode::sample(10));
  EXPECT_TRUE(x.sectors[0] == y.sectors[0]);
  EXPECT_FALSE(x.sectors[0] == z.sectors[0]);
  EXPECT_NEAR(propagate(s, Action::path(1), m).sectors[0].mu1.z(), 3.0, 1e-12);
}

TEST(Score, ZeroDeltaIsTraceOnly) {
  EffectivenessModel m;
  TransitionSample t;
  t.action = Action::path(1);
  t.sector = 1;
  t.signs.u1 = Vec3(-1, -1, -1).asDiagonal();
  t.signs.u2 = Vec3(-1, -1, -1).asDiagonal();
  m.add(t);
  const auto s = state_with({live(1, 5, 10, 5)});
  const CostWeights w;
  const auto after = propagate(s, Action::path(1), m);
  const double dtrace = total_trace(after) - total_trace(s);
  const double expected = state_utility(after, w) - state_utility(s, w) + w.w_sigma * dtrace;
  EXPECT_DOUBLE_EQ(effectiveness_score(Action::path(1), s, m, w), expected);
  // Only the covariance part of the utility moved.
  const double area_scale = s.geometry.area() / w.area_unit;
  EXPECT_NEAR(state_utility(after, w) - state_utility(s, w), w.w_sigma * dtrace / area_scale, 1e-15);
}

TEST(Score, DominatedActionScoresHigher) {
  EffectivenessModel m;
  for (int path : {1, 2})
    for (int sec = 1; sec <= 8; ++sec) {
      TransitionSample t;
      t.action = Action::path(path);
      t.sector = sec;
      t.delta[2] = path == 1 ? -2.0 : -1.0;
      m.add(t);
    }
  const auto s = state_with({live(1, 5, 10, 5), live(4, 3, 10, 5)});
  EXPECT_LT(effectiveness_score(Action::path(1), s, m), effectiveness_score(Action::path(2), s, m));
}

TEST(Cost, ActionCosts) {
  EXPECT_EQ(action_cost(Action::refinement(6)), 6.0);
  EXPECT_EQ(action_cost(Action::path(3)), 1.0);
  EXPECT_EQ(action_cost(Action::peel()), 0.2);
  EXPECT_EQ(action_cost(Action::capture()), 0.2);
  EXPECT_EQ(action_cost(Action::end()), 0.0);
}

TEST(Cost, UtilityByHand) {
  EXPECT_EQ(state_utility(state_with({})), 0.0);
  CostWeights w;
  w.w_h = 2.0;
  w.w_area = 0.5;
  w.w_sigma = 0.25;
  w.area_unit = 5000.0;  // sheet area 20000 -> divisor 4
  auto s1 = live(1, 3, 4, 2);   // 2*3 + 0.5*8 + 0.25*(9 + 4.1) = 13.275
  auto s2 = live(2, 1, 10, 1);  // 2*1 + 0.5*10 + 0.25*13.1 = 10.275
  EXPECT_NEAR(state_utility(state_with({s1, s2}), w), (13.275 + 10.275) / 4.0, 1e-12);
}

TEST(ModelJson, RoundTrip) {
  const auto b = state_with({live(2, 6, 10, 5)}), a = state_with({live(2, 2, 8, 5)});
  const std::vector<ExperimentLog> logs{log_of({{Action::path(3), {b, a}}, {Action::refinement(2), {a, b}}}, 4),
                                        log_of({{Action::path(3), {a, b}}}, 5)};
  const auto m = aggregate(logs);
  const auto back = model_from_json(nlohmann::json::parse(to_json(m).dump()));
  ASSERT_EQ(back.table.size(), m.table.size());
  for (const auto& [k, bucket] : m.table) {
    const auto& other = back.table.at(k);
    EXPECT_EQ(other.mean, bucket.mean);
    EXPECT_EQ(other.variance, bucket.variance);
    EXPECT_EQ(other.u1_vote, bucket.u1_vote);
  }
  EXPECT_EQ(back.experiments, 2);
  EXPECT_EQ(back.sector_count, 8);
}
