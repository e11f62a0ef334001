#include <gtest/gtest.h>

#include <functional>

#include "drape/plan.hpp"

using namespace drape;
using K = ActionKind;
using R = Relation;

namespace {

DrapingPlan from_kinds(std::initializer_list<K> ks) {
  DrapingPlan p{"t", {}};
  for (K k : ks) p.actions.push_back({k, kind_takes_arg(k) ? 1 : 0});
  return p;
}

bool has_violation(const std::vector<Violation>& vs, const std::string& text) {
  return std::any_of(vs.begin(), vs.end(), [&](const Violation& v) { return v.constraint == text; });
}

}  // namespace

TEST(CheckAbs, ExpertPlan) {
  const auto d1 = initial_plan_d1();
  EXPECT_EQ(d1.size(), 19u);
  EXPECT_EQ(d1.path_equivalents(), 16);
  EXPECT_TRUE(check_abs(d1, {K::peel, R::greater, 0}));
  EXPECT_TRUE(check_abs(d1, {K::capture, R::equal, 1}));
  EXPECT_FALSE(check_abs(d1, {K::refinement, R::equal, 1}));
  EXPECT_TRUE(check_abs(d1, {K::path, R::less, 17}));
  EXPECT_FALSE(check_abs(d1, {K::path, R::less, 16}));
}

TEST(CheckRel, GapExamples) {
  EXPECT_TRUE(check_rel(reference_refined_sheet1(), {K::end, K::capture, R::greater, 0}));
  EXPECT_FALSE(check_rel(from_kinds({K::end, K::path}), {K::end, K::path, R::greater, 0}));
  EXPECT_FALSE(check_rel(from_kinds({K::path, K::peel, K::peel, K::end}), {K::end, K::path, R::less, 2}));
  EXPECT_TRUE(check_rel(from_kinds({K::path, K::peel, K::end}), {K::end, K::path, R::less, 2}));
  EXPECT_TRUE(check_rel(from_kinds({K::path, K::peel, K::end}), {K::end, K::path, R::equal, 2}));
  EXPECT_FALSE(check_rel(from_kinds({K::path, K::end}), {K::end, K::path, R::equal, 2}));
  // Vacuous when alpha never occurs.
  EXPECT_TRUE(check_rel(from_kinds({K::path}), {K::end, K::peel, R::greater, 0}));
  // Every alpha occurrence needs its own witness.
  EXPECT_FALSE(check_rel(from_kinds({K::peel, K::path, K::end, K::peel}), {K::peel, K::path, R::greater, 0}));
}

TEST(Validate, ExpertPlansAgainstInitialSet) {
  for (const auto& p : {initial_plan_d1(), initial_plan_d2()}) {
    EXPECT_TRUE(validate(p, initial_plan_constraints()).empty()) << p.name;
    const auto vs = validate(p, layup_constraints());
    EXPECT_EQ(vs.size(), 2u);
    EXPECT_TRUE(has_violation(vs, to_string(AbsConstraint{K::refinement, R::equal, 1})));
  }
}

TEST(Validate, RefinedPlans) {
  for (const auto& p : {reference_refined_sheet1(), reference_refined_sheet2()}) {
    EXPECT_TRUE(validate(p, layup_constraints()).empty()) << p.name;
    EXPECT_TRUE(validate(p, initial_plan_constraints()).empty()) << p.name;
  }
  EXPECT_EQ(reference_refined_sheet1().path_equivalents(), 14);
  EXPECT_EQ(reference_refined_sheet2().path_equivalents(), 12);
}

TEST(Validate, DeletingRefinementViolatesBoth) {
  auto p = reference_refined_sheet1();
  std::erase_if(p.actions, [](const Action& a) { return a.kind == K::refinement; });
  const auto vs = validate(p, layup_constraints());
  ASSERT_EQ(vs.size(), 2u);
  EXPECT_TRUE(has_violation(vs, to_string(AbsConstraint{K::refinement, R::equal, 1})));
  EXPECT_TRUE(has_violation(vs, to_string(RelConstraint{K::end, K::refinement, R::greater, 0})));
}

TEST(Validate, ReportsPositions) {
  const auto vs = validate(from_kinds({K::end, K::capture, K::capture}), {{{K::end, K::path, R::greater, 0}},
                                                                        {{K::capture, R::equal, 1}}});
  ASSERT_EQ(vs.size(), 2u);
  EXPECT_EQ(vs[0].position, 3);
  EXPECT_EQ(vs[1].position, 1);
}

TEST(PrefixFeasible, Examples) {
  const ConstraintSet cap{{}, {{K::capture, R::equal, 1}}};
  EXPECT_FALSE(prefix_feasible(from_kinds({K::capture, K::capture}), cap, 10));
  EXPECT_TRUE(prefix_feasible(DrapingPlan{}, layup_constraints(), 19));
  EXPECT_TRUE(prefix_feasible(DrapingPlan{}, initial_plan_constraints(), 19));
  EXPECT_FALSE(prefix_feasible(from_kinds({K::end}), layup_constraints(), 19));
  EXPECT_THROW(prefix_feasible(from_kinds({K::path, K::path}), cap, 1), InputError);
  // Minimal valid layup plan has five actions.
  EXPECT_TRUE(prefix_feasible_exact(DrapingPlan{}, layup_constraints(), 5));
  EXPECT_FALSE(prefix_feasible_exact(DrapingPlan{}, layup_constraints(), 4));
}

TEST(PrefixFeasible, ScreenIsNecessaryForExact) {
  // Every exact-feasible prefix passes the screen.
  const auto cs = layup_constraints();
  std::vector<K> seq;
  std::function<void(int)> walk = [&](int depth) {
    DrapingPlan p = from_kinds({});
    for (K k : seq) p.actions.push_back({k, kind_takes_arg(k) ? 1 : 0});
    if (prefix_feasible_exact(p, cs, 7)) {
      EXPECT_TRUE(prefix_feasible_screened(p, cs, 7));
    }
    if (depth == 0) return;
    for (K k : kAllKinds) {
      seq.push_back(k);
      walk(depth - 1);
      seq.pop_back();
    }
  };
  walk(4);
}

TEST(PlanIo, ParseLines) {
  EXPECT_EQ(parse_action("(path, 15)"), Action::path(15));
  EXPECT_EQ(parse_action("(peel,)"), Action::peel());
  EXPECT_EQ(parse_action("(peel, ∅)"), Action::peel());
  EXPECT_EQ(parse_action("(refine, 6)"), Action::refinement(6));
  EXPECT_THROW(parse_action("(path)"), InputError);
  EXPECT_THROW(parse_action("(peel, 3)"), InputError);
  EXPECT_THROW(parse_action("path, 3"), InputError);
}

TEST(PlanIo, RoundTripAndErrors) {
  const auto p = reference_refined_sheet2();
  const auto back = parse_plan(emit_plan(p));
  EXPECT_EQ(back, p);
  EXPECT_EQ(back.size(), 12u);
  try {
    parse_plan("(path, 1)\n(path, 99)\n");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_plan("# only a comment\n"), InputError);
}

TEST(ConstraintJson, RoundTrip) {
  const auto cs = layup_constraints();
  EXPECT_EQ(constraints_from_json(to_json(cs)), cs);
  EXPECT_THROW(constraints_from_json(nlohmann::json::parse(R"({"rel":[["end","end",">",0]]})")), InputError);
}
