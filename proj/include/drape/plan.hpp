#pragma once

// Draping-plan language: typed actions, plans, ordering/count constraints,
// validation and the line-oriented plan file format.

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "drape/error.hpp"

namespace drape {

/// Declaration order is the canonical tie-break order used by the search.
enum class ActionKind : std::uint8_t { path, peel, capture, refinement, end };

inline constexpr std::array<ActionKind, 5> kAllKinds{ActionKind::path, ActionKind::peel, ActionKind::capture,
                                                     ActionKind::refinement, ActionKind::end};

inline std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::path: return "path";
    case ActionKind::peel: return "peel";
    case ActionKind::capture: return "capture";
    case ActionKind::refinement: return "refinement";
    case ActionKind::end: return "end";
  }
  return "?";
}

inline ActionKind kind_from_string(std::string_view s) {
  if (s == "path") return ActionKind::path;
  if (s == "peel") return ActionKind::peel;
  if (s == "capture") return ActionKind::capture;
  if (s == "refinement" || s == "refine") return ActionKind::refinement;
  if (s == "end") return ActionKind::end;
  throw InputError("unknown action kind '" + std::string(s) + "'");
}

inline bool kind_takes_arg(ActionKind k) { return k == ActionKind::path || k == ActionKind::refinement; }

struct Action {
  ActionKind kind = ActionKind::path;
  int arg = 0;  // path index or refinement count; 0 for argument-free kinds

  static Action path(int index) { return {ActionKind::path, index}; }
  static Action peel() { return {ActionKind::peel, 0}; }
  static Action capture() { return {ActionKind::capture, 0}; }
  static Action end() { return {ActionKind::end, 0}; }
  static Action refinement(int n) { return {ActionKind::refinement, n}; }

  /// Paths executed by this action (refinement(n) counts n).
  int path_equivalents() const {
    if (kind == ActionKind::path) return 1;
    if (kind == ActionKind::refinement) return arg;
    return 0;
  }

  friend bool operator==(const Action&, const Action&) = default;
  friend auto operator<=>(const Action& l, const Action& r) {
    if (auto c = l.kind <=> r.kind; c != 0) return c;
    return l.arg <=> r.arg;
  }
};

inline std::string to_string(const Action& a) {
  std::string s = "(" + std::string(to_string(a.kind)) + ",";
  if (kind_takes_arg(a.kind)) s += " " + std::to_string(a.arg);
  return s + ")";
}

struct DrapingPlan {
  std::string name;
  std::vector<Action> actions;

  std::size_t size() const { return actions.size(); }
  int path_equivalents() const {
    int n = 0;
    for (const auto& a : actions) n += a.path_equivalents();
    return n;
  }
  int count(ActionKind k) const {
    return static_cast<int>(std::count_if(actions.begin(), actions.end(), [k](const Action& a) { return a.kind == k; }));
  }

  friend bool operator==(const DrapingPlan&, const DrapingPlan&) = default;
};

/// Argument ranges: path index in [1, path_count], refinement count >= 1.
inline void check_action_args(const Action& a, int path_count) {
  if (a.kind == ActionKind::path && (a.arg < 1 || a.arg > path_count))
    throw InputError("path index " + std::to_string(a.arg) + " outside [1, " + std::to_string(path_count) + "]");
  if (a.kind == ActionKind::refinement && a.arg < 1) throw InputError("refinement count must be >= 1");
  if (!kind_takes_arg(a.kind) && a.arg != 0) throw InputError(std::string(to_string(a.kind)) + " takes no argument");
}

// ---------------------------------------------------------------------------
// Constraints

enum class Relation : std::uint8_t { greater, equal, less };

inline std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::greater: return ">";
    case Relation::equal: return "=";
    case Relation::less: return "<";
  }
  return "?";
}

inline Relation relation_from_string(std::string_view s) {
  if (s == ">") return Relation::greater;
  if (s == "=") return Relation::equal;
  if (s == "<") return Relation::less;
  throw InputError("unknown relation '" + std::string(s) + "'");
}

/// alpha must follow some earlier beta at positional gap g = p - q with
/// g > lambda, g == lambda, or g <= lambda ("within lambda").
struct RelConstraint {
  ActionKind alpha;
  ActionKind beta;
  Relation gamma;
  int lambda = 0;
  friend bool operator==(const RelConstraint&, const RelConstraint&) = default;
};

/// The number of alpha occurrences compares to lambda by gamma (strict).
struct AbsConstraint {
  ActionKind alpha;
  Relation gamma;
  int lambda = 0;
  friend bool operator==(const AbsConstraint&, const AbsConstraint&) = default;
};

struct ConstraintSet {
  std::vector<RelConstraint> rel;
  std::vector<AbsConstraint> abs;
  friend bool operator==(const ConstraintSet&, const ConstraintSet&) = default;
};

inline std::string to_string(const RelConstraint& c) {
  return "(" + std::string(to_string(c.alpha)) + ", " + std::string(to_string(c.beta)) + ", " +
         std::string(to_string(c.gamma)) + ", " + std::to_string(c.lambda) + ")";
}

inline std::string to_string(const AbsConstraint& c) {
  return "(" + std::string(to_string(c.alpha)) + ", " + std::string(to_string(c.gamma)) + ", " +
         std::to_string(c.lambda) + ")";
}

/// Constraint set used for layup planning: end comes after at least one
/// path, peel, capture and refinement; at least one peel and one end;
/// exactly one refinement and one capture.
inline ConstraintSet layup_constraints() {
  using K = ActionKind;
  using R = Relation;
  return {{{K::end, K::path, R::greater, 0},
           {K::end, K::peel, R::greater, 0},
           {K::end, K::capture, R::greater, 0},
           {K::end, K::refinement, R::greater, 0}},
          {{K::peel, R::greater, 0}, {K::end, R::greater, 0}, {K::refinement, R::equal, 1}, {K::capture, R::equal, 1}}};
}

/// The search constraint set without its two refinement requirements.
/// Expert plans carry no refinement action, so they are checked (and
/// executed) against this subset; every refined plan satisfies it too.
inline ConstraintSet initial_plan_constraints() {
  ConstraintSet cs = layup_constraints();
  std::erase_if(cs.rel, [](const RelConstraint& c) { return c.beta == ActionKind::refinement; });
  std::erase_if(cs.abs, [](const AbsConstraint& c) { return c.alpha == ActionKind::refinement; });
  return cs;
}

namespace detail {

inline bool compare(int value, Relation r, int lambda) {
  switch (r) {
    case Relation::greater: return value > lambda;
    case Relation::equal: return value == lambda;
    case Relation::less: return value < lambda;
  }
  return false;
}

inline bool gap_ok(int gap, Relation r, int lambda) {
  switch (r) {
    case Relation::greater: return gap > lambda;
    case Relation::equal: return gap == lambda;
    case Relation::less: return gap <= lambda;
  }
  return false;
}

/// 1-based position of the first alpha lacking a qualifying earlier beta.
inline std::optional<int> first_rel_violation(std::span<const ActionKind> kinds, const RelConstraint& c) {
  for (std::size_t p = 0; p < kinds.size(); ++p) {
    if (kinds[p] != c.alpha) continue;
    bool found = false;
    for (std::size_t q = 0; q < p && !found; ++q)
      found = kinds[q] == c.beta && gap_ok(static_cast<int>(p - q), c.gamma, c.lambda);
    if (!found) return static_cast<int>(p) + 1;
  }
  return std::nullopt;
}

inline int count_kind(std::span<const ActionKind> kinds, ActionKind k) {
  return static_cast<int>(std::count(kinds.begin(), kinds.end(), k));
}

inline std::vector<ActionKind> kinds_of(const DrapingPlan& plan) {
  std::vector<ActionKind> ks;
  ks.reserve(plan.actions.size());
  for (const auto& a : plan.actions) ks.push_back(a.kind);
  return ks;
}

inline bool satisfies(std::span<const ActionKind> kinds, const ConstraintSet& cs) {
  for (const auto& c : cs.abs)
    if (!compare(count_kind(kinds, c.alpha), c.gamma, c.lambda)) return false;
  for (const auto& c : cs.rel)
    if (first_rel_violation(kinds, c)) return false;
  return true;
}

}  // namespace detail

inline bool check_abs(const DrapingPlan& plan, const AbsConstraint& c) {
  return detail::compare(plan.count(c.alpha), c.gamma, c.lambda);
}

inline bool check_rel(const DrapingPlan& plan, const RelConstraint& c) {
  const auto kinds = detail::kinds_of(plan);
  return !detail::first_rel_violation(kinds, c).has_value();
}

struct Violation {
  std::string constraint;        // textual form of the failed constraint
  std::optional<int> position;   // first witnessing position (1-based), if any
  std::string message;
};

inline std::vector<Violation> validate(const DrapingPlan& plan, const ConstraintSet& cs) {
  std::vector<Violation> out;
  const auto kinds = detail::kinds_of(plan);
  for (const auto& c : cs.abs) {
    const int n = detail::count_kind(kinds, c.alpha);
    if (detail::compare(n, c.gamma, c.lambda)) continue;
    Violation v{to_string(c), std::nullopt, {}};
    // Too many occurrences: point at the first one over the limit.
    const int limit = c.gamma == Relation::less ? c.lambda - 1 : c.lambda;
    if (c.gamma != Relation::greater && n > limit) {
      int seen = 0;
      for (std::size_t p = 0; p < kinds.size(); ++p)
        if (kinds[p] == c.alpha && ++seen > limit) {
          v.position = static_cast<int>(p) + 1;
          break;
        }
    }
    v.message = std::string(to_string(c.alpha)) + " occurs " + std::to_string(n) + " times";
    out.push_back(std::move(v));
  }
  for (const auto& c : cs.rel) {
    if (auto p = detail::first_rel_violation(kinds, c)) {
      out.push_back({to_string(c), p,
                     std::string(to_string(c.alpha)) + " at position " + std::to_string(*p) +
                         " has no qualifying earlier " + std::string(to_string(c.beta))});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prefix feasibility

namespace detail {

/// True when some alpha already placed can never be satisfied, or a count
/// bound is already exceeded.
inline bool prefix_dead(std::span<const ActionKind> kinds, const ConstraintSet& cs) {
  for (const auto& c : cs.rel)
    if (first_rel_violation(kinds, c)) return true;
  for (const auto& c : cs.abs) {
    const int n = count_kind(kinds, c.alpha);
    if (c.gamma == Relation::equal && n > c.lambda) return true;
    if (c.gamma == Relation::less && n >= c.lambda) return true;
  }
  return false;
}

/// Lower bound on additional actions needed: occurrences demanded by count
/// constraints, closed over the references those occurrences require.
inline int min_additional(std::span<const ActionKind> kinds, const ConstraintSet& cs) {
  std::array<int, 5> need{};
  for (const auto& c : cs.abs) {
    const int n = count_kind(kinds, c.alpha);
    int want = 0;
    if (c.gamma == Relation::greater) want = c.lambda + 1 - n;
    if (c.gamma == Relation::equal) want = c.lambda - n;
    auto& slot = need[static_cast<std::size_t>(c.alpha)];
    slot = std::max(slot, want);
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& c : cs.rel) {
      if (need[static_cast<std::size_t>(c.alpha)] == 0) continue;
      auto& nb = need[static_cast<std::size_t>(c.beta)];
      if (nb == 0 && count_kind(kinds, c.beta) == 0) {
        nb = 1;
        changed = true;
      }
    }
  }
  int total = 0;
  for (int v : need) total += v;
  return total;
}

inline bool exact_search(std::vector<ActionKind>& seq, const ConstraintSet& cs, std::size_t horizon) {
  if (prefix_dead(seq, cs)) return false;
  if (satisfies(seq, cs)) return true;
  if (seq.size() >= horizon) return false;
  if (static_cast<std::size_t>(min_additional(seq, cs)) > horizon - seq.size()) return false;
  for (ActionKind k : kAllKinds) {
    seq.push_back(k);
    const bool ok = exact_search(seq, cs, horizon);
    seq.pop_back();
    if (ok) return true;
  }
  return false;
}

}  // namespace detail

/// Necessary-condition screen: no dead constraint in the prefix and enough
/// room left for the occurrences still demanded.
inline bool prefix_feasible_screened(const DrapingPlan& prefix, const ConstraintSet& cs, int horizon) {
  if (horizon < static_cast<int>(prefix.size())) throw InputError("horizon shorter than prefix");
  const auto kinds = detail::kinds_of(prefix);
  if (detail::prefix_dead(kinds, cs)) return false;
  return detail::min_additional(kinds, cs) <= horizon - static_cast<int>(prefix.size());
}

/// Exact answer by depth-first enumeration of extensions over action kinds
/// (constraints only see kinds, so arguments need not be enumerated).
inline bool prefix_feasible_exact(const DrapingPlan& prefix, const ConstraintSet& cs, int horizon) {
  if (horizon < static_cast<int>(prefix.size())) throw InputError("horizon shorter than prefix");
  auto kinds = detail::kinds_of(prefix);
  return detail::exact_search(kinds, cs, static_cast<std::size_t>(horizon));
}

inline constexpr int kExactFeasibilityWindow = 6;

inline bool prefix_feasible(const DrapingPlan& prefix, const ConstraintSet& cs, int horizon) {
  if (horizon < static_cast<int>(prefix.size())) throw InputError("horizon shorter than prefix");
  if (horizon - static_cast<int>(prefix.size()) <= kExactFeasibilityWindow) return prefix_feasible_exact(prefix, cs, horizon);
  return prefix_feasible_screened(prefix, cs, horizon);
}

// ---------------------------------------------------------------------------
// Plan files: one action per line, "(path, 15)", "(peel,)", "(peel, ∅)".
// Lines starting with '#' are comments; "# plan: NAME" sets the name.

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

inline Action parse_action(std::string_view text) {
  const std::string s = detail::trim(text);
  if (s.size() < 3 || s.front() != '(' || s.back() != ')') throw InputError("expected '(kind, arg)'");
  const std::string body = s.substr(1, s.size() - 2);
  const auto comma = body.find(',');
  const std::string kind_str = detail::trim(comma == std::string::npos ? body : body.substr(0, comma));
  std::string arg_str = comma == std::string::npos ? std::string{} : detail::trim(body.substr(comma + 1));
  if (arg_str == "∅" || arg_str == "{}" || arg_str == "-") arg_str.clear();
  const ActionKind kind = kind_from_string(kind_str);
  Action a{kind, 0};
  if (kind_takes_arg(kind)) {
    if (arg_str.empty()) throw InputError(std::string(to_string(kind)) + " requires an integer argument");
    std::size_t used = 0;
    try {
      a.arg = std::stoi(arg_str, &used);
    } catch (const std::exception&) {
      throw InputError("bad integer argument '" + arg_str + "'");
    }
    if (used != arg_str.size()) throw InputError("bad integer argument '" + arg_str + "'");
  } else if (!arg_str.empty()) {
    throw InputError(std::string(to_string(kind)) + " takes no argument");
  }
  return a;
}

inline DrapingPlan parse_plan(std::istream& is, int path_count = 16) {
  DrapingPlan plan;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const std::string body = detail::trim(std::string_view(t).substr(1));
      if (body.rfind("plan:", 0) == 0) plan.name = detail::trim(std::string_view(body).substr(5));
      continue;
    }
    try {
      Action a = parse_action(t);
      check_action_args(a, path_count);
      plan.actions.push_back(a);
    } catch (const InputError& e) {
      throw InputError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (plan.actions.empty()) throw InputError("plan has no actions");
  return plan;
}

inline DrapingPlan parse_plan(std::string_view text, int path_count = 16) {
  std::istringstream is{std::string(text)};
  return parse_plan(is, path_count);
}

inline void emit_plan(std::ostream& os, const DrapingPlan& plan) {
  if (!plan.name.empty()) os << "# plan: " << plan.name << '\n';
  for (const auto& a : plan.actions) os << to_string(a) << '\n';
}

inline std::string emit_plan(const DrapingPlan& plan) {
  std::ostringstream os;
  emit_plan(os, plan);
  return os.str();
}

inline nlohmann::json to_json(const ConstraintSet& cs) {
  nlohmann::json rel = nlohmann::json::array(), abs = nlohmann::json::array();
  for (const auto& c : cs.rel) rel.push_back({to_string(c.alpha), to_string(c.beta), to_string(c.gamma), c.lambda});
  for (const auto& c : cs.abs) abs.push_back({to_string(c.alpha), to_string(c.gamma), c.lambda});
  return {{"rel", rel}, {"abs", abs}};
}

inline ConstraintSet constraints_from_json(const nlohmann::json& j) {
  ConstraintSet cs;
  for (const auto& r : j.value("rel", nlohmann::json::array())) {
    RelConstraint c{kind_from_string(r.at(0).get<std::string>()), kind_from_string(r.at(1).get<std::string>()),
                    relation_from_string(r.at(2).get<std::string>()), r.at(3).get<int>()};
    if (c.alpha == c.beta) throw InputError("relative constraint needs distinct kinds");
    if (c.lambda < 0) throw InputError("lambda must be >= 0");
    cs.rel.push_back(c);
  }
  for (const auto& r : j.value("abs", nlohmann::json::array())) {
    AbsConstraint c{kind_from_string(r.at(0).get<std::string>()), relation_from_string(r.at(1).get<std::string>()),
                    r.at(2).get<int>()};
    if (c.lambda < 0) throw InputError("lambda must be >= 0");
    cs.abs.push_back(c);
  }
  return cs;
}

// ---------------------------------------------------------------------------
// Reference plans

namespace detail {
inline DrapingPlan expert_plan(std::string name, std::initializer_list<int> first_paths) {
  DrapingPlan p{std::move(name), {}};
  for (int i : first_paths) p.actions.push_back(Action::path(i));
  for (int i = 2; i <= 16; i += 2) p.actions.push_back(Action::path(i));
  p.actions.push_back(Action::peel());
  p.actions.push_back(Action::capture());
  p.actions.push_back(Action::end());
  return p;
}
}  // namespace detail

/// Expert initial plans: eight odd radial paths, the eight even ones in
/// order, then peel, capture, end.
inline DrapingPlan initial_plan_d1() { return detail::expert_plan("D1", {15, 9, 5, 13, 3, 7, 11, 1}); }
inline DrapingPlan initial_plan_d2() { return detail::expert_plan("D2", {3, 11, 7, 15, 1, 9, 5, 13}); }

/// Reference refined plans, used as structural references in tests.
inline DrapingPlan reference_refined_sheet1() {
  return {"refined-sheet1",
          {Action::path(3), Action::path(11), Action::path(7), Action::path(15), Action::path(1), Action::path(9),
           Action::peel(), Action::path(5), Action::path(13), Action::refinement(6), Action::capture(), Action::end()}};
}
inline DrapingPlan reference_refined_sheet2() {
  return {"refined-sheet2",
          {Action::path(7), Action::path(15), Action::path(5), Action::path(1), Action::path(13), Action::path(9),
           Action::peel(), Action::path(3), Action::path(11), Action::refinement(4), Action::capture(), Action::end()}};
}

}  // namespace drape
