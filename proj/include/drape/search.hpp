#pragma once

// Refined-plan search: bounded tree search over the action space with
// constraint pruning, top-b_f expansion by heuristic score, depth-d_f
// lookahead and commit-one-action-per-stage.

#include <algorithm>
#include <climits>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drape/cost.hpp"
#include "drape/effectiveness.hpp"
#include "drape/error.hpp"
#include "drape/plan.hpp"
#include "drape/refinement_paths.hpp"
#include "drape/sheet_state.hpp"

namespace drape {

inline constexpr int kUnbounded = INT_MAX;

struct SearchConfig {
  int branching = 4;   // b_f; kUnbounded keeps every feasible action
  int depth = 3;       // d_f, counted from the decision node
  int horizon = 20;    // maximum plan length m
  int path_count = 16;
  // Each geometry path at most once: the learned deltas come from plans
  // that run every path a single time, so a rerun has no data behind it.
  bool distinct_paths = true;
  CostWeights weights;
  double epsilon_conv = 0.1;   // stop when no action improves f by this much
  bool sampled = false;        // lookahead under sampled propagation
  int rollouts = 8;            // averaged lookaheads when sampled
  std::uint64_t seed = 0;

  void validate() const {
    if (branching < 1 || depth < 1 || horizon < 1 || path_count < 1)
      throw InputError("branching, depth, horizon and path_count must be positive");
    if (sampled && rollouts < 1) throw InputError("rollouts must be positive");
  }
};

struct SearchNode {
  SheetState state;
  DrapingPlan prefix;
  double cost = 0.0;  // sum of c(a_i) + f(X_i) over the prefix
  int unmodeled = 0;
  bool ended = false;

  double value(const CostWeights& w) const { return cost + w.w_unk * unmodeled; }
};

/// Memoised prefix feasibility; the answer depends only on the kinds.
class FeasibilityCache {
 public:
  FeasibilityCache(const ConstraintSet& cs, int horizon) : cs_(cs), horizon_(horizon) {}

  bool operator()(const DrapingPlan& prefix) {
    std::vector<ActionKind> key;
    key.reserve(prefix.size());
    for (const auto& a : prefix.actions) key.push_back(a.kind);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    const bool ok = static_cast<int>(prefix.size()) <= horizon_ && prefix_feasible(prefix, cs_, horizon_);
    memo_.emplace(std::move(key), ok);
    return ok;
  }

  /// Memoised completion_suffix for the prefix.
  const std::optional<std::vector<ActionKind>>& suffix(const DrapingPlan& prefix);

  const ConstraintSet& constraints() const { return cs_; }
  int horizon() const { return horizon_; }

 private:
  const ConstraintSet& cs_;
  int horizon_;
  std::map<std::vector<ActionKind>, bool> memo_;
  std::map<std::vector<ActionKind>, std::optional<std::vector<ActionKind>>> suffix_memo_;
};

inline SearchNode root_node(const SheetState& initial, const std::string& name = "refined") {
  return {initial, {name, {}}, 0.0, 0, false};
}

/// Candidate actions in tie-break order: paths by index, then peel, capture,
/// refinement, end. Refinement asks for one stroke per live sector (min 1).
inline std::vector<Action> candidate_actions(const SearchNode& node, const SearchConfig& cfg) {
  std::vector<Action> out;
  out.reserve(static_cast<std::size_t>(cfg.path_count) + 4);
  for (int i = 1; i <= cfg.path_count; ++i)
    if (!cfg.distinct_paths || std::find(node.prefix.actions.begin(), node.prefix.actions.end(), Action::path(i)) ==
                                   node.prefix.actions.end())
      out.push_back(Action::path(i));
  out.push_back(Action::peel());
  out.push_back(Action::capture());
  out.push_back(Action::refinement(std::max(1, node.state.active_sector_count())));
  out.push_back(Action::end());
  return out;
}

inline SearchNode make_child(const SearchNode& node, const Action& a, const EffectivenessModel& model,
                             const SearchConfig& cfg, PropagationMode mode = {}) {
  SearchNode child;
  child.state = propagate(node.state, a, model, mode);
  child.prefix = node.prefix;
  child.prefix.actions.push_back(a);
  child.cost = node.cost + action_cost(a, cfg.weights) + state_utility(child.state, cfg.weights);
  child.unmodeled = node.unmodeled + (model.covers(a) ? 0 : 1);
  child.ended = a.kind == ActionKind::end;
  return child;
}

struct ScoredAction {
  Action action;
  double score = 0.0;
};

/// Feasible actions ranked by heuristic score (unmodeled actions carry the
/// w_unk penalty); stable, so equal scores keep tie-break order.
inline std::vector<ScoredAction> ranked_actions(const SearchNode& node, const EffectivenessModel& model,
                                                FeasibilityCache& feasible, const SearchConfig& cfg) {
  std::vector<ScoredAction> out;
  if (node.ended || static_cast<int>(node.prefix.size()) >= feasible.horizon()) return out;
  DrapingPlan trial = node.prefix;
  trial.actions.emplace_back();
  for (const Action& a : candidate_actions(node, cfg)) {
    trial.actions.back() = a;
    if (!feasible(trial)) continue;
    double s = effectiveness_score(a, node.state, model, cfg.weights);
    if (!model.covers(a)) s += cfg.weights.w_unk;
    out.push_back({a, s});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& l, const auto& r) { return l.score < r.score; });
  return out;
}

inline std::vector<SearchNode> expand(const SearchNode& node, const EffectivenessModel& model,
                                      FeasibilityCache& feasible, const SearchConfig& cfg, PropagationMode mode = {}) {
  auto ranked = ranked_actions(node, model, feasible, cfg);
  if (cfg.branching != kUnbounded && static_cast<int>(ranked.size()) > cfg.branching)
    ranked.resize(static_cast<std::size_t>(cfg.branching));
  std::vector<SearchNode> children;
  children.reserve(ranked.size());
  for (const auto& r : ranked) children.push_back(make_child(node, r.action, model, cfg, mode));
  return children;
}

namespace detail {

/// Kinds enumerated for completion suffixes, in preference order, so that
/// capture lands immediately before end.
inline constexpr std::array<ActionKind, 5> kSuffixOrder{ActionKind::path, ActionKind::peel, ActionKind::refinement,
                                                        ActionKind::capture, ActionKind::end};

inline bool find_suffix(std::vector<ActionKind>& seq, std::size_t target, const ConstraintSet& cs) {
  if (seq.size() == target) return satisfies(seq, cs) && !seq.empty() && seq.back() == ActionKind::end;
  if (prefix_dead(seq, cs)) return false;
  if (!seq.empty() && seq.back() == ActionKind::end) return false;
  for (ActionKind k : kSuffixOrder) {
    seq.push_back(k);
    if (find_suffix(seq, target, cs)) return true;
    seq.pop_back();
  }
  return false;
}

}  // namespace detail

/// Shortest kind sequence that completes `prefix` into a valid plan (ending
/// in end unless the prefix is already valid), first in suffix preference
/// order; empty optional if none fits.
inline std::optional<std::vector<ActionKind>> completion_suffix(const DrapingPlan& prefix, const ConstraintSet& cs,
                                                                int horizon) {
  std::vector<ActionKind> base;
  for (const auto& a : prefix.actions) base.push_back(a.kind);
  if (detail::satisfies(base, cs)) return std::vector<ActionKind>{};
  for (std::size_t len = base.size(); len <= static_cast<std::size_t>(horizon); ++len) {
    std::vector<ActionKind> seq = base;
    if (detail::find_suffix(seq, len, cs)) return std::vector<ActionKind>(seq.begin() + base.size(), seq.end());
  }
  return std::nullopt;
}

/// Cost of closing `node` with its completion suffix when the remaining
/// actions are assumed to leave the state unchanged: each suffix action
/// pays c(a) + f(state). Zero when the prefix needs no completion.
inline double completion_cost(const SearchNode& node, FeasibilityCache& feasible, const SearchConfig& cfg) {
  const auto suffix = feasible.suffix(node.prefix);
  if (!suffix) return std::numeric_limits<double>::infinity();
  const double f = state_utility(node.state, cfg.weights);
  double total = 0.0;
  for (ActionKind k : *suffix) {
    const Action a = k == ActionKind::refinement ? Action::refinement(std::max(1, node.state.active_sector_count()))
                                                 : Action{k, k == ActionKind::path ? 1 : 0};
    total += action_cost(a, cfg.weights) + f;
  }
  return total;
}

namespace detail {

inline double leaf_value(const SearchNode& node, FeasibilityCache& feasible, const SearchConfig& cfg) {
  // An ended plan is fully priced by its accumulated cost. An open node adds
  // f(state) as cost-to-go plus the price of the actions the constraints
  // still demand, so deferring mandatory actions does not look cheap.
  if (node.ended) return node.value(cfg.weights);
  return node.value(cfg.weights) + state_utility(node.state, cfg.weights) + completion_cost(node, feasible, cfg);
}

inline double lookahead(const SearchNode& node, int depth, const EffectivenessModel& model, FeasibilityCache& feasible,
                        const SearchConfig& cfg, PropagationMode mode, std::uint64_t stream) {
  if (depth <= 0 || node.ended) return leaf_value(node, feasible, cfg);
  PropagationMode child_mode = mode;
  if (mode.sampled) child_mode.seed = mix_seed(mode.seed, stream);
  const auto children = expand(node, model, feasible, cfg, child_mode);
  if (children.empty()) {
    if (validate(node.prefix, feasible.constraints()).empty()) return leaf_value(node, feasible, cfg);
    return std::numeric_limits<double>::infinity();
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < children.size(); ++i)
    best = std::min(best, lookahead(children[i], depth - 1, model, feasible, cfg, mode, stream * 31 + i + 1));
  return best;
}

}  // namespace detail

/// Minimum over the leaves of the depth-limited subtree of (accumulated cost
/// + f(leaf)); ended leaves contribute their accumulated cost only. Under
/// sampled propagation the value is averaged over cfg.rollouts subtrees.
inline double lookahead_value(const SearchNode& node, int depth, const EffectivenessModel& model,
                              FeasibilityCache& feasible, const SearchConfig& cfg) {
  if (!cfg.sampled) return detail::lookahead(node, depth, model, feasible, cfg, PropagationMode::expectation(), 0);
  double sum = 0.0;
  for (int r = 0; r < cfg.rollouts; ++r)
    sum += detail::lookahead(node, depth, model, feasible, cfg, PropagationMode::sample(mix_seed(cfg.seed, r)), 1);
  return sum / cfg.rollouts;
}

inline double lookahead_value(const SearchNode& node, int depth, const EffectivenessModel& model,
                              const ConstraintSet& cs, const SearchConfig& cfg) {
  FeasibilityCache feasible(cs, cfg.horizon);
  return lookahead_value(node, depth, model, feasible, cfg);
}

/// Plan cost replayed from scratch: sum of c(a) + f(state) plus
/// the unmodeled-node penalty.
inline double plan_cost(const DrapingPlan& plan, const SheetState& initial, const EffectivenessModel& model,
                        const SearchConfig& cfg) {
  SearchNode node = root_node(initial, plan.name);
  for (const auto& a : plan.actions) node = make_child(node, a, model, cfg);
  return node.value(cfg.weights);
}

// ---------------------------------------------------------------------------

struct CandidateAudit {
  Action action;
  double score = 0.0;
  double lookahead = 0.0;
};

struct StepAudit {
  Action chosen;
  std::string phase;  // "search" or "completion"
  double node_cost = 0.0;
  std::vector<CandidateAudit> candidates;
};

struct RefineResult {
  DrapingPlan plan;
  double cost = 0.0;
  std::string termination;  // "end", "converged", "horizon"
  std::vector<StepAudit> audit;
};

inline const std::optional<std::vector<ActionKind>>& FeasibilityCache::suffix(const DrapingPlan& prefix) {
  std::vector<ActionKind> key;
  for (const auto& a : prefix.actions) key.push_back(a.kind);
  auto it = suffix_memo_.find(key);
  if (it == suffix_memo_.end()) it = suffix_memo_.emplace(std::move(key), completion_suffix(prefix, cs_, horizon_)).first;
  return it->second;
}

/// Largest one-step drop in f over the feasible actions at `node`.
inline double best_improvement(const SearchNode& node, const EffectivenessModel& model, FeasibilityCache& feasible,
                               const SearchConfig& cfg) {
  const double f0 = state_utility(node.state, cfg.weights);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& r : ranked_actions(node, model, feasible, cfg))
    best = std::max(best, f0 - state_utility(propagate(node.state, r.action, model), cfg.weights));
  return best;
}

inline RefineResult refine_plan(const SheetState& initial, const EffectivenessModel& model, const ConstraintSet& cs,
                                const SearchConfig& cfg, const std::string& name = "refined") {
  cfg.validate();
  if (model.empty()) throw InputError("no data: effectiveness model is empty");
  FeasibilityCache feasible(cs, cfg.horizon);
  RefineResult res;
  SearchNode node = root_node(initial, name);
  if (!feasible(node.prefix)) {
    const auto v = validate(node.prefix, cs);
    throw RuntimeFailure("no valid plan within horizon " + std::to_string(cfg.horizon) +
                         (v.empty() ? std::string{} : "; binding constraint " + v.front().constraint));
  }

  res.termination = "horizon";
  while (!node.ended && static_cast<int>(node.prefix.size()) < cfg.horizon) {
    if (best_improvement(node, model, feasible, cfg) < cfg.epsilon_conv) {
      res.termination = "converged";
      break;
    }
    const auto ranked = ranked_actions(node, model, feasible, cfg);
    auto children = expand(node, model, feasible, cfg);
    if (children.empty()) break;
    StepAudit step;
    step.phase = "search";
    std::size_t best = 0;
    double best_value = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < children.size(); ++i) {
      const double v = lookahead_value(children[i], cfg.depth - 1, model, feasible, cfg);
      step.candidates.push_back({children[i].prefix.actions.back(), ranked[i].score, v});
      if (v < best_value) {
        best_value = v;
        best = i;
      }
    }
    node = std::move(children[best]);
    step.chosen = node.prefix.actions.back();
    step.node_cost = node.cost;
    res.audit.push_back(std::move(step));
    if (node.ended) res.termination = "end";
  }

  if (!node.ended) {
    const auto suffix = completion_suffix(node.prefix, cs, cfg.horizon);
    if (!suffix) {
      DrapingPlan probe = node.prefix;
      const auto v = validate(probe, cs);
      throw RuntimeFailure("no valid completion within horizon " + std::to_string(cfg.horizon) +
                           (v.empty() ? std::string{} : "; binding constraint " + v.front().constraint));
    }
    for (ActionKind k : *suffix) {
      Action a;
      if (k == ActionKind::path) {
        // Best-scoring path at this node, preferring unused ones.
        a = Action::path(1);
        double best = std::numeric_limits<double>::infinity();
        const auto offered = candidate_actions(node, cfg);
        for (int i = 1; i <= cfg.path_count; ++i) {
          const bool unused = std::find(offered.begin(), offered.end(), Action::path(i)) != offered.end();
          if (!unused && offered.front().kind == ActionKind::path) continue;
          const double s = effectiveness_score(Action::path(i), node.state, model, cfg.weights) +
                           (model.covers(Action::path(i)) ? 0.0 : cfg.weights.w_unk);
          if (s < best) {
            best = s;
            a = Action::path(i);
          }
        }
      } else if (k == ActionKind::refinement) {
        a = Action::refinement(std::max(1, node.state.active_sector_count()));
      } else {
        a = Action{k, 0};
      }
      node = make_child(node, a, model, cfg);
      res.audit.push_back({a, "completion", node.cost, {}});
    }
  }

  res.plan = node.prefix;
  res.cost = node.value(cfg.weights);
  if (auto v = validate(res.plan, cs); !v.empty())
    throw RuntimeFailure("search produced an invalid plan; binding constraint " + v.front().constraint);
  return res;
}

// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const RefineResult& r) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : r.audit) {
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : s.candidates)
      cands.push_back({{"action", to_string(c.action)}, {"score", c.score}, {"lookahead", c.lookahead}});
    steps.push_back({{"chosen", to_string(s.chosen)}, {"phase", s.phase}, {"cost", s.node_cost}, {"candidates", cands}});
  }
  return {{"plan", r.plan.name}, {"cost", r.cost}, {"termination", r.termination}, {"steps", steps}};
}

inline nlohmann::json to_json(const SearchConfig& c) {
  return {{"branching", c.branching == kUnbounded ? nlohmann::json("unbounded") : nlohmann::json(c.branching)},
          {"depth", c.depth},
          {"horizon", c.horizon},
          {"path_count", c.path_count},
          {"distinct_paths", c.distinct_paths},
          {"weights", to_json(c.weights)},
          {"epsilon_conv", c.epsilon_conv},
          {"sampled", c.sampled},
          {"rollouts", c.rollouts},
          {"seed", c.seed}};
}

inline SearchConfig search_config_from_json(const nlohmann::json& j) {
  SearchConfig c;
  if (j.contains("branching")) {
    const auto& b = j["branching"];
    c.branching = b.is_string() ? kUnbounded : b.get<int>();
  }
  c.depth = j.value("depth", c.depth);
  c.horizon = j.value("horizon", c.horizon);
  c.path_count = j.value("path_count", c.path_count);
  c.distinct_paths = j.value("distinct_paths", c.distinct_paths);
  if (j.contains("weights")) c.weights = cost_weights_from_json(j["weights"]);
  c.epsilon_conv = j.value("epsilon_conv", c.epsilon_conv);
  c.sampled = j.value("sampled", c.sampled);
  c.rollouts = j.value("rollouts", c.rollouts);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

}  // namespace drape
