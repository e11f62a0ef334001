#pragma once

// Per-trial and per-plan statistics over experiment logs: average total
// paths per (sheet, plan) and improvement of refined plans over the best
// initial plan of the same sheet.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drape/experiment_log.hpp"

namespace drape {

/// Half-away-from-zero rounding to `digits` decimals.
inline double round_to(double x, int digits) {
  const double s = std::pow(10.0, digits);
  return std::round(x * s) / s;
}

struct ReportRow {
  std::string sheet;
  std::string plan;
  std::uint64_t trial = 0;  // seed of the run
  int correction_cycles = 0;
  int correction_paths = 0;
  int total_paths = 0;
};

struct PlanSummary {
  std::string sheet;
  std::string plan;
  bool refined = false;
  int paths_in_plan = 0;
  std::vector<int> totals;
  double mean = 0.0;     // exact arithmetic mean
  double average = 0.0;  // mean shown to one decimal
  std::optional<double> improvement;  // percent, refined plans only
  std::string baseline;               // initial plan the improvement refers to
};

struct Report {
  std::vector<ReportRow> rows;
  std::vector<PlanSummary> plans;  // ordered by sheet, initial plans first, then name
};

/// Improvement in percent, computed from the displayed (one-decimal)
/// averages and itself rounded to one decimal.
inline double improvement_percent(double best_initial_avg, double refined_avg) {
  if (best_initial_avg <= 0.0) return 0.0;
  return round_to(100.0 * (best_initial_avg - refined_avg) / best_initial_avg, 1);
}

/// Groups logs by (sheet, plan). Refined plans are compared with the
/// initial plan named `baseline` when the sheet has one, otherwise with the
/// initial plan of lowest average.
inline Report build_report(const std::vector<ExperimentLog>& logs, const std::optional<std::string>& baseline = {}) {
  Report r;
  std::map<std::pair<std::string, std::string>, PlanSummary> groups;
  for (const auto& log : logs) {
    r.rows.push_back({log.sheet, log.plan.name, log.seed, log.correction_cycles, log.correction_paths, log.total_paths});
    auto& g = groups[{log.sheet, log.plan.name}];
    g.sheet = log.sheet;
    g.plan = log.plan.name;
    g.refined = log.refined();
    g.paths_in_plan = log.plan_paths;
    g.totals.push_back(log.total_paths);
  }
  std::map<std::string, const PlanSummary*> best_initial;
  for (auto& [key, g] : groups) {
    double sum = 0.0;
    for (int t : g.totals) sum += t;
    g.mean = sum / static_cast<double>(g.totals.size());
    g.average = round_to(g.mean, 1);
  }
  for (const auto& [key, g] : groups) {
    if (g.refined) continue;
    auto& slot = best_initial[g.sheet];
    const bool named = baseline && g.plan == *baseline;
    const bool slot_named = slot && baseline && slot->plan == *baseline;
    if (!slot || named || (!slot_named && g.average < slot->average)) slot = &g;
  }
  for (auto& [key, g] : groups) {
    if (g.refined)
      if (auto it = best_initial.find(g.sheet); it != best_initial.end()) {
        g.improvement = improvement_percent(it->second->average, g.average);
        g.baseline = it->second->plan;
      }
    r.plans.push_back(g);
  }
  std::stable_sort(r.plans.begin(), r.plans.end(), [](const PlanSummary& a, const PlanSummary& b) {
    if (a.sheet != b.sheet) return a.sheet < b.sheet;
    if (a.refined != b.refined) return !a.refined;
    return a.plan < b.plan;
  });
  std::stable_sort(r.rows.begin(), r.rows.end(), [](const ReportRow& a, const ReportRow& b) {
    if (a.sheet != b.sheet) return a.sheet < b.sheet;
    return a.plan < b.plan;
  });
  return r;
}

inline std::string format_fixed(double x, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << x;
  return os.str();
}

inline std::string to_text(const Report& r) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "sheet" << std::setw(14) << "plan" << std::right << std::setw(22) << "trial"
     << std::setw(8) << "cycles" << std::setw(8) << "corr" << std::setw(8) << "total" << '\n';
  for (const auto& row : r.rows)
    os << std::left << std::setw(10) << row.sheet << std::setw(14) << row.plan << std::right << std::setw(22)
       << row.trial << std::setw(8) << row.correction_cycles << std::setw(8) << row.correction_paths << std::setw(8)
       << row.total_paths << '\n';
  os << '\n'
     << std::left << std::setw(10) << "sheet" << std::setw(14) << "plan" << std::right << std::setw(8) << "trials"
     << std::setw(10) << "in-plan" << std::setw(10) << "average" << std::setw(14) << "improvement" << '\n';
  for (const auto& p : r.plans)
    os << std::left << std::setw(10) << p.sheet << std::setw(14) << p.plan << std::right << std::setw(8)
       << p.totals.size() << std::setw(10) << p.paths_in_plan << std::setw(10) << format_fixed(p.average, 1)
       << std::setw(14) << (p.improvement ? format_fixed(*p.improvement, 1) + "%" : std::string("-"))
       << (p.baseline.empty() ? std::string{} : "  " + p.baseline) << '\n';
  return os.str();
}

inline nlohmann::json to_json(const Report& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"sheet", row.sheet},
                    {"plan", row.plan},
                    {"trial", row.trial},
                    {"correction_cycles", row.correction_cycles},
                    {"correction_paths", row.correction_paths},
                    {"total_paths", row.total_paths}});
  nlohmann::json plans = nlohmann::json::array();
  for (const auto& p : r.plans) {
    nlohmann::json j = {{"sheet", p.sheet},       {"plan", p.plan},       {"refined", p.refined},
                        {"paths_in_plan", p.paths_in_plan}, {"totals", p.totals}, {"mean", p.mean},
                        {"average", p.average}};
    j["improvement_percent"] = p.improvement ? nlohmann::json(*p.improvement) : nlohmann::json(nullptr);
    j["baseline"] = p.baseline.empty() ? nlohmann::json(nullptr) : nlohmann::json(p.baseline);
    plans.push_back(std::move(j));
  }
  return {{"rows", rows}, {"plans", plans}};
}

}  // namespace drape
