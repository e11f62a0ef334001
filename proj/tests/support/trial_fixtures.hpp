#pragma once

// Reference per-trial results of the two expert plans and the refined plan
// on both sheets, as logs carrying only plan and summary fields.

#include <vector>

#include "drape/experiment_log.hpp"
#include "drape/plan.hpp"
#include "drape/simulator.hpp"

namespace drape::fixtures {

struct Trial {
  const char* sheet;
  int plan;  // 1 = D1, 2 = D2, 0 = refined
  int cycles;
  int correction;
  int total;
};

inline constexpr Trial kTrials[] = {
    {"sheet1", 1, 5, 17, 33}, {"sheet1", 1, 7, 30, 46}, {"sheet1", 1, 5, 16, 32},
    {"sheet1", 2, 7, 29, 45}, {"sheet1", 2, 2, 12, 28}, {"sheet1", 2, 4, 14, 30},
    {"sheet1", 0, 2, 5, 19},  {"sheet1", 0, 2, 5, 19},  {"sheet1", 0, 3, 8, 22},
    {"sheet2", 1, 2, 8, 24},  {"sheet2", 1, 2, 9, 25},  {"sheet2", 1, 3, 11, 27},
    {"sheet2", 2, 2, 12, 28}, {"sheet2", 2, 3, 9, 25},  {"sheet2", 2, 3, 13, 29},
    {"sheet2", 0, 1, 5, 17},  {"sheet2", 0, 3, 5, 17},  {"sheet2", 0, 2, 3, 15},
};

inline std::vector<ExperimentLog> trial_logs() {
  std::vector<ExperimentLog> logs;
  std::uint64_t trial = 0;
  for (const auto& t : kTrials) {
    ExperimentLog log;
    const std::string sheet = t.sheet;
    if (t.plan == 1) log.plan = initial_plan_d1();
    if (t.plan == 2) log.plan = initial_plan_d2();
    if (t.plan == 0) {
      log.plan = sheet == "sheet1" ? reference_refined_sheet1() : reference_refined_sheet2();
      log.plan.name = "refined";
    }
    log.sheet = sheet;
    log.geometry = builtin_sheet(sheet).geometry;
    log.seed = trial++ % 3 + 1;
    log.plan_paths = log.plan.path_equivalents();
    log.correction_cycles = t.cycles;
    log.correction_paths = t.correction;
    log.total_paths = t.total;
    logs.push_back(std::move(log));
  }
  return logs;
}

}  // namespace drape::fixtures
