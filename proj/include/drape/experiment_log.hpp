#pragma once

// Record of one simulated layup run and its JSON-lines file format:
// a header record, one record per executed step, one per correction cycle,
// and a trailing summary record.

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drape/error.hpp"
#include "drape/plan.hpp"
#include "drape/sheet_state.hpp"

namespace drape {

inline constexpr int kLogFormatVersion = 1;

struct StepRecord {
  Action action;
  int capture_before = -1;  // capture indices (t) bracketing the action
  int capture_after = -1;
  std::optional<SheetState> before;
  std::optional<SheetState> after;
  std::vector<PathGeometry> paths;  // strokes executed by path/refinement
};

struct CorrectionRecord {
  int cycle = 0;
  int capture = -1;
  std::vector<PathGeometry> paths;
};

struct ExperimentLog {
  DrapingPlan plan;
  std::string sheet;
  SheetGeometry geometry;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  std::vector<CorrectionRecord> corrections;
  int plan_paths = 0;
  int correction_cycles = 0;
  int correction_paths = 0;
  int total_paths = 0;
  bool converged = true;

  /// Captures are kept in memory only; the log file references them by t.
  std::vector<CaptureFrame> captures;

  bool refined() const { return plan.count(ActionKind::refinement) > 0; }
};

inline nlohmann::json to_json(const PathGeometry& p) {
  return {p.start.x(), p.start.y(), p.end.x(), p.end.y(), p.half_width};
}

inline PathGeometry path_from_json(const nlohmann::json& j) {
  return {{j.at(0).get<double>(), j.at(1).get<double>()}, {j.at(2).get<double>(), j.at(3).get<double>()},
          j.at(4).get<double>()};
}

inline void write_log(std::ostream& os, const ExperimentLog& log) {
  nlohmann::json plan = nlohmann::json::array();
  for (const auto& a : log.plan.actions) plan.push_back(to_string(a));
  nlohmann::json header = {{"type", "header"},   {"version", kLogFormatVersion}, {"plan_name", log.plan.name},
                           {"plan", plan},       {"sheet", log.sheet},          {"geometry", to_json(log.geometry)},
                           {"seed", log.seed},   {"refined", log.refined()}};
  os << header.dump() << '\n';
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    const auto& s = log.steps[i];
    nlohmann::json rec = {{"type", "step"},
                          {"index", i + 1},
                          {"action", to_string(s.action)},
                          {"capture_before", s.capture_before},
                          {"capture_after", s.capture_after}};
    rec["state_before"] = s.before ? to_json(*s.before) : nlohmann::json(nullptr);
    rec["state_after"] = s.after ? to_json(*s.after) : nlohmann::json(nullptr);
    nlohmann::json paths = nlohmann::json::array();
    for (const auto& p : s.paths) paths.push_back(to_json(p));
    rec["paths"] = std::move(paths);
    os << rec.dump() << '\n';
  }
  for (const auto& c : log.corrections) {
    nlohmann::json paths = nlohmann::json::array();
    for (const auto& p : c.paths) paths.push_back(to_json(p));
    os << nlohmann::json{{"type", "correction"}, {"cycle", c.cycle}, {"capture", c.capture}, {"paths", paths}}.dump()
       << '\n';
  }
  nlohmann::json summary = {{"type", "summary"},
                            {"plan_paths", log.plan_paths},
                            {"correction_cycles", log.correction_cycles},
                            {"correction_paths", log.correction_paths},
                            {"total_paths", log.total_paths},
                            {"converged", log.converged}};
  os << summary.dump() << '\n';
}

/// Parses a log file. Step records may omit states (null) and may be absent
/// entirely; header and summary are required.
inline ExperimentLog read_log(std::istream& is) {
  ExperimentLog log;
  bool have_header = false, have_summary = false;
  std::string line;
  int record = 0;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++record;
    try {
      const auto j = nlohmann::json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        if (j.at("version").get<int>() != kLogFormatVersion) throw InputError("unsupported log version");
        log.plan.name = j.at("plan_name").get<std::string>();
        for (const auto& a : j.at("plan")) log.plan.actions.push_back(parse_action(a.get<std::string>()));
        log.sheet = j.at("sheet").get<std::string>();
        log.geometry = geometry_from_json(j.at("geometry"));
        log.seed = j.at("seed").get<std::uint64_t>();
        have_header = true;
      } else if (type == "step") {
        if (!have_header) throw InputError("step before header");
        StepRecord s;
        s.action = parse_action(j.at("action").get<std::string>());
        s.capture_before = j.at("capture_before").get<int>();
        s.capture_after = j.at("capture_after").get<int>();
        if (!j.at("state_before").is_null()) s.before = state_from_json(j.at("state_before"), log.geometry);
        if (!j.at("state_after").is_null()) s.after = state_from_json(j.at("state_after"), log.geometry);
        for (const auto& p : j.value("paths", nlohmann::json::array())) s.paths.push_back(path_from_json(p));
        log.steps.push_back(std::move(s));
      } else if (type == "correction") {
        CorrectionRecord c;
        c.cycle = j.at("cycle").get<int>();
        c.capture = j.at("capture").get<int>();
        for (const auto& p : j.at("paths")) c.paths.push_back(path_from_json(p));
        log.corrections.push_back(std::move(c));
      } else if (type == "summary") {
        log.plan_paths = j.at("plan_paths").get<int>();
        log.correction_cycles = j.at("correction_cycles").get<int>();
        log.correction_paths = j.at("correction_paths").get<int>();
        log.total_paths = j.at("total_paths").get<int>();
        log.converged = j.at("converged").get<bool>();
        have_summary = true;
      } else {
        throw InputError("unknown record type '" + type + "'");
      }
    } catch (const std::exception& e) {
      throw InputError("log record " + std::to_string(record) + ": " + e.what());
    }
  }
  if (!have_header) throw InputError("log has no header record");
  if (!have_summary) throw InputError("log has no summary record");
  if (log.total_paths != log.plan_paths + log.correction_paths)
    throw InputError("log summary: total_paths != plan_paths + correction_paths");
  if (log.plan_paths != log.plan.path_equivalents())
    throw InputError("log summary: plan_paths does not match the plan's path count");
  return log;
}

}  // namespace drape
