#pragma once

// Command-line surface: run configuration, file I/O and the five
// subcommands. Exit codes: 0 ok, 1 runtime failure, 2 input validation.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "drape/effectiveness.hpp"
#include "drape/error.hpp"
#include "drape/experiment_log.hpp"
#include "drape/plan.hpp"
#include "drape/report.hpp"
#include "drape/search.hpp"
#include "drape/simulator.hpp"

namespace drape::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kInputError = 2 };

struct RunConfig {
  std::string sheet = "sheet1";
  std::optional<fs::path> ground_truth_path;
  std::optional<fs::path> constraints_path;
  std::optional<fs::path> search_path;
  std::vector<std::uint64_t> seeds;
  fs::path out = "out";

  GroundTruthParams ground_truth;
  std::optional<ConstraintSet> constraints;
  SearchConfig search;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline nlohmann::json read_json_file(const fs::path& p) {
  try {
    return nlohmann::json::parse(read_file(p));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(p.string() + ": " + e.what());
  }
}

inline void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + p.string());
  out << content;
}

/// Loads a run configuration. Referenced files are resolved against the
/// config file's directory and must exist.
inline RunConfig load_run_config(const fs::path& path) {
  const auto j = read_json_file(path);
  const fs::path base = path.parent_path();
  auto resolve = [&](const char* key) -> std::optional<fs::path> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    fs::path p = j[key].get<std::string>();
    if (p.is_relative()) p = base / p;
    if (!fs::exists(p)) throw InputError(std::string(key) + " file not found: " + p.string());
    return p;
  };
  RunConfig c;
  try {
    c.sheet = j.value("sheet", c.sheet);
    c.ground_truth_path = resolve("ground_truth");
    c.constraints_path = resolve("constraints");
    c.search_path = resolve("search");
    c.seeds = j.value("seeds", c.seeds);
    if (j.contains("out")) {
      c.out = j["out"].get<std::string>();
      if (c.out.is_relative()) c.out = base / c.out;
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  try {
    if (c.ground_truth_path) c.ground_truth = ground_truth_from_json(read_json_file(*c.ground_truth_path));
    if (c.constraints_path) c.constraints = constraints_from_json(read_json_file(*c.constraints_path));
    if (c.search_path) c.search = search_config_from_json(read_json_file(*c.search_path));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(e.what());
  }
  c.ground_truth.validate();
  builtin_sheet(c.sheet);
  return c;
}

inline DrapingPlan load_plan(const fs::path& p, int path_count) {
  std::istringstream in(read_file(p));
  try {
    DrapingPlan plan = parse_plan(in, path_count);
    if (plan.name.empty()) plan.name = p.stem().string();
    return plan;
  } catch (const InputError& e) {
    throw InputError(p.string() + ": " + e.what());
  }
}

inline ExperimentLog load_log(const fs::path& p) {
  std::istringstream in(read_file(p));
  try {
    return read_log(in);
  } catch (const InputError& e) {
    throw InputError(p.string() + ": " + e.what());
  }
}

inline std::string log_stem(const ExperimentLog& log) {
  return log.sheet + "-" + log.plan.name + "-" + std::to_string(log.seed);
}

// ---------------------------------------------------------------------------
// Commands

/// Runs every plan under every seed; writes one log per run plus its initial
/// capture (and all captures when asked). Returns the log paths.
inline std::vector<fs::path> cmd_simulate(const std::vector<fs::path>& plan_files, const RunConfig& cfg,
                                          const ConstraintSet& default_constraints, bool all_captures,
                                          std::ostream& out) {
  if (plan_files.empty()) throw InputError("no plan files given");
  if (cfg.seeds.empty()) throw InputError("at least one seed is required");
  const SheetSpec spec = builtin_sheet(cfg.sheet);
  const ConstraintSet cs = cfg.constraints.value_or(default_constraints);
  std::vector<DrapingPlan> plans;
  for (const auto& f : plan_files) {
    DrapingPlan plan = load_plan(f, cfg.ground_truth.path_count);
    if (auto v = validate(plan, cs); !v.empty()) {
      std::ostringstream msg;
      msg << f.string() << ": plan violates constraints";
      for (const auto& x : v) msg << "\n  " << x.constraint << ": " << x.message;
      throw InputError(msg.str());
    }
    plans.push_back(std::move(plan));
  }
  std::vector<fs::path> written;
  for (const auto& plan : plans) {
    for (std::uint64_t seed : cfg.seeds) {
      const ExperimentLog log = run_experiment(plan, spec, cfg.ground_truth, seed, cs);
      const std::string stem = log_stem(log);
      std::ostringstream body;
      write_log(body, log);
      write_file(cfg.out / (stem + ".jsonl"), body.str());
      std::ostringstream caps;
      if (all_captures) {
        write_captures(caps, log.captures);
        write_file(cfg.out / (stem + ".captures.jsonl"), caps.str());
      }
      std::ostringstream first;
      write_captures(first, std::span<const CaptureFrame>(log.captures.data(), 1));
      write_file(cfg.out / (stem + ".initial.jsonl"), first.str());
      out << stem << ": plan " << log.plan_paths << ", correction " << log.correction_paths << " in "
          << log.correction_cycles << " cycles, total " << log.total_paths << (log.converged ? "" : " (not converged)")
          << '\n';
      written.push_back(cfg.out / (stem + ".jsonl"));
    }
  }
  return written;
}

inline fs::path cmd_learn(const std::vector<fs::path>& log_files, const fs::path& out_dir, std::ostream& out) {
  if (log_files.empty()) throw InputError("learn needs at least one log file");
  std::vector<ExperimentLog> logs;
  for (const auto& f : log_files) logs.push_back(load_log(f));
  const EffectivenessModel model = aggregate(logs);
  const fs::path path = out_dir / "model.json";
  write_file(path, to_json(model).dump(1) + "\n");
  out << "experiments: " << model.experiments << '\n';
  out << "sectors: " << model.sector_count << '\n';
  int singletons = 0;
  for (const auto& [key, bucket] : model.table) {
    out << bucket_key_string(key) << ": " << bucket.samples.size();
    if (bucket.singleton()) {
      out << " (single sample, zero variance)";
      ++singletons;
    }
    out << '\n';
  }
  if (singletons > 0) out << "warning: " << singletons << " buckets hold a single sample\n";
  return path;
}

inline fs::path cmd_refine(const fs::path& model_file, const fs::path& capture_file, const RunConfig& cfg,
                           const std::string& name, std::ostream& out) {
  const EffectivenessModel model = [&] {
    try {
      return model_from_json(read_json_file(model_file));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(model_file.string() + ": " + e.what());
    }
  }();
  if (model.empty()) throw InputError("no data: model " + model_file.string() + " is empty");
  std::istringstream caps(read_file(capture_file));
  const auto frames = read_captures(caps);
  if (frames.empty()) throw InputError(capture_file.string() + ": no capture frames");
  const SheetSpec spec = builtin_sheet(cfg.sheet);
  if (model.sector_count != spec.geometry.sector_count)
    throw InputError("model has " + std::to_string(model.sector_count) + " sectors, sheet has " +
                     std::to_string(spec.geometry.sector_count));
  const SheetState initial = build_state(frames.front(), spec.geometry, cfg.ground_truth.state);
  SearchConfig sc = cfg.search;
  sc.path_count = cfg.ground_truth.path_count;
  const RefineResult res = refine_plan(initial, model, cfg.constraints.value_or(layup_constraints()), sc, name);
  const fs::path plan_path = cfg.out / (name + ".plan");
  write_file(plan_path, emit_plan(res.plan));
  write_file(cfg.out / (name + ".audit.json"), to_json(res).dump(1) + "\n");
  out << emit_plan(res.plan);
  out << "path-equivalents: " << res.plan.path_equivalents() << ", estimated cost " << res.cost << ", stopped on "
      << res.termination << '\n';
  return plan_path;
}

inline Report cmd_report(const std::vector<fs::path>& log_files, const std::optional<fs::path>& out_dir,
                         std::ostream& out, const std::optional<std::string>& baseline = {}) {
  if (log_files.empty()) throw InputError("report needs at least one log file");
  std::vector<ExperimentLog> logs;
  for (const auto& f : log_files) logs.push_back(load_log(f));
  const Report r = build_report(logs, baseline);
  const std::string text = to_text(r);
  out << text;
  if (out_dir) {
    write_file(*out_dir / "report.txt", text);
    write_file(*out_dir / "report.json", to_json(r).dump(1) + "\n");
  }
  return r;
}

// ---------------------------------------------------------------------------

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Draping-plan refinement: simulate, learn, refine, evaluate, report"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration (JSON)");
    sub->add_option("--seed", seeds, "seeds (override the config)");
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
  };

  std::vector<std::string> files;
  bool all_captures = false;
  auto* sim = app.add_subcommand("simulate", "execute plans on the simulator, one log per seed");
  common(sim);
  sim->add_option("plans", files, "plan files")->required();
  sim->add_flag("--all-captures", all_captures, "also write every capture frame");

  auto* evaluate = app.add_subcommand("evaluate", "simulate a refined plan");
  common(evaluate);
  evaluate->add_option("plans", files, "plan files")->required();
  evaluate->add_flag("--all-captures", all_captures, "also write every capture frame");

  auto* learn = app.add_subcommand("learn", "aggregate logs into an effectiveness model");
  common(learn);
  learn->add_option("logs", files, "experiment logs");

  std::string model_file, capture_file, name = "refined";
  auto* refine = app.add_subcommand("refine", "search for a refined plan");
  common(refine);
  refine->add_option("--model", model_file, "model file")->required();
  refine->add_option("--initial", capture_file, "initial capture (JSON lines)")->required();
  refine->add_option("--name", name, "plan name");

  auto* report = app.add_subcommand("report", "tabulate logs");
  common(report);
  report->add_option("logs", files, "experiment logs")->required();
  std::string baseline;
  report->add_option("--baseline", baseline, "initial plan to compare refined plans with (default: lowest average)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    if (!seeds.empty()) cfg.seeds = seeds;
    if (!out_dir.empty()) cfg.out = out_dir;

    std::vector<fs::path> paths(files.begin(), files.end());
    if (sim->parsed()) {
      cmd_simulate(paths, cfg, initial_plan_constraints(), all_captures, out);
    } else if (evaluate->parsed()) {
      cmd_simulate(paths, cfg, layup_constraints(), all_captures, out);
    } else if (learn->parsed()) {
      cmd_learn(paths, cfg.out, out);
    } else if (refine->parsed()) {
      cmd_refine(model_file, capture_file, cfg, name, out);
    } else if (report->parsed()) {
      cmd_report(paths, out_dir.empty() ? std::nullopt : std::optional<fs::path>(cfg.out), out,
                 baseline.empty() ? std::nullopt : std::optional<std::string>(baseline));
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kOk;
}

}  // namespace drape::cli
