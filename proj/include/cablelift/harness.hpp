#pragma once

#include "cablelift/closed_loop.hpp"
#include "cablelift/run_log.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace cablelift {

struct RunOptions {
  /// Called after every control tick.
  std::function<void(const TickRecord&, const ClosedLoop&)> on_tick;
  bool keep_records = true;
};

struct RunResult {
  std::string scenario;
  AllocationMode mode = AllocationMode::QpCascade;
  std::uint64_t seed = 0;
  RunMetrics metrics;
  std::vector<TickRecord> records;
};

/// Replays the command script of a TeleopLog trajectory against a closed loop.
class ScriptedTeleop {
 public:
  ScriptedTeleop(const TrajectorySpec& spec, ClosedLoop& loop);
  /// Applies commands due at `t` and returns the reference for this tick.
  ReferenceSetpoint reference(double t);

 private:
  const TrajectorySpec& spec_;
  ClosedLoop& loop_;
  VelocityReference vr_;
  std::size_t next_ = 0;
};

/// Closed-loop run over the scenario duration. An AbortedRun is recorded in the
/// metrics (partial metrics up to the abort) rather than thrown.
RunResult run(const Scenario& scenario, AllocationMode mode, const RunOptions& options = {});
/// Runs with the scenario's own allocation mode.
RunResult run(const Scenario& scenario, const RunOptions& options = {});

struct CompareResult {
  RunResult baseline;
  RunResult qp;
  Json report;
};

/// Both modes from the same initial state and seed.
CompareResult compare(const Scenario& scenario);
Json compare_report(const Scenario& scenario, const RunResult& baseline, const RunResult& qp);

Json summary_json(const Scenario& scenario, const RunResult& result, bool include_timing = true);

/// ticks.jsonl, ticks.csv, summary.json and PNG plots.
void write_run(const std::filesystem::path& dir, const Scenario& scenario, const RunResult& result,
               bool plots = true);
/// baseline/ and qp/ run directories plus report.json and min_distance.png.
void write_compare(const std::filesystem::path& dir, const Scenario& scenario, const CompareResult& result,
                   bool plots = true);

/// Smallest r_i + r_j over all pairs.
double min_radius_sum(const Rig& rig);

}  // namespace cablelift
