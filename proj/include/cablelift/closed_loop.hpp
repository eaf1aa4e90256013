#pragma once

#include "cablelift/scenario.hpp"

#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace cablelift {

/// Roll, pitch, yaw (ZYX) of R.
Vec3 rpy(const Mat3& R);

/// Everything recorded for one control tick.
struct TickRecord {
  std::int64_t tick = 0;
  double t = 0.0;
  ReferenceSetpoint ref;
  Vec3 p0 = Vec3::Zero();
  Vec3 v0 = Vec3::Zero();
  Vec3 rpy0 = Vec3::Zero();
  Vec3 position_error = Vec3::Zero();
  Vec3 orientation_error = Vec3::Zero();
  std::vector<Vec3> robots;
  std::vector<Vec3> q;
  std::vector<Vec3> mu;
  std::vector<double> thrust;
  double min_distance = 0.0;
  /// Smallest d_ij / (r_i + r_j).
  double min_clearance = 0.0;
  int saturated = 0;
  bool allocated = false;
  bool held = false;
  int qp_iterations = 0;
  int active_halfspaces = 0;
  std::string preset;
  // Wall-clock timings; excluded from the deterministic log.
  double fd_ms = 0.0;
  double svm_ms = 0.0;
  double tilt_ms = 0.0;
  double mu_ms = 0.0;
  double total_ms = 0.0;
};

/// Smallest d_ij / (r_i + r_j) over all pairs; optionally the smallest d_ij.
double min_clearance(const FullSystemState& state, const Rig& rig, double* min_distance = nullptr);

struct Stat {
  double mean = 0.0;
  double std = 0.0;
};

struct RunMetrics {
  std::int64_t samples = 0;
  Eigen::Array3d position_mean_cm = Eigen::Array3d::Zero();
  Eigen::Array3d position_std_cm = Eigen::Array3d::Zero();
  Eigen::Array3d orientation_mean_deg = Eigen::Array3d::Zero();
  Eigen::Array3d orientation_std_deg = Eigen::Array3d::Zero();
  double min_distance = std::numeric_limits<double>::infinity();
  double min_clearance = std::numeric_limits<double>::infinity();
  double min_distance_time = 0.0;
  Stat fd_ms, svm_ms, tilt_ms, mu_ms, total_ms;
  std::int64_t saturation_count = 0;
  std::int64_t infeasibility_count = 0;
  std::int64_t allocations = 0;
  double simulated_seconds = 0.0;
  bool aborted = false;
  std::string abort_reason;
};

/// Running mean and standard deviation (Welford).
class Accumulator {
 public:
  void add(double x);
  Stat stat() const;
  std::int64_t count() const { return n_; }

 private:
  std::int64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(double window_start = 0.0) : window_start_(window_start) {}
  void add(const TickRecord& rec);
  void abort(const std::string& reason, double t);
  RunMetrics finish() const;

 private:
  double window_start_;
  Accumulator pos_[3], ori_[3];
  Accumulator fd_, svm_, tilt_, mu_, total_;
  RunMetrics m_;
};

/// Scenario simulation advanced one control tick at a time. The reference is supplied
/// by the caller so the same loop serves scripted runs and teleoperation.
class ClosedLoop {
 public:
  /// Distances below this fraction of r_i + r_j abort the run.
  static constexpr double kHardFloor = 0.5;

  ClosedLoop(const Scenario& scenario, AllocationMode mode);

  /// Runs the control laws at the current state, then the simulation for one control
  /// period. Throws Error(AbortedRun) on a non-finite state, sustained infeasibility or
  /// a hard-floor violation; the state is left at the last valid value.
  const TickRecord& advance(const ReferenceSetpoint& ref);

  void set_preset(const std::optional<std::string>& name);
  /// Back to the initial equilibrium with fresh controller and allocator state.
  void reset();

  const FullSystemState& state() const { return state_; }
  const Scenario& scenario() const { return scenario_; }
  const Rig& rig() const { return scenario_.rig; }
  AllocationMode mode() const { return mode_; }
  std::int64_t tick() const { return tick_; }
  double time() const { return static_cast<double>(tick_) * scenario_.control_dt(); }
  const TickRecord& last() const { return record_; }
  const CableForceAllocator& allocator() const { return allocator_; }
  const ReferenceSetpoint& initial_reference() const { return initial_ref_; }
  const std::map<std::string, std::vector<Vec3>>& presets() const { return presets_; }

 private:
  Scenario scenario_;
  AllocationMode mode_;
  ReferenceSetpoint initial_ref_;
  FullSystemState initial_;
  FullSystemState state_;
  PayloadController controller_;
  CableForceAllocator allocator_;
  std::map<std::string, std::vector<Vec3>> presets_;
  std::vector<Vec3> mu_;
  std::vector<RobotInput> inputs_;
  static constexpr std::uint64_t kGustStream = 0x9e3779b97f4a7c15ULL;
  std::mt19937_64 gust_rng_;
  std::int64_t tick_ = 0;
  TickRecord record_;
};

/// Reference at time t for scripted trajectories (not TeleopLog).
ReferenceSetpoint scripted_reference(const TrajectorySpec& spec, double t);

}  // namespace cablelift
