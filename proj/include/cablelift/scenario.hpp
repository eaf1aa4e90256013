#pragma once

#include "cablelift/allocation.hpp"
#include "cablelift/trajectory.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <optional>
#include <string>
#include <vector>

namespace cablelift {

inline constexpr int kScenarioSchemaVersion = 1;

enum class CommandKind { Velocity, Nudge, Preset, Pause, Reset };

struct TeleopCommand {
  CommandKind kind = CommandKind::Velocity;
  Vec3 value = Vec3::Zero();
  /// Preset name; nullopt switches the preference off.
  std::optional<std::string> preset;
};

/// Command replayed at a given simulation time.
struct TimedCommand {
  double t = 0.0;
  TeleopCommand command;
};

enum class TrajectoryKind { Figure8, Hover, TeleopLog };

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::Hover;
  double period = 13.0;
  /// Used when peak_speed is not set.
  double scale = 0.3;
  std::optional<double> peak_speed;
  Vec3 center = Vec3(0.0, 0.0, 1.0);
  /// Linear payload yaw ramp [rad/s].
  double yaw_rate = 0.0;
  SmoothingLimits limits;
  std::vector<TimedCommand> commands;

  double resolved_scale() const;
  void validate() const;
};

/// Axis-aligned box, streamed for display only.
struct Obstacle {
  std::string name;
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();
};

struct Scenario {
  int schema_version = kScenarioSchemaVersion;
  std::string name = "scenario";
  Rig rig;
  ControllerGains gains;
  AllocatorConfig allocation;
  SimConfig sim;
  /// Simulation steps per control tick.
  int control_every = 4;
  /// Control ticks per allocation.
  int allocation_every = 1;
  TrajectorySpec trajectory;
  double duration = 10.0;
  /// Metrics ignore samples before this time.
  double metrics_start = 0.0;
  std::uint64_t seed = 0;
  /// Standard deviation of the initial payload position offset [m].
  double initial_offset = 0.0;
  std::vector<Obstacle> obstacles;
  /// Overrides for the preset table (directions payload towards robot, world frame).
  std::map<std::string, std::vector<Vec3>> presets;

  void validate() const;
  double control_dt() const { return sim.dt * control_every; }
  /// Built-in presets merged with the overrides.
  std::map<std::string, std::vector<Vec3>> preset_directions() const;
};

/// Named preferred cable directions. Line for 2 <= n <= 6, triangle for n = 3.
/// Throws Error(PresetUnavailable) otherwise.
std::map<std::string, std::vector<Vec3>> preset_table(const Rig& rig);

/// Reorders preset directions so that robot i receives the direction closest to its
/// current cable direction (minimal total squared distance over all permutations).
/// Keeps robots from being sent across each other when a preset is switched on.
std::vector<Vec3> assign_preset(std::span<const Vec3> directions, std::span<const Vec3> current);

/// Hover state at `ref` whose cable directions reproduce the allocation they induce.
FullSystemState equilibrium_state(const Scenario& scenario, const ReferenceSetpoint& ref);

}  // namespace cablelift
