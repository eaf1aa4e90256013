#include "cablelift/scenario.hpp"

#include "cablelift/error.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <numeric>

namespace cablelift {

namespace {

constexpr double kPresetTilt = 35.0 * std::numbers::pi / 180.0;
constexpr double kLineTilt = 45.0 * std::numbers::pi / 180.0;
constexpr int kMaxLineRobots = 6;
constexpr int kEquilibriumIterations = 500;

Vec3 tilted(double azimuth, double tilt) {
  return Vec3(std::cos(azimuth) * std::sin(tilt), std::sin(azimuth) * std::sin(tilt), std::cos(tilt));
}

}  // namespace

double TrajectorySpec::resolved_scale() const {
  return peak_speed ? Figure8::scale_for_peak_speed(period, *peak_speed) : scale;
}

void TrajectorySpec::validate() const {
  if (!center.allFinite()) throw Error(ErrorCode::InvalidConfig, "trajectory center must be finite");
  if (!std::isfinite(yaw_rate)) throw Error(ErrorCode::InvalidConfig, "yaw_rate must be finite");
  if (kind == TrajectoryKind::Figure8) {
    if (!(period > 0.0)) throw Error(ErrorCode::InvalidConfig, "figure-8 period must be positive");
    if (peak_speed && !(*peak_speed > 0.0)) throw Error(ErrorCode::InvalidConfig, "peak_speed must be positive");
    if (!peak_speed && !(scale >= 0.0)) throw Error(ErrorCode::InvalidConfig, "scale must be non-negative");
  }
  if (!(limits.max_speed > 0.0 && limits.max_accel > 0.0 && limits.max_jerk > 0.0 && limits.response > 0.0))
    throw Error(ErrorCode::InvalidConfig, "smoothing limits must be positive");
  double last = 0.0;
  for (const auto& c : commands) {
    if (!(c.t >= last)) throw Error(ErrorCode::InvalidConfig, "teleop commands must be sorted by time");
    if (!c.command.value.allFinite()) throw Error(ErrorCode::InvalidConfig, "teleop command must be finite");
    last = c.t;
  }
}

void Scenario::validate() const {
  if (schema_version != kScenarioSchemaVersion)
    throw Error(ErrorCode::InvalidConfig, "unsupported scenario schema version " + std::to_string(schema_version));
  rig.validate();
  gains.validate();
  sim.validate();
  trajectory.validate();
  if (!(duration > 0.0)) throw Error(ErrorCode::InvalidConfig, "duration must be positive");
  if (control_every < 1 || allocation_every < 1)
    throw Error(ErrorCode::InvalidConfig, "control and allocation cadence must be >= 1");
  if (!(metrics_start >= 0.0 && metrics_start < duration))
    throw Error(ErrorCode::InvalidConfig, "metrics_start must lie inside the run");
  if (!(initial_offset >= 0.0)) throw Error(ErrorCode::InvalidConfig, "initial_offset must be non-negative");
  if (!(allocation.lambda_s > 0.0 && allocation.lambda_continuity >= 0.0 && allocation.lambda_preset >= 0.0))
    throw Error(ErrorCode::InvalidConfig, "allocation weights out of range");
  const auto& qs = allocation.qp;
  if (!(qs.max_iter > 0 && qs.rho > 0.0 && qs.sigma > 0.0 && qs.eps_abs > 0.0 && qs.eps_rel >= 0.0 &&
        qs.alpha > 0.0 && qs.alpha < 2.0))
    throw Error(ErrorCode::InvalidConfig, "QP settings out of range");
  for (const auto& [name, dirs] : presets) {
    if (dirs.size() != rig.size())
      throw Error(ErrorCode::InvalidConfig, "preset '" + name + "' needs one direction per robot");
    for (const auto& d : dirs) {
      if (!d.allFinite() || d.norm() < 1e-9)
        throw Error(ErrorCode::InvalidConfig, "preset '" + name + "' has a degenerate direction");
    }
  }
  const auto available = preset_directions();
  for (const auto& c : trajectory.commands) {
    if (c.command.kind == CommandKind::Preset && c.command.preset && !available.count(*c.command.preset))
      throw Error(ErrorCode::InvalidConfig, "unknown preset '" + *c.command.preset + "'");
  }
}

std::map<std::string, std::vector<Vec3>> Scenario::preset_directions() const {
  std::map<std::string, std::vector<Vec3>> out;
  try {
    out = preset_table(rig);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::PresetUnavailable) throw;
  }
  for (const auto& [name, dirs] : presets) out[name] = dirs;
  return out;
}

std::map<std::string, std::vector<Vec3>> preset_table(const Rig& rig) {
  const int n = static_cast<int>(rig.size());
  if (n < 2 || n > kMaxLineRobots)
    throw Error(ErrorCode::PresetUnavailable, "no presets for " + std::to_string(n) + " robots");
  std::map<std::string, std::vector<Vec3>> table;
  auto& line = table["line"];
  for (int i = 0; i < n; ++i) {
    const double tilt = -kLineTilt + 2.0 * kLineTilt * i / (n - 1);
    line.push_back(Vec3(std::sin(tilt), 0.0, std::cos(tilt)));
  }
  if (n == 3) {
    auto& tri = table["triangle"];
    for (int i = 0; i < 3; ++i) tri.push_back(tilted(std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * i / 3.0, kPresetTilt));
  }
  return table;
}

FullSystemState equilibrium_state(const Scenario& scenario, const ReferenceSetpoint& ref) {
  const Rig& rig = scenario.rig;
  const std::size_t n = rig.size();
  FullSystemState s;
  s.p0 = ref.p0r;
  s.R0 = ref.R0r;
  s.robots.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& pa = rig.robots[i].attachment;
    double az = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    if (rig.payload.rigid() && pa.head<2>().norm() > 1e-9) az = std::atan2(pa.y(), pa.x());
    s.robots[i].q = -(ref.R0r * tilted(az, std::numbers::pi / 6.0));
  }

  AllocatorConfig config = scenario.allocation;
  config.mode = AllocationMode::QpCascade;
  config.parallel = false;
  CableForceAllocator allocator(rig, config);
  const PayloadController controller(rig, scenario.gains, scenario.sim.gravity);
  const DesiredWrench wrench = controller.wrench(s, ref);

  std::vector<Vec3> mu;
  for (int it = 0; it < kEquilibriumIterations; ++it) {
    mu = allocator.allocate(s, wrench);
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 q = -desired_direction(mu[i]);
      change = std::max(change, (q - s.robots[i].q).norm());
      s.robots[i].q = q;
    }
    if (change < 1e-12) break;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const double m = rig.robots[i].mass;
    // Thrust holds the robot's weight and pulls the cable.
    const Vec3 u = mu[i] + m * scenario.sim.gravity * e3() + m * ref.ddp0r;
    const Vec3 b3 = u.normalized();
    const Vec3 b2 = b3.cross(Vec3::UnitX()).normalized();
    Mat3 R;
    R.col(0) = b2.cross(b3);
    R.col(1) = b2;
    R.col(2) = b3;
    s.robots[i].R = R;
  }
  return s;
}

std::vector<Vec3> assign_preset(std::span<const Vec3> directions, std::span<const Vec3> current) {
  const std::size_t n = directions.size();
  if (current.size() != n) throw Error(ErrorCode::ShapeMismatch, "preset needs one direction per robot");
  std::vector<std::size_t> perm(n), best;
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best_cost = std::numeric_limits<double>::infinity();
  // Strict improvement keeps the identity on ties, so the result is deterministic.
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) cost += (directions[perm[i]].normalized() - current[i].normalized()).squaredNorm();
    if (cost < best_cost - 1e-12) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  std::vector<Vec3> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = directions[best[i]];
  return out;
}

}  // namespace cablelift
