#pragma once

#include "cablelift/sim.hpp"

#include <optional>
#include <span>
#include <vector>

namespace cablelift {

inline constexpr double kForceEpsilon = 1e-6;

struct ReferenceSetpoint {
  Vec3 p0r = Vec3::Zero();
  Vec3 dp0r = Vec3::Zero();
  Vec3 ddp0r = Vec3::Zero();
  Mat3 R0r = Mat3::Identity();
  Vec3 w0r = Vec3::Zero();
  Vec3 dw0r = Vec3::Zero();
  /// Per-robot yaw; missing entries mean zero.
  std::vector<double> yaw;

  double yaw_of(std::size_t i) const { return i < yaw.size() ? yaw[i] : 0.0; }
  void validate() const;
};

/// Rotational gains are normalised by the relevant inertia.
struct ControllerGains {
  double kp_pos = 6.25;
  double kd_pos = 5.0;
  double kp_rot = 4.0;
  double kd_rot = 2.5;
  double kq = 36.0;
  double kw = 10.0;
  double kR = 400.0;
  double kOmega = 35.0;

  void validate() const;
};

/// F_d in the world frame, M_d in the payload body frame.
struct DesiredWrench {
  Vec3 force = Vec3::Zero();
  Vec3 moment = Vec3::Zero();
};

struct CableCommand {
  Vec3 u = Vec3::Zero();
  Vec3 parallel = Vec3::Zero();
  Vec3 perpendicular = Vec3::Zero();
  /// Tracked cable direction (quadrotor towards payload).
  Vec3 q_desired = -Vec3::UnitZ();
};

struct ControlOutput {
  double thrust = 0.0;
  Vec3 torque = Vec3::Zero();
  /// Squared motor rates after clamping.
  Eigen::Vector4d motor_rates = Eigen::Vector4d::Zero();
  bool saturated = false;

  RobotInput input() const { return RobotInput{thrust, torque}; }
};

DesiredWrench payload_wrench(const FullSystemState& state, const ReferenceSetpoint& ref,
                             const PayloadParams& payload, const ControllerGains& gains,
                             double gravity = kDefaultGravity);

/// mu / |mu|. Throws Error(DegenerateForce) when |mu| <= epsilon.
Vec3 desired_direction(const Vec3& mu, double epsilon = kForceEpsilon);
std::vector<Vec3> desired_directions(std::span<const Vec3> mu, double epsilon = kForceEpsilon);

/// Thrust force for robot i that tracks cable force mu_i (world frame) along the
/// cable direction q_desired. The desired cable rate is taken as zero; the payload
/// accelerations commanded by the outer loop stand in for the measured ones.
CableCommand cable_control(const FullSystemState& state, const Rig& rig, std::size_t i, const Vec3& mu_i,
                           const Vec3& q_desired, const ReferenceSetpoint& ref, const ControllerGains& gains,
                           double gravity = kDefaultGravity);

/// Squared motor rates for a wrench (f, tau), clamped to the motor limits.
Eigen::Vector4d motor_mixing(const Eigen::Vector4d& wrench, const QuadrotorParams& params,
                             bool* saturated = nullptr);

/// Thrust magnitude and torque tracking the thrust direction of u and the given yaw.
/// The returned thrust and torque are those the clamped motors actually produce.
ControlOutput attitude_loop(const Vec3& u, const Mat3& R, const Vec3& omega, double yaw,
                            const QuadrotorParams& params, const ControllerGains& gains);

/// Loops two and three for every robot given the allocated cable forces. Holds the
/// previous desired direction of a robot whose allocated force is degenerate.
class PayloadController {
 public:
  PayloadController(Rig rig, ControllerGains gains, double gravity = kDefaultGravity);

  DesiredWrench wrench(const FullSystemState& state, const ReferenceSetpoint& ref) const;

  std::vector<ControlOutput> track(const FullSystemState& state, const ReferenceSetpoint& ref,
                                   std::span<const Vec3> mu);

  const std::vector<CableCommand>& last_commands() const { return commands_; }
  int degenerate_count() const { return degenerate_count_; }
  const Rig& rig() const { return rig_; }
  const ControllerGains& gains() const { return gains_; }

 private:
  Rig rig_;
  ControllerGains gains_;
  double gravity_;
  std::vector<Vec3> q_desired_;
  std::vector<CableCommand> commands_;
  int degenerate_count_ = 0;
};

}  // namespace cablelift
