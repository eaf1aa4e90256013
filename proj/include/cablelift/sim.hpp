#pragma once

#include "cablelift/common.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace cablelift {

/// Physical parameters of one quadrotor and the cable that ties it to the payload.
struct QuadrotorParams {
  double mass = 0.034;
  Vec3 inertia_diag = Vec3(16.571710e-6, 16.655602e-6, 29.261652e-6);
  /// Maps squared motor rates to (f, tau_x, tau_y, tau_z).
  Eigen::Matrix4d actuation = Eigen::Matrix4d::Identity();
  double motor_rate_min = 0.0;
  double motor_rate_max = 1.0;
  double safety_radius = 0.1;
  double cable_length = 0.5;
  /// Attachment point in the payload frame (ignored for point-mass payloads).
  Vec3 attachment = Vec3::Zero();

  Mat3 inertia() const { return inertia_diag.asDiagonal(); }

  /// Throws Error(InvalidConfig) when an invariant does not hold.
  void validate() const;

  /// Crazyflie 2.1 X-frame with the given thrust-to-weight ratio.
  static QuadrotorParams crazyflie(double cable_length, double safety_radius,
                                   const Vec3& attachment = Vec3::Zero(),
                                   double thrust_to_weight = 1.4);
};

enum class PayloadKind { PointMass, RigidBody };

struct PayloadParams {
  PayloadKind kind = PayloadKind::PointMass;
  double mass = 0.01;
  Mat3 inertia = Mat3::Zero();

  bool rigid() const { return kind == PayloadKind::RigidBody; }
  void validate() const;
};

/// Payload plus the team of quadrotors suspended from it.
struct Rig {
  PayloadParams payload;
  std::vector<QuadrotorParams> robots;

  std::size_t size() const { return robots.size(); }
  void validate() const;
  /// Attachment points, zeroed for a point-mass payload.
  std::vector<Vec3> attachments() const;
};

struct RobotState {
  /// Unit vector from the quadrotor towards its attachment point.
  Vec3 q = -Vec3::UnitZ();
  /// Cable angular velocity (world frame), orthogonal to q.
  Vec3 w = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  Vec3 omega = Vec3::Zero();
};

struct FullSystemState {
  Vec3 p0 = Vec3::Zero();
  Vec3 v0 = Vec3::Zero();
  Mat3 R0 = Mat3::Identity();
  Vec3 w0 = Vec3::Zero();
  std::vector<RobotState> robots;

  bool finite() const;
};

enum class Integrator { ExplicitEuler };

struct SimConfig {
  double dt = 1e-3;
  double gravity = kDefaultGravity;
  Integrator integrator = Integrator::ExplicitEuler;
  std::uint64_t seed = 0;
  /// Per-axis standard deviation [N] of a random force on every robot, redrawn each
  /// control period. Zero disables it.
  double disturbance_force = 0.0;

  void validate() const;
  Vec3 gravity_vector() const { return Vec3(0.0, 0.0, -gravity); }
};

/// Collective thrust along body z and body torques for one quadrotor.
struct RobotInput {
  double thrust = 0.0;
  Vec3 torque = Vec3::Zero();
  /// Additional world-frame force on the robot body (gusts).
  Vec3 external_force = Vec3::Zero();
};

/// Second-order quantities of the coupled system at one instant.
struct SystemAccelerations {
  Vec3 payload_linear = Vec3::Zero();
  Vec3 payload_angular = Vec3::Zero();  // body frame
  std::vector<Vec3> cable_angular;      // world frame, d/dt w_i
  std::vector<double> tensions;         // >= 0 when the cable pulls
  std::vector<Vec3> robot_angular;      // d/dt omega_i
};

Vec3 quad_position(const FullSystemState& state, const Rig& rig, std::size_t i);
Vec3 quad_velocity(const FullSystemState& state, const Rig& rig, std::size_t i);

SystemAccelerations accelerations(const FullSystemState& state, std::span<const RobotInput> inputs,
                                  const Rig& rig, const SimConfig& config);

/// One explicit Euler step (velocities updated first) followed by projection back
/// onto the state manifold.
/// Throws Error(NonFiniteState) if the result is not finite.
FullSystemState step(const FullSystemState& state, std::span<const RobotInput> inputs, const Rig& rig,
                     const SimConfig& config);

double kinetic_energy(const FullSystemState& state, const Rig& rig);
double mechanical_energy(const FullSystemState& state, const Rig& rig, double gravity = kDefaultGravity);

/// Smallest distance between any two quadrotor centres.
double min_pairwise_distance(const FullSystemState& state, const Rig& rig);

}  // namespace cablelift
