#include "cablelift/sim.hpp"

#include "cablelift/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace cablelift {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidConfig, what);
}

}  // namespace

void QuadrotorParams::validate() const {
  require(mass > 0.0, "quadrotor mass must be positive");
  require((inertia_diag.array() > 0.0).all(), "quadrotor inertia must be positive");
  require(cable_length > 0.0, "cable length must be positive");
  require(safety_radius > 0.0, "safety radius must be positive");
  require(safety_radius < 2.0 * cable_length, "safety radius must be below twice the cable length");
  require(motor_rate_min <= motor_rate_max, "motor rate limits are inverted");
  Eigen::FullPivLU<Eigen::Matrix4d> lu(actuation);
  require(lu.rank() == 4, "actuation matrix must have full row rank");
}

QuadrotorParams QuadrotorParams::crazyflie(double cable_length, double safety_radius, const Vec3& attachment,
                                           double thrust_to_weight) {
  QuadrotorParams p;
  p.cable_length = cable_length;
  p.safety_radius = safety_radius;
  p.attachment = attachment;

  // Thrust coefficient [N/(rad/s)^2], arm projected on x/y, yaw torque per unit thrust.
  constexpr double kf = 2.88e-8;
  const double arm = 0.046 / std::sqrt(2.0);
  constexpr double torque_ratio = 0.006;
  p.actuation << 1.0, 1.0, 1.0, 1.0,
                 -arm, -arm, arm, arm,
                 -arm, arm, arm, -arm,
                 -torque_ratio, torque_ratio, -torque_ratio, torque_ratio;
  p.actuation *= kf;
  p.motor_rate_min = 0.0;
  p.motor_rate_max = thrust_to_weight * p.mass * kDefaultGravity / (4.0 * kf);
  return p;
}

void PayloadParams::validate() const {
  require(mass > 0.0, "payload mass must be positive");
  if (kind == PayloadKind::RigidBody) {
    require((inertia - inertia.transpose()).norm() <= 1e-12 * (1.0 + inertia.norm()),
            "payload inertia must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> es(inertia);
    require(es.eigenvalues().minCoeff() > 0.0, "payload inertia must be positive definite");
  }
}

void Rig::validate() const {
  payload.validate();
  require(!robots.empty(), "rig needs at least one robot");
  for (const auto& r : robots) r.validate();
}

std::vector<Vec3> Rig::attachments() const {
  std::vector<Vec3> out;
  out.reserve(robots.size());
  for (const auto& r : robots) out.push_back(payload.rigid() ? r.attachment : Vec3::Zero());
  return out;
}

bool FullSystemState::finite() const {
  if (!p0.allFinite() || !v0.allFinite() || !R0.allFinite() || !w0.allFinite()) return false;
  for (const auto& r : robots) {
    if (!r.q.allFinite() || !r.w.allFinite() || !r.R.allFinite() || !r.omega.allFinite()) return false;
  }
  return true;
}

void SimConfig::validate() const {
  require(dt > 0.0 && dt <= 2e-3, "dt must lie in (0, 2 ms]");
  require(gravity >= 0.0, "gravity must be non-negative");
  require(disturbance_force >= 0.0 && std::isfinite(disturbance_force), "disturbance_force must be >= 0");
}

Vec3 quad_position(const FullSystemState& state, const Rig& rig, std::size_t i) {
  const auto& robot = rig.robots[i];
  const Vec3 offset = rig.payload.rigid() ? Vec3(state.R0 * robot.attachment) : Vec3::Zero();
  return state.p0 + offset - robot.cable_length * state.robots[i].q;
}

Vec3 quad_velocity(const FullSystemState& state, const Rig& rig, std::size_t i) {
  const auto& robot = rig.robots[i];
  const auto& rs = state.robots[i];
  Vec3 v = state.v0 - robot.cable_length * rs.w.cross(rs.q);
  if (rig.payload.rigid()) v += state.R0 * hat(state.w0) * robot.attachment;
  return v;
}

SystemAccelerations accelerations(const FullSystemState& state, std::span<const RobotInput> inputs,
                                  const Rig& rig, const SimConfig& config) {
  const std::size_t n = rig.size();
  const bool rigid = rig.payload.rigid();
  const Vec3 g = config.gravity_vector();
  const double m0 = rig.payload.mass;

  // Generalized payload mass matrix over (linear acc, body angular acc).
  Eigen::Matrix<double, 6, 6> M = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> rhs = Eigen::Matrix<double, 6, 1>::Zero();
  M.topLeftCorner<3, 3>() = m0 * Mat3::Identity();
  rhs.head<3>() = m0 * g;
  if (rigid) {
    const Mat3& J0 = rig.payload.inertia;
    M.bottomRightCorner<3, 3>() = J0;
    rhs.tail<3>() = -state.w0.cross(J0 * state.w0);
  } else {
    M.bottomRightCorner<3, 3>() = Mat3::Identity();
  }

  const Mat3 w0_hat = hat(state.w0);
  std::vector<double> c(n);
  std::vector<Vec3> centripetal(n, Vec3::Zero());
  std::vector<Mat3> lever(n, Mat3::Zero());
  std::vector<Vec3> thrust(n);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& robot = rig.robots[i];
    const auto& rs = state.robots[i];
    const double mi = robot.mass;
    const Mat3 Q = rs.q * rs.q.transpose();
    thrust[i] = inputs[i].thrust * rs.R.col(2) + inputs[i].external_force;
    c[i] = mi * robot.cable_length * rs.w.squaredNorm() - mi * rs.q.dot(g) - rs.q.dot(thrust[i]);

    M.topLeftCorner<3, 3>() += mi * Q;
    rhs.head<3>() -= c[i] * rs.q;
    if (rigid) {
      centripetal[i] = state.R0 * w0_hat * w0_hat * robot.attachment;
      lever[i] = state.R0 * hat(robot.attachment);
      const Mat3& B = lever[i];
      M.topRightCorner<3, 3>() -= mi * Q * B;
      M.bottomLeftCorner<3, 3>() -= mi * B.transpose() * Q;
      M.bottomRightCorner<3, 3>() += mi * B.transpose() * Q * B;
      rhs.head<3>() -= mi * Q * centripetal[i];
      rhs.tail<3>() += B.transpose() * (mi * Q * centripetal[i] + c[i] * rs.q);
    }
  }

  SystemAccelerations acc;
  if (rigid) {
    const Eigen::Matrix<double, 6, 1> sol = M.ldlt().solve(rhs);
    acc.payload_linear = sol.head<3>();
    acc.payload_angular = sol.tail<3>();
  } else {
    acc.payload_linear = M.topLeftCorner<3, 3>().ldlt().solve(rhs.head<3>());
  }

  acc.cable_angular.resize(n);
  acc.tensions.resize(n);
  acc.robot_angular.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& robot = rig.robots[i];
    const auto& rs = state.robots[i];
    Vec3 attach_acc = acc.payload_linear;
    if (rigid) attach_acc += centripetal[i] - lever[i] * acc.payload_angular;
    acc.tensions[i] = robot.mass * rs.q.dot(attach_acc) + c[i];
    acc.cable_angular[i] =
        rs.q.cross(attach_acc - g - thrust[i] / robot.mass) / robot.cable_length;
    const Vec3 J = robot.inertia_diag;
    const Vec3 Jw = J.cwiseProduct(rs.omega);
    acc.robot_angular[i] = (Jw.cross(rs.omega) + inputs[i].torque).cwiseQuotient(J);
  }
  return acc;
}

FullSystemState step(const FullSystemState& state, std::span<const RobotInput> inputs, const Rig& rig,
                     const SimConfig& config) {
  const double dt = config.dt;
  const SystemAccelerations acc = accelerations(state, inputs, rig, config);

  // Velocities first, then positions with the updated velocities (symplectic ordering).
  FullSystemState next = state;
  next.v0 = state.v0 + dt * acc.payload_linear;
  next.p0 = state.p0 + dt * next.v0;
  if (rig.payload.rigid()) {
    next.w0 = state.w0 + dt * acc.payload_angular;
    next.R0 = orthonormalize(state.R0 * (Mat3::Identity() + dt * hat(next.w0)));
  }
  for (std::size_t i = 0; i < rig.size(); ++i) {
    const auto& rs = state.robots[i];
    auto& ns = next.robots[i];
    ns.w = rs.w + dt * acc.cable_angular[i];
    ns.q = (rs.q + dt * ns.w.cross(rs.q)).normalized();
    ns.w -= ns.w.dot(ns.q) * ns.q;
    ns.omega = rs.omega + dt * acc.robot_angular[i];
    ns.R = orthonormalize(rs.R * (Mat3::Identity() + dt * hat(ns.omega)));
  }
  if (!next.finite()) throw Error(ErrorCode::NonFiniteState, "simulation state diverged");
  return next;
}

double kinetic_energy(const FullSystemState& state, const Rig& rig) {
  double ke = 0.5 * rig.payload.mass * state.v0.squaredNorm();
  if (rig.payload.rigid()) ke += 0.5 * state.w0.dot(rig.payload.inertia * state.w0);
  for (std::size_t i = 0; i < rig.size(); ++i) {
    const auto& robot = rig.robots[i];
    const auto& rs = state.robots[i];
    ke += 0.5 * robot.mass * quad_velocity(state, rig, i).squaredNorm();
    ke += 0.5 * rs.omega.dot(robot.inertia_diag.cwiseProduct(rs.omega));
  }
  return ke;
}

double mechanical_energy(const FullSystemState& state, const Rig& rig, double gravity) {
  double pe = rig.payload.mass * gravity * state.p0.z();
  for (std::size_t i = 0; i < rig.size(); ++i) {
    pe += rig.robots[i].mass * gravity * quad_position(state, rig, i).z();
  }
  return kinetic_energy(state, rig) + pe;
}

double min_pairwise_distance(const FullSystemState& state, const Rig& rig) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rig.size(); ++i) {
    const Vec3 pi = quad_position(state, rig, i);
    for (std::size_t j = i + 1; j < rig.size(); ++j) {
      best = std::min(best, (pi - quad_position(state, rig, j)).norm());
    }
  }
  return best;
}

}  // namespace cablelift
