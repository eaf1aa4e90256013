#include "cablelift/controller.hpp"

#include "cablelift/error.hpp"

#include <algorithm>

namespace cablelift {

void ReferenceSetpoint::validate() const {
  const bool finite = p0r.allFinite() && dp0r.allFinite() && ddp0r.allFinite() && R0r.allFinite() &&
                      w0r.allFinite() && dw0r.allFinite() &&
                      std::all_of(yaw.begin(), yaw.end(), [](double y) { return std::isfinite(y); });
  if (!finite) throw Error(ErrorCode::InvalidConfig, "reference contains non-finite entries");
  if ((R0r.transpose() * R0r - Mat3::Identity()).norm() > 1e-6)
    throw Error(ErrorCode::InvalidConfig, "reference attitude is not a rotation");
}

void ControllerGains::validate() const {
  for (double k : {kp_pos, kd_pos, kp_rot, kd_rot, kq, kw, kR, kOmega}) {
    if (!(k >= 0.0)) throw Error(ErrorCode::InvalidConfig, "controller gains must be non-negative");
  }
}

DesiredWrench payload_wrench(const FullSystemState& state, const ReferenceSetpoint& ref,
                             const PayloadParams& payload, const ControllerGains& gains, double gravity) {
  DesiredWrench out;
  const Vec3 ep = state.p0 - ref.p0r;
  const Vec3 ev = state.v0 - ref.dp0r;
  out.force = payload.mass * (ref.ddp0r + gravity * e3() - gains.kp_pos * ep - gains.kd_pos * ev);
  if (payload.rigid()) {
    const Mat3& J0 = payload.inertia;
    const Mat3 Rt = state.R0.transpose() * ref.R0r;
    const Vec3 eR = 0.5 * vee(ref.R0r.transpose() * state.R0 - Rt);
    const Vec3 ew = state.w0 - Rt * ref.w0r;
    out.moment = J0 * (-gains.kp_rot * eR - gains.kd_rot * ew) + state.w0.cross(J0 * state.w0) -
                 J0 * (hat(state.w0) * Rt * ref.w0r - Rt * ref.dw0r);
  }
  return out;
}

Vec3 desired_direction(const Vec3& mu, double epsilon) {
  const double norm = mu.norm();
  if (!(norm > epsilon)) throw Error(ErrorCode::DegenerateForce, "cable force too small for a direction");
  return mu / norm;
}

std::vector<Vec3> desired_directions(std::span<const Vec3> mu, double epsilon) {
  std::vector<Vec3> out;
  out.reserve(mu.size());
  for (const auto& m : mu) out.push_back(desired_direction(m, epsilon));
  return out;
}

CableCommand cable_control(const FullSystemState& state, const Rig& rig, std::size_t i, const Vec3& mu_i,
                           const Vec3& q_desired, const ReferenceSetpoint& ref, const ControllerGains& gains,
                           double gravity) {
  const auto& robot = rig.robots[i];
  const auto& rs = state.robots[i];
  const Vec3& q = rs.q;
  const double m = robot.mass;
  const double l = robot.cable_length;

  // Attachment-point acceleration commanded by the outer loop (gravity included).
  const DesiredWrench wd = payload_wrench(state, ref, rig.payload, gains, gravity);
  Vec3 a = wd.force / rig.payload.mass;
  if (rig.payload.rigid()) {
    const Vec3& rho = robot.attachment;
    const Mat3 w_hat = hat(state.w0);
    const Mat3& J0 = rig.payload.inertia;
    const Vec3 dw = J0.ldlt().solve(wd.moment - state.w0.cross(J0 * state.w0));
    a += state.R0 * w_hat * w_hat * rho - state.R0 * hat(rho) * dw;
  }

  CableCommand cmd;
  cmd.q_desired = q_desired;
  cmd.parallel = q * q.dot(mu_i) + m * l * rs.w.squaredNorm() * q + m * q * q.dot(a);
  const Vec3 eq = q_desired.cross(q);
  const Mat3 q_hat = hat(q);
  cmd.perpendicular = m * l * q_hat * (-gains.kq * eq - gains.kw * rs.w) - m * q_hat * q_hat * a;
  cmd.u = cmd.parallel + cmd.perpendicular;
  return cmd;
}

Eigen::Vector4d motor_mixing(const Eigen::Vector4d& wrench, const QuadrotorParams& params, bool* saturated) {
  Eigen::Vector4d rates = params.actuation.partialPivLu().solve(wrench);
  bool sat = false;
  for (int k = 0; k < 4; ++k) {
    const double clamped = std::clamp(rates[k], params.motor_rate_min, params.motor_rate_max);
    sat = sat || clamped != rates[k];
    rates[k] = clamped;
  }
  if (saturated) *saturated = sat;
  return rates;
}

ControlOutput attitude_loop(const Vec3& u, const Mat3& R, const Vec3& omega, double yaw,
                            const QuadrotorParams& params, const ControllerGains& gains) {
  const double norm = u.norm();
  if (!(norm > kForceEpsilon)) throw Error(ErrorCode::DegenerateForce, "thrust vector too small");
  const Vec3 b3 = u / norm;
  const Vec3 b1c(std::cos(yaw), std::sin(yaw), 0.0);
  Vec3 b2 = b3.cross(b1c);
  if (b2.norm() < 1e-9) b2 = b3.cross(Vec3::UnitX()).norm() > 1e-9 ? b3.cross(Vec3::UnitX()) : b3.cross(Vec3::UnitY());
  b2.normalize();
  Mat3 Rd;
  Rd.col(0) = b2.cross(b3);
  Rd.col(1) = b2;
  Rd.col(2) = b3;

  const Vec3 eR = 0.5 * vee(Rd.transpose() * R - R.transpose() * Rd);
  const Mat3 J = params.inertia();
  const Vec3 torque = J * (-gains.kR * eR - gains.kOmega * omega) + omega.cross(J * omega);
  const double thrust = std::max(0.0, u.dot(R.col(2)));

  Eigen::Vector4d wrench;
  wrench << thrust, torque;
  ControlOutput out;
  out.motor_rates = motor_mixing(wrench, params, &out.saturated);
  const Eigen::Vector4d applied = params.actuation * out.motor_rates;
  out.thrust = applied[0];
  out.torque = applied.tail<3>();
  return out;
}

PayloadController::PayloadController(Rig rig, ControllerGains gains, double gravity)
    : rig_(std::move(rig)), gains_(gains), gravity_(gravity) {
  gains_.validate();
  q_desired_.assign(rig_.size(), -Vec3::UnitZ());
  commands_.resize(rig_.size());
}

DesiredWrench PayloadController::wrench(const FullSystemState& state, const ReferenceSetpoint& ref) const {
  return payload_wrench(state, ref, rig_.payload, gains_, gravity_);
}

std::vector<ControlOutput> PayloadController::track(const FullSystemState& state, const ReferenceSetpoint& ref,
                                                    std::span<const Vec3> mu) {
  if (mu.size() != rig_.size()) throw Error(ErrorCode::ShapeMismatch, "one cable force per robot expected");
  std::vector<ControlOutput> out(rig_.size());
  for (std::size_t i = 0; i < rig_.size(); ++i) {
    try {
      // The cable pulls the payload along -q, so the tracked direction is -mu/|mu|.
      q_desired_[i] = -desired_direction(mu[i]);
    } catch (const Error&) {
      ++degenerate_count_;
    }
    commands_[i] = cable_control(state, rig_, i, mu[i], q_desired_[i], ref, gains_, gravity_);
    out[i] = attitude_loop(commands_[i].u, state.robots[i].R, state.robots[i].omega, ref.yaw_of(i),
                           rig_.robots[i], gains_);
  }
  return out;
}

}  // namespace cablelift
