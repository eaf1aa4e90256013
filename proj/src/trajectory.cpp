#include "cablelift/trajectory.hpp"

#include "cablelift/error.hpp"

#include <numbers>

namespace cablelift {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// 35u^4 - 84u^5 + 70u^6 - 20u^7 and its first two derivatives.
void smoothstep7(double u, double& s, double& ds, double& dds) {
  const double u2 = u * u, u3 = u2 * u, v = 1.0 - u;
  s = u2 * u2 * (35.0 - 84.0 * u + 70.0 * u2 - 20.0 * u3);
  ds = 140.0 * u3 * v * v * v;
  dds = 420.0 * u2 * v * v * (1.0 - 2.0 * u);
}

double speed_per_scale(double u, double period) {
  double s, ds, dds;
  smoothstep7(u, s, ds, dds);
  const double phi = kTwoPi * s;
  const double dphi = kTwoPi * ds / period;
  return dphi * std::hypot(std::cos(phi), std::cos(2.0 * phi));
}

Vec3 clamp_norm(const Vec3& v, double limit) {
  const double n = v.norm();
  return n > limit && n > 0.0 ? Vec3(v * (limit / n)) : v;
}

}  // namespace

double Figure8::peak_speed_per_scale(double period) {
  if (!(period > 0.0)) throw Error(ErrorCode::InvalidConfig, "figure-8 period must be positive");
  constexpr int kSamples = 20000;
  double best = 0.0, best_u = 0.0;
  for (int k = 0; k <= kSamples; ++k) {
    const double u = static_cast<double>(k) / kSamples;
    const double v = speed_per_scale(u, period);
    if (v > best) {
      best = v;
      best_u = u;
    }
  }
  // Golden-section refinement around the best sample.
  double lo = std::max(0.0, best_u - 1.0 / kSamples), hi = std::min(1.0, best_u + 1.0 / kSamples);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 60; ++it) {
    const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
    if (speed_per_scale(a, period) > speed_per_scale(b, period)) {
      hi = b;
    } else {
      lo = a;
    }
  }
  return std::max(best, speed_per_scale(0.5 * (lo + hi), period));
}

double Figure8::scale_for_peak_speed(double period, double peak_speed) {
  return peak_speed / peak_speed_per_scale(period);
}

ReferenceSetpoint Figure8::operator()(double t) const { return figure8(t, period, scale, center); }

ReferenceSetpoint figure8(double t, double period, double scale, const Vec3& center) {
  if (!(period > 0.0)) throw Error(ErrorCode::InvalidConfig, "figure-8 period must be positive");
  const double cycles = std::floor(t / period);
  const double u = t / period - cycles;
  double s, ds, dds;
  smoothstep7(u, s, ds, dds);
  const double phi = kTwoPi * s;
  const double dphi = kTwoPi * ds / period;
  const double ddphi = kTwoPi * dds / (period * period);
  const double sp = std::sin(phi), cp = std::cos(phi), s2 = std::sin(2.0 * phi), c2 = std::cos(2.0 * phi);

  ReferenceSetpoint ref;
  ref.p0r = center + scale * Vec3(sp, 0.5 * s2, 0.0);
  ref.dp0r = scale * dphi * Vec3(cp, c2, 0.0);
  ref.ddp0r = scale * Vec3(-sp * dphi * dphi + cp * ddphi, -2.0 * s2 * dphi * dphi + c2 * ddphi, 0.0);
  return ref;
}

ReferenceSetpoint hover_reference(const Vec3& position, double t, double yaw_rate) {
  ReferenceSetpoint ref;
  ref.p0r = position;
  apply_yaw_ramp(ref, t, yaw_rate);
  return ref;
}

void apply_yaw_ramp(ReferenceSetpoint& ref, double t, double yaw_rate) {
  if (yaw_rate == 0.0) return;
  ref.R0r = rot_z(yaw_rate * t);
  ref.w0r = Vec3(0.0, 0.0, yaw_rate);
  ref.dw0r.setZero();
}

VelocityReference::VelocityReference(const Vec3& start, SmoothingLimits limits) : limits_(limits), p_(start) {
  if (!(limits_.max_speed > 0.0 && limits_.max_accel > 0.0 && limits_.max_jerk > 0.0 && limits_.response > 0.0))
    throw Error(ErrorCode::InvalidConfig, "smoothing limits must be positive");
}

void VelocityReference::command_velocity(const Vec3& v) {
  if (!v.allFinite()) throw Error(ErrorCode::InvalidConfig, "velocity command must be finite");
  v_cmd_ = clamp_norm(v, limits_.max_speed);
}

void VelocityReference::nudge(const Vec3& delta) {
  if (!delta.allFinite()) throw Error(ErrorCode::InvalidConfig, "nudge must be finite");
  if (!nudging_) goal_ = p_;
  goal_ += delta;
  nudging_ = true;
}

void VelocityReference::reset(const Vec3& position) {
  p_ = position;
  v_.setZero();
  a_.setZero();
  v_cmd_.setZero();
  goal_ = position;
  nudging_ = false;
}

ReferenceSetpoint VelocityReference::advance(double dt) {
  const Vec3 base = clamp_norm(v_cmd_, limits_.max_speed);
  // While a nudge is active the reference chases a goal that drifts with the commanded
  // velocity; otherwise it follows the velocity command alone.
  Vec3 target = base;
  if (nudging_) target = clamp_norm(base + limits_.response * (goal_ - p_), limits_.max_speed);
  const Vec3 a_des = clamp_norm(limits_.response * (target - v_), limits_.max_accel);
  a_ += clamp_norm(a_des - a_, limits_.max_jerk * dt);
  a_ = clamp_norm(a_, limits_.max_accel);
  v_ += dt * a_;
  p_ += dt * v_;
  if (nudging_) {
    goal_ += dt * base;
    if ((goal_ - p_).norm() < 1e-5 && (v_ - base).norm() < 1e-4) nudging_ = false;
  }
  return current();
}

ReferenceSetpoint VelocityReference::current() const {
  ReferenceSetpoint ref;
  ref.p0r = p_;
  ref.dp0r = v_;
  ref.ddp0r = a_;
  return ref;
}

}  // namespace cablelift
