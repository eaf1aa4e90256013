#pragma once

#include "cablelift/controller.hpp"

namespace cablelift {

/// Lemniscate x = s sin(phi), y = s sin(phi) cos(phi) around `center`, where phi sweeps
/// 2 pi per period along a degree-7 smoothstep. Velocity, acceleration and jerk vanish
/// at every period boundary, so the periodic extension is smooth.
struct Figure8 {
  double period = 13.0;
  double scale = 0.3;
  Vec3 center = Vec3(0.0, 0.0, 1.0);

  /// Scale giving the requested peak speed for this period.
  static double scale_for_peak_speed(double period, double peak_speed);
  /// Peak speed per unit scale.
  static double peak_speed_per_scale(double period);

  ReferenceSetpoint operator()(double t) const;
};

ReferenceSetpoint figure8(double t, double period, double scale, const Vec3& center = Vec3(0.0, 0.0, 1.0));

/// Reference for a hovering payload; optional constant yaw rate for rigid payloads.
ReferenceSetpoint hover_reference(const Vec3& position, double t = 0.0, double yaw_rate = 0.0);

/// Applies a linear yaw ramp to the payload attitude reference.
void apply_yaw_ramp(ReferenceSetpoint& ref, double t, double yaw_rate);

struct SmoothingLimits {
  double max_speed = 0.5;
  double max_accel = 1.0;
  double max_jerk = 5.0;
  /// Velocity error to acceleration gain [1/s].
  double response = 3.0;
};

/// Integrates velocity commands into a reference with bounded acceleration and jerk.
class VelocityReference {
 public:
  VelocityReference(const Vec3& start, SmoothingLimits limits = {});

  /// Target velocity, clamped to the speed limit.
  void command_velocity(const Vec3& v);
  /// Adds a displacement that is flown out within the same limits.
  void nudge(const Vec3& delta);
  void hold() { command_velocity(Vec3::Zero()); }
  void reset(const Vec3& position);

  ReferenceSetpoint advance(double dt);
  ReferenceSetpoint current() const;

  const Vec3& target_velocity() const { return v_cmd_; }
  bool nudging() const { return nudging_; }
  const SmoothingLimits& limits() const { return limits_; }

 private:
  SmoothingLimits limits_;
  Vec3 p_;
  Vec3 v_ = Vec3::Zero();
  Vec3 a_ = Vec3::Zero();
  Vec3 v_cmd_ = Vec3::Zero();
  Vec3 goal_ = Vec3::Zero();
  bool nudging_ = false;
};

}  // namespace cablelift
