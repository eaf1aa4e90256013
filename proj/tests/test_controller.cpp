#include "cablelift/controller.hpp"
#include "cablelift/error.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

namespace {

using namespace cablelift;

constexpr double kDeg = std::numbers::pi / 180.0;

Rig point_rig(std::size_t n) {
  Rig rig;
  rig.payload.mass = 0.01;
  for (std::size_t i = 0; i < n; ++i) rig.robots.push_back(QuadrotorParams::crazyflie(0.5, 0.1));
  return rig;
}

FullSystemState hover_state(std::size_t n) {
  FullSystemState s;
  s.p0 = Vec3(0.0, 0.0, 1.0);
  s.robots.resize(n);
  return s;
}

TEST(PayloadWrench, GravityCompensationAtZeroError) {
  PayloadParams p;
  ReferenceSetpoint ref;
  ref.p0r = Vec3(0.0, 0.0, 1.0);
  auto w = payload_wrench(hover_state(1), ref, p, ControllerGains{});
  EXPECT_LE((w.force - Vec3(0.0, 0.0, 0.0981)).norm(), 1e-15);
  EXPECT_EQ(w.moment, Vec3::Zero());
}

TEST(PayloadWrench, ProportionalTermBelowReference) {
  PayloadParams p;
  ReferenceSetpoint ref;
  ref.p0r = Vec3(0.0, 0.0, 1.1);
  auto w = payload_wrench(hover_state(1), ref, p, ControllerGains{});
  EXPECT_NEAR(w.force.z(), 0.01 * (9.81 + 0.625), 1e-15);
  EXPECT_NEAR(w.force.head<2>().norm(), 0.0, 1e-15);
}

TEST(PayloadWrench, FeedforwardAcceleration) {
  PayloadParams p;
  ReferenceSetpoint ref;
  ref.p0r = Vec3(0.0, 0.0, 1.0);
  ref.ddp0r = Vec3(1.0, 0.0, 0.0);
  auto w = payload_wrench(hover_state(1), ref, p, ControllerGains{});
  EXPECT_LE((w.force - 0.01 * Vec3(1.0, 0.0, 9.81)).norm(), 1e-15);
}

TEST(PayloadWrench, ZeroGainsGiveExactFeedforward) {
  PayloadParams p;
  p.kind = PayloadKind::RigidBody;
  p.inertia = Vec3(1e-5, 2e-5, 3e-5).asDiagonal();
  ControllerGains g{0, 0, 0, 0, 0, 0, 0, 0};
  auto s = hover_state(3);
  s.p0 = Vec3(0.3, -0.2, 0.7);
  s.v0 = Vec3(1.0, 2.0, 3.0);
  ReferenceSetpoint ref;
  auto w = payload_wrench(s, ref, p, g);
  EXPECT_LE((w.force - Vec3(0.0, 0.0, 0.0981)).norm(), 1e-15);
  EXPECT_EQ(w.moment, Vec3::Zero());
}

TEST(PayloadWrench, AttitudeErrorOpposesRotation) {
  PayloadParams p;
  p.kind = PayloadKind::RigidBody;
  p.inertia = Vec3(1e-5, 1e-5, 2e-5).asDiagonal();
  auto s = hover_state(3);
  s.R0 = rot_z(0.2);
  auto w = payload_wrench(s, ReferenceSetpoint{}, p, ControllerGains{});
  EXPECT_LT(w.moment.z(), 0.0);
  EXPECT_NEAR(w.moment.x(), 0.0, 1e-15);
}

TEST(DesiredDirections, Examples) {
  EXPECT_EQ(desired_direction(Vec3(0, 0, 2)), Vec3(0, 0, 1));
  EXPECT_TRUE(desired_direction(Vec3(1, 1, 0)).isApprox(Vec3(std::sqrt(0.5), std::sqrt(0.5), 0.0)));
  try {
    desired_direction(Vec3(0, 0, 1e-9));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateForce);
  }
}

TEST(CableControl, DecompositionIsOrthogonal) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N;
  Rig rig = point_rig(2);
  for (int t = 0; t < 200; ++t) {
    auto s = hover_state(2);
    for (auto& r : s.robots) {
      r.q = Vec3(N(rng), N(rng), N(rng)).normalized();
      r.w = Vec3(N(rng), N(rng), N(rng));
      r.w -= r.w.dot(r.q) * r.q;
    }
    ReferenceSetpoint ref;
    ref.ddp0r = Vec3(N(rng), N(rng), N(rng));
    const Vec3 mu(N(rng), N(rng), N(rng));
    auto cmd = cable_control(s, rig, 1, mu, -mu.normalized(), ref, ControllerGains{});
    EXPECT_LE(cmd.parallel.cross(s.robots[1].q).norm(), 1e-12);
    EXPECT_NEAR(cmd.perpendicular.dot(s.robots[1].q), 0.0, 1e-12);
  }
}

TEST(CableControl, NoPerpendicularTermWhenAligned) {
  Rig rig = point_rig(1);
  auto s = hover_state(1);
  const Vec3 mu(0.0, 0.0, 0.0981);
  ReferenceSetpoint ref;
  ref.p0r = s.p0;
  auto cmd = cable_control(s, rig, 0, mu, -mu.normalized(), ref, ControllerGains{});
  EXPECT_LE(cmd.perpendicular.norm(), 1e-15);
  const double m = rig.robots[0].mass;
  EXPECT_NEAR(cmd.u.z(), (m + 0.01) * 9.81, 1e-12);
}

TEST(AttitudeLoop, AlignedHover) {
  auto params = QuadrotorParams::crazyflie(0.5, 0.1);
  const double mg = params.mass * 9.81;
  auto out = attitude_loop(Vec3(0, 0, mg), Mat3::Identity(), Vec3::Zero(), 0.0, params, ControllerGains{});
  EXPECT_NEAR(out.thrust, mg, 1e-9);
  EXPECT_LE(out.torque.norm(), 1e-12);
  EXPECT_FALSE(out.saturated);
}

TEST(AttitudeLoop, TiltedBodyRightsItself) {
  auto params = QuadrotorParams::crazyflie(0.5, 0.1);
  const double mg = params.mass * 9.81;
  auto out = attitude_loop(Vec3(0, 0, mg), rot_x(10.0 * kDeg), Vec3::Zero(), 0.0, params, ControllerGains{});
  EXPECT_NEAR(out.thrust, mg * std::cos(10.0 * kDeg), 1e-9);
  EXPECT_LT(out.torque.x(), 0.0);
  EXPECT_NEAR(out.torque.y(), 0.0, 1e-12);
}

TEST(MotorMixing, RoundTripInsideLimits) {
  auto params = QuadrotorParams::crazyflie(0.5, 0.1);
  Eigen::Vector4d eta(0.3, 1e-4, -2e-4, 1e-5);
  bool sat = true;
  auto rates = motor_mixing(eta, params, &sat);
  EXPECT_FALSE(sat);
  EXPECT_LE((params.actuation * rates - eta).norm(), 1e-9);
  motor_mixing(Eigen::Vector4d(10.0, 0, 0, 0), params, &sat);
  EXPECT_TRUE(sat);
}

TEST(PayloadController, SymmetricHoverIsBalanced) {
  const std::size_t n = 3;
  Rig rig = point_rig(n);
  auto s = hover_state(n);
  // Symmetric cone of cables around the payload.
  std::vector<Vec3> mu(n);
  ReferenceSetpoint ref;
  ref.p0r = s.p0;
  PayloadController ctrl(rig, ControllerGains{});
  const auto w = ctrl.wrench(s, ref);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * i / n;
    const Vec3 dir = Vec3(0.5 * std::cos(a), 0.5 * std::sin(a), 1.0).normalized();
    mu[i] = dir * (w.force.z() / n / dir.z());
    s.robots[i].q = -dir;
    s.robots[i].R = Mat3::Identity();
  }
  auto cmds = ctrl.track(s, ref, mu);
  // Point the bodies along the commanded thrust, then recompute.
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 b3 = ctrl.last_commands()[i].u.normalized();
    const Vec3 b2 = b3.cross(Vec3::UnitX()).normalized();
    s.robots[i].R.col(0) = b2.cross(b3);
    s.robots[i].R.col(1) = b2;
    s.robots[i].R.col(2) = b3;
  }
  cmds = ctrl.track(s, ref, mu);
  double fz = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_LE(cmds[i].torque.norm(), 1e-12);
    fz += cmds[i].thrust * s.robots[i].R.col(2).z();
  }
  EXPECT_NEAR(fz, (0.01 + n * rig.robots[0].mass) * 9.81, 1e-6);
}

TEST(PayloadController, DeterministicAcrossInstances) {
  Rig rig = point_rig(2);
  auto s = hover_state(2);
  s.robots[0].q = Vec3(0.1, 0.2, -1.0).normalized();
  s.robots[1].w = Vec3(0.3, 0.0, 0.0);
  s.robots[0].R = rot_y(0.1);
  ReferenceSetpoint ref;
  ref.p0r = Vec3(0.1, 0.0, 1.0);
  std::vector<Vec3> mu{Vec3(0.01, 0.02, 0.05), Vec3(-0.01, 0.0, 0.05)};
  PayloadController a(rig, ControllerGains{}), b(rig, ControllerGains{});
  auto ra = a.track(s, ref, mu);
  auto rb = b.track(s, ref, mu);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(ra[i].thrust, rb[i].thrust);
    EXPECT_EQ(ra[i].torque, rb[i].torque);
    EXPECT_EQ(ra[i].motor_rates, rb[i].motor_rates);
  }
}

TEST(PayloadController, DegenerateForceHoldsPreviousDirection) {
  Rig rig = point_rig(1);
  auto s = hover_state(1);
  PayloadController ctrl(rig, ControllerGains{});
  std::vector<Vec3> mu{Vec3(0.02, 0.0, 0.1)};
  ctrl.track(s, ReferenceSetpoint{}, mu);
  const Vec3 held = ctrl.last_commands()[0].q_desired;
  mu[0].setZero();
  ctrl.track(s, ReferenceSetpoint{}, mu);
  EXPECT_EQ(ctrl.last_commands()[0].q_desired, held);
  EXPECT_EQ(ctrl.degenerate_count(), 1);
}

// Single robot carrying a point mass: allocation is trivially mu = F_d.
TEST(ClosedLoop, SingleRobotRecoversFromOffset) {
  Rig rig = point_rig(1);
  SimConfig cfg;
  auto s = hover_state(1);
  s.p0 = Vec3(0.1, -0.05, 0.9);
  s.robots[0].q = rot_x(5.0 * kDeg) * -Vec3::UnitZ();
  ReferenceSetpoint ref;
  ref.p0r = Vec3(0.0, 0.0, 1.0);
  PayloadController ctrl(rig, ControllerGains{});
  std::vector<ControlOutput> out;
  for (int k = 0; k < 10000; ++k) {
    if (k % 4 == 0) {
      std::vector<Vec3> mu{ctrl.wrench(s, ref).force};
      out = ctrl.track(s, ref, mu);
    }
    std::vector<RobotInput> u{out[0].input()};
    s = step(s, u, rig, cfg);
  }
  EXPECT_LE((s.p0 - ref.p0r).norm(), 1e-3);
  EXPECT_LE(s.v0.norm(), 1e-3);
  EXPECT_LE((s.robots[0].q + Vec3::UnitZ()).norm(), 1e-3);
}

}  // namespace
