#include "cablelift/error.hpp"
#include "cablelift/sim.hpp"
#include "oracles/pendulum_oracle.hpp"

#include <gtest/gtest.h>

#include <numbers>

namespace {

using namespace cablelift;

Rig single_rig(double l = 0.5, PayloadKind kind = PayloadKind::PointMass) {
  Rig rig;
  rig.payload.kind = kind;
  rig.payload.mass = 0.01;
  rig.robots.push_back(QuadrotorParams::crazyflie(l, 0.1));
  return rig;
}

Rig triangle_rig() {
  Rig rig;
  rig.payload.kind = PayloadKind::RigidBody;
  rig.payload.mass = 0.01;
  rig.payload.inertia = Vec3(2e-5, 2e-5, 4e-5).asDiagonal();
  for (int k = 0; k < 3; ++k) {
    const double a = 2.0 * std::numbers::pi * k / 3.0;
    rig.robots.push_back(QuadrotorParams::crazyflie(0.5, 0.15, Vec3(0.046 * std::cos(a), 0.046 * std::sin(a), 0.0)));
  }
  return rig;
}

FullSystemState rest_state(std::size_t n, const Vec3& q = -Vec3::UnitZ()) {
  FullSystemState s;
  s.p0 = Vec3(0.0, 0.0, 1.0);
  s.robots.resize(n);
  for (auto& r : s.robots) r.q = q;
  return s;
}

// Tilted cables with some spin; enough motion to exercise every coupling term.
FullSystemState swinging_state(const Rig& rig) {
  FullSystemState s = rest_state(rig.size());
  s.v0 = Vec3(0.1, -0.05, 0.2);
  if (rig.payload.rigid()) {
    s.R0 = rot_z(0.3) * rot_x(0.1);
    s.w0 = Vec3(0.5, -0.3, 1.0);
  }
  for (std::size_t i = 0; i < rig.size(); ++i) {
    auto& r = s.robots[i];
    r.q = (rot_x(0.3 + 0.1 * i) * rot_y(-0.2 * i) * -Vec3::UnitZ()).normalized();
    r.w = Vec3(1.0, 0.5 * i, -0.7);
    r.w -= r.w.dot(r.q) * r.q;
    r.omega = Vec3(0.2, -0.1, 0.3 * i);
  }
  return s;
}

std::vector<RobotInput> zero_inputs(std::size_t n) { return std::vector<RobotInput>(n); }

TEST(QuadPosition, CableOffsetFromPointMass) {
  Rig rig = single_rig();
  auto s = rest_state(1, Vec3::UnitZ());
  EXPECT_TRUE(quad_position(s, rig, 0).isApprox(Vec3(0.0, 0.0, 0.5), 1e-15));
}

TEST(QuadPosition, AttachmentOffsetTranslates) {
  Rig rig = single_rig(0.5, PayloadKind::RigidBody);
  rig.payload.inertia = Mat3::Identity() * 1e-5;
  rig.robots[0].attachment = Vec3(0.1, 0.0, 0.0);
  auto s = rest_state(1, Vec3::UnitZ());
  EXPECT_TRUE(quad_position(s, rig, 0).isApprox(Vec3(0.1, 0.0, 0.5), 1e-15));
  s.R0 = rot_z(std::numbers::pi / 2.0);
  EXPECT_LE((quad_position(s, rig, 0) - Vec3(0.0, 0.1, 0.5)).norm(), 1e-15);
}

TEST(QuadVelocity, Examples) {
  Rig rig = single_rig();
  auto s = rest_state(1, Vec3::UnitZ());
  EXPECT_EQ(quad_velocity(s, rig, 0), Vec3::Zero());
  s.v0 = Vec3(1.0, 0.0, 0.0);
  EXPECT_TRUE(quad_velocity(s, rig, 0).isApprox(Vec3(1.0, 0.0, 0.0)));
  s.v0.setZero();
  s.robots[0].w = Vec3(0.0, 1.0, 0.0);
  EXPECT_LE((quad_velocity(s, rig, 0) - Vec3(-0.5, 0.0, 0.0)).norm(), 1e-15);
}

TEST(Step, HoverEquilibriumIsFixedPoint) {
  Rig rig = single_rig();
  SimConfig cfg;
  for (const Vec3& q : {Vec3(Vec3::UnitZ()), Vec3(-Vec3::UnitZ())}) {
    auto s0 = rest_state(1, q);
    std::vector<RobotInput> u(1);
    u[0].thrust = (rig.robots[0].mass + rig.payload.mass) * cfg.gravity;
    auto s = s0;
    for (int k = 0; k < 1000; ++k) {
      auto next = step(s, u, rig, cfg);
      if (k == 0) EXPECT_LE((next.p0 - s.p0).norm(), 1e-6);
      s = next;
    }
    EXPECT_LE((s.p0 - s0.p0).norm(), 1e-4);
    EXPECT_LE((s.robots[0].q - s0.robots[0].q).norm(), 1e-4);
    EXPECT_LE(s.v0.norm(), 1e-4);
  }
}

TEST(Step, ZeroThrustIsFreeFall) {
  for (const Rig& rig : {single_rig(), triangle_rig()}) {
    SimConfig cfg;
    auto s = rest_state(rig.size());
    s.R0 = rot_z(0.4);
    s.robots[0].q = rot_x(0.3) * -Vec3::UnitZ();
    auto acc = accelerations(s, zero_inputs(rig.size()), rig, cfg);
    EXPECT_NEAR(acc.payload_linear.z(), -cfg.gravity, 1e-9);
    EXPECT_NEAR(acc.payload_linear.x(), 0.0, 1e-9);
  }
}

TEST(Step, SwingPeriodMatchesMinimalCoordinatePendulum) {
  // Thrust cancels the total weight, so the centre of mass is unaccelerated and the
  // relative coordinate is a pendulum in the field g (m + m0) / m.
  Rig rig = single_rig(0.5);
  SimConfig cfg;
  cfg.dt = 1e-4;
  const double m = rig.robots[0].mass, m0 = rig.payload.mass, l = rig.robots[0].cable_length;
  const double g_eff = cfg.gravity * (m + m0) / m;
  const double theta0 = 5.0 * std::numbers::pi / 180.0;
  const double t_lin = 2.0 * std::numbers::pi * std::sqrt(l / g_eff);

  auto s = rest_state(1);
  s.robots[0].q = rot_y(theta0) * -Vec3::UnitZ();
  std::vector<RobotInput> u(1);
  u[0].thrust = (m + m0) * cfg.gravity;

  std::vector<double> crossings;
  double prev = s.robots[0].q.x();
  const int steps = static_cast<int>(10.5 * t_lin / cfg.dt);
  for (int k = 0; k < steps; ++k) {
    s = step(s, u, rig, cfg);
    const double cur = s.robots[0].q.x();
    if (prev < 0.0 && cur >= 0.0) crossings.push_back((k + prev / (prev - cur)) * cfg.dt);
    prev = cur;
  }
  const auto ref = oracle::pendulum_rk4(theta0, g_eff, l, 10.5 * t_lin, 1e-5);
  ASSERT_GE(crossings.size(), 10u);
  ASSERT_GE(ref.crossing_times.size(), 10u);
  const double period_sim = (crossings[9] - crossings[0]) / 9.0;
  const double period_ref = (ref.crossing_times[9] - ref.crossing_times[0]) / 9.0;
  EXPECT_NEAR(period_sim / period_ref, 1.0, 0.02);
  EXPECT_NEAR(period_ref / t_lin, 1.0, 0.01);
}

TEST(Step, ManifoldInvariantsHoldEveryStep) {
  Rig rig = triangle_rig();
  SimConfig cfg;
  auto s = swinging_state(rig);
  std::vector<RobotInput> u(3);
  for (auto& in : u) {
    in.thrust = 0.2;
    in.torque = Vec3(1e-6, -2e-6, 1e-7);
  }
  for (int k = 0; k < 2000; ++k) {
    s = step(s, u, rig, cfg);
    EXPECT_LE((s.R0.transpose() * s.R0 - Mat3::Identity()).norm(), 1e-9);
    EXPECT_NEAR(s.R0.determinant(), 1.0, 1e-9);
    for (const auto& r : s.robots) {
      EXPECT_NEAR(r.q.norm(), 1.0, 1e-9);
      EXPECT_NEAR(r.q.dot(r.w), 0.0, 1e-9);
      EXPECT_LE((r.R.transpose() * r.R - Mat3::Identity()).norm(), 1e-9);
      EXPECT_NEAR(r.R.determinant(), 1.0, 1e-9);
    }
  }
}

TEST(Step, NonFiniteInputThrows) {
  Rig rig = single_rig();
  auto s = rest_state(1);
  std::vector<RobotInput> u(1);
  u[0].thrust = std::nan("");
  try {
    step(s, u, rig, SimConfig{});
    FAIL() << "expected NonFiniteState";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteState);
  }
}

TEST(Energy, RestStateIsPotentialOnly) {
  Rig rig = single_rig();
  auto s = rest_state(1);
  const double g = 9.81;
  const double expected = rig.payload.mass * g * 1.0 + rig.robots[0].mass * g * 1.5;
  EXPECT_NEAR(mechanical_energy(s, rig, g), expected, 1e-12);
  EXPECT_EQ(kinetic_energy(s, rig), 0.0);
}

TEST(Energy, KineticPartIsQuadratic) {
  Rig rig = triangle_rig();
  auto s = swinging_state(rig);
  auto s2 = s;
  s2.v0 *= 2.0;
  s2.w0 *= 2.0;
  for (auto& r : s2.robots) {
    r.w *= 2.0;
    r.omega *= 2.0;
  }
  EXPECT_NEAR(kinetic_energy(s2, rig), 4.0 * kinetic_energy(s, rig), 1e-12);
}

// Swing with the weight cancelled by constant world-vertical thrusts. Constant forces
// are conservative, so energy minus their work is an invariant of the exact flow.
double energy_drift_per_second(const Rig& rig, double dt) {
  SimConfig cfg;
  cfg.dt = dt;
  auto s = swinging_state(rig);
  s.v0.setZero();
  for (auto& r : s.robots) r.omega.setZero();
  double total_mass = rig.payload.mass;
  for (const auto& r : rig.robots) total_mass += r.mass;
  std::vector<RobotInput> u(rig.size());
  for (auto& in : u) in.thrust = total_mass * cfg.gravity / static_cast<double>(rig.size());
  auto invariant = [&](const FullSystemState& st) {
    double e = mechanical_energy(st, rig, cfg.gravity);
    for (std::size_t i = 0; i < rig.size(); ++i) e -= u[i].thrust * quad_position(st, rig, i).z();
    return e;
  };
  const double e0 = invariant(s);
  const double ke0 = kinetic_energy(s, rig);
  const int steps = static_cast<int>(std::lround(1.0 / dt));
  for (int k = 0; k < steps; ++k) s = step(s, u, rig, cfg);
  return std::abs(invariant(s) - e0) / ke0;
}

TEST(Energy, UnforcedSwingDriftIsSmallAndFirstOrder) {
  for (const Rig& rig : {single_rig(), triangle_rig()}) {
    const double d1 = energy_drift_per_second(rig, 1e-4);
    const double d2 = energy_drift_per_second(rig, 5e-5);
    EXPECT_LE(d1, 1e-3);
    // Richardson: a first-order scheme halves its drift with dt.
    EXPECT_NEAR(d1 / d2, 2.0, 0.3);
  }
}

TEST(Step, GlobalErrorIsFirstOrder) {
  Rig rig = triangle_rig();
  auto run = [&](double dt) {
    SimConfig cfg;
    cfg.dt = dt;
    auto s = swinging_state(rig);
    const int steps = static_cast<int>(std::lround(1.0 / dt));
    for (int k = 0; k < steps; ++k) s = step(s, zero_inputs(3), rig, cfg);
    return s;
  };
  auto dist = [](const FullSystemState& a, const FullSystemState& b) {
    double d = (a.p0 - b.p0).norm() + (a.R0 - b.R0).norm();
    for (std::size_t i = 0; i < a.robots.size(); ++i) d += (a.robots[i].q - b.robots[i].q).norm();
    return d;
  };
  const auto ref = run(1e-6);
  const double e1 = dist(run(4e-4), ref);
  const double e2 = dist(run(2e-4), ref);
  const double e3 = dist(run(1e-4), ref);
  EXPECT_NEAR(e1 / e2, 2.0, 0.3);
  EXPECT_NEAR(e2 / e3, 2.0, 0.3);
}

TEST(Step, QuadVelocityMatchesFiniteDifference) {
  Rig rig = triangle_rig();
  SimConfig cfg;
  cfg.dt = 1e-4;
  auto s = swinging_state(rig);
  for (int k = 0; k < 100; ++k) {
    auto next = step(s, zero_inputs(3), rig, cfg);
    for (std::size_t i = 0; i < 3; ++i) {
      const Vec3 fd = (quad_position(next, rig, i) - quad_position(s, rig, i)) / cfg.dt;
      EXPECT_LE((fd - quad_velocity(s, rig, i)).norm(), 50.0 * cfg.dt);
    }
    s = next;
  }
}

TEST(Config, RejectsInvalidParameters) {
  SimConfig cfg;
  cfg.dt = 5e-3;
  EXPECT_THROW(cfg.validate(), Error);
  auto q = QuadrotorParams::crazyflie(0.1, 0.25);
  EXPECT_THROW(q.validate(), Error);
  PayloadParams p;
  p.kind = PayloadKind::RigidBody;
  p.inertia = Mat3::Identity();
  p.inertia(0, 1) = 0.5;
  EXPECT_THROW(p.validate(), Error);
  EXPECT_NO_THROW(triangle_rig().validate());
}

}  // namespace
