#include "cablelift/closed_loop.hpp"
#include "cablelift/error.hpp"
#include "cablelift/trajectory.hpp"

#include <gtest/gtest.h>

#include <random>

namespace {

using namespace cablelift;

double sampled_peak_speed(double period, double scale) {
  double best = 0.0;
  for (int k = 0; k <= 200000; ++k) best = std::max(best, figure8(period * k / 200000.0, period, scale).dp0r.norm());
  return best;
}

Scenario hover_scenario(double radius = 0.15) {
  Scenario sc;
  sc.rig.payload.mass = 0.01;
  for (double l : {0.5, 0.5, 0.5}) sc.rig.robots.push_back(QuadrotorParams::crazyflie(l, radius));
  sc.trajectory.kind = TrajectoryKind::Hover;
  sc.duration = 2.0;
  return sc;
}

TEST(Figure8, PeriodicClosure) {
  const double T = 13.0, s = 0.33;
  const auto a = figure8(0.0, T, s), b = figure8(T, T, s);
  EXPECT_LE((a.p0r - b.p0r).norm(), 1e-12);
  EXPECT_LE(a.dp0r.norm(), 1e-15);
  EXPECT_LE(b.dp0r.norm(), 1e-12);
  EXPECT_LE(b.ddp0r.norm(), 1e-12);
}

TEST(Figure8, PeakSpeedPresets) {
  for (auto [T, v] : {std::pair{13.0, 0.5}, std::pair{15.0, 0.4}}) {
    const double scale = Figure8::scale_for_peak_speed(T, v);
    EXPECT_NEAR(sampled_peak_speed(T, scale), v, 0.02 * v);
  }
}

TEST(Figure8, DerivativesMatchFiniteDifferences) {
  const double T = 13.0, s = 0.33;
  for (double t : {0.7, 3.1, 6.5, 9.9, 12.2}) {
    double prev_v = 0.0, prev_a = 0.0;
    for (double h : {1e-2, 5e-3, 2.5e-3}) {
      const auto m = figure8(t - h, T, s), c = figure8(t, T, s), p = figure8(t + h, T, s);
      const double ev = ((p.p0r - m.p0r) / (2.0 * h) - c.dp0r).norm();
      const double ea = ((p.dp0r - m.dp0r) / (2.0 * h) - c.ddp0r).norm();
      if (prev_v > 1e-10) EXPECT_NEAR(prev_v / ev, 4.0, 0.3);
      if (prev_a > 1e-10) EXPECT_NEAR(prev_a / ea, 4.0, 0.3);
      prev_v = ev;
      prev_a = ea;
    }
  }
}

TEST(Figure8, RejectsBadPeriod) {
  EXPECT_THROW(figure8(0.0, 0.0, 1.0), Error);
}

TEST(YawRamp, ReferenceRotates) {
  auto ref = hover_reference(Vec3::Zero(), 2.0, 0.25);
  EXPECT_LE((ref.R0r - rot_z(0.5)).norm(), 1e-15);
  EXPECT_DOUBLE_EQ(ref.w0r.z(), 0.25);
}

TEST(VelocityReference, BoundedAccelerationForRandomCommands) {
  SmoothingLimits lim;
  VelocityReference vr(Vec3::Zero(), lim);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  double max_a = 0.0, max_v = 0.0;
  for (int k = 0; k < 20000; ++k) {
    if (k % 37 == 0) vr.command_velocity(Vec3(U(rng), U(rng), U(rng)));
    if (k % 501 == 0) vr.nudge(Vec3(U(rng), U(rng), 0.0));
    const auto ref = vr.advance(0.004);
    max_a = std::max(max_a, ref.ddp0r.norm());
    max_v = std::max(max_v, ref.dp0r.norm());
  }
  EXPECT_LE(max_a, lim.max_accel + 1e-12);
  EXPECT_LE(max_v, lim.max_speed * 1.2);
}

TEST(VelocityReference, CommandClampedAndHeld) {
  VelocityReference vr(Vec3(0, 0, 1));
  vr.command_velocity(Vec3(3.0, 0.0, 0.0));
  EXPECT_NEAR(vr.target_velocity().norm(), 0.5, 1e-15);
  for (int k = 0; k < 2000; ++k) vr.advance(0.004);
  EXPECT_NEAR(vr.current().dp0r.x(), 0.5, 1e-6);
  vr.hold();
  for (int k = 0; k < 2000; ++k) vr.advance(0.004);
  EXPECT_LE(vr.current().dp0r.norm(), 1e-6);
}

TEST(VelocityReference, NudgeIsFlownOut) {
  VelocityReference vr(Vec3::Zero());
  vr.nudge(Vec3(0.2, -0.1, 0.05));
  for (int k = 0; k < 3000; ++k) vr.advance(0.004);
  EXPECT_LE((vr.current().p0r - Vec3(0.2, -0.1, 0.05)).norm(), 2e-3);
  EXPECT_LE(vr.current().dp0r.norm(), 1e-3);
}

TEST(PresetTable, ThreeRobots) {
  Rig rig = hover_scenario().rig;
  const auto table = preset_table(rig);
  ASSERT_TRUE(table.count("line"));
  ASSERT_TRUE(table.count("triangle"));
  // Horizontal components of the line preset are collinear.
  const auto& line = table.at("line");
  for (const auto& d : line) EXPECT_LE(std::abs(d.y()), 1e-15);
}

TEST(PresetTable, TwoRobotsLineOnly) {
  Rig rig = hover_scenario().rig;
  rig.robots.resize(2);
  const auto table = preset_table(rig);
  EXPECT_EQ(table.size(), 1u);
  EXPECT_TRUE(table.count("line"));
}

TEST(PresetTable, IncompatibleCount) {
  Rig rig = hover_scenario().rig;
  rig.robots.resize(1);
  try {
    preset_table(rig);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PresetUnavailable);
  }
}

TEST(PresetTable, RescaledSumMatchesForce) {
  Rig rig = hover_scenario().rig;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (const auto& [name, dirs] : preset_table(rig)) {
    for (int k = 0; k < 50; ++k) {
      const Vec3 F(U(rng), U(rng), 0.05 + std::abs(U(rng)));
      Vec3 sum = Vec3::Zero();
      for (const auto& m : rescale_preset(dirs, F)) sum += m;
      EXPECT_LE((sum - F).norm(), 1e-12) << name;
    }
  }
}

TEST(Scenario, ValidationErrors) {
  Scenario sc = hover_scenario();
  sc.duration = 0.0;
  EXPECT_THROW(sc.validate(), Error);
  sc = hover_scenario();
  sc.schema_version = 2;
  EXPECT_THROW(sc.validate(), Error);
  sc = hover_scenario();
  sc.trajectory.commands.push_back({1.0, {CommandKind::Preset, Vec3::Zero(), std::string("diamond")}});
  EXPECT_THROW(sc.validate(), Error);
}

TEST(Equilibrium, IsFixedPointOfAllocation) {
  Scenario sc = hover_scenario();
  const auto ref = hover_reference(Vec3(0, 0, 1));
  const auto s = equilibrium_state(sc, ref);
  CableForceAllocator alloc(sc.rig, sc.allocation);
  PayloadController ctl(sc.rig, sc.gains);
  std::vector<Vec3> mu;
  for (int k = 0; k < 3; ++k) mu = alloc.allocate(s, ctl.wrench(s, ref));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LE((s.robots[i].q + mu[i].normalized()).norm(), 1e-7);
  // Tilted planes bound the angle only within the tilt plane; see the separation check.
  EXPECT_GE(min_pairwise_distance(s, sc.rig), 0.9 * 0.3);
}

TEST(ClosedLoop, HoverHoldsEquilibrium) {
  Scenario sc = hover_scenario();
  ClosedLoop loop(sc, AllocationMode::QpCascade);
  const auto ref = loop.initial_reference();
  for (int k = 0; k < 500; ++k) loop.advance(ref);
  EXPECT_LE((loop.state().p0 - ref.p0r).norm(), 1e-6);
  EXPECT_NEAR(loop.time(), 2.0, 1e-12);
}

TEST(ClosedLoop, DeterministicRecords) {
  Scenario sc = hover_scenario();
  sc.initial_offset = 0.02;
  sc.seed = 11;
  ClosedLoop a(sc, AllocationMode::QpCascade), b(sc, AllocationMode::QpCascade);
  for (int k = 0; k < 200; ++k) {
    const auto& ra = a.advance(a.initial_reference());
    const auto& rb = b.advance(b.initial_reference());
    ASSERT_EQ(ra.p0, rb.p0);
    for (std::size_t i = 0; i < 3; ++i) ASSERT_EQ(ra.mu[i], rb.mu[i]);
  }
}

TEST(ClosedLoop, ResetRestoresInitialState) {
  Scenario sc = hover_scenario();
  sc.initial_offset = 0.02;
  ClosedLoop loop(sc, AllocationMode::QpCascade);
  const Vec3 p = loop.state().p0;
  for (int k = 0; k < 50; ++k) loop.advance(loop.initial_reference());
  loop.reset();
  EXPECT_EQ(loop.state().p0, p);
  EXPECT_EQ(loop.tick(), 0);
}

TEST(ClosedLoop, HardFloorAborts) {
  // Baseline pulls all cables vertical; equal lengths put every robot on one point.
  Scenario sc = hover_scenario();
  ClosedLoop loop(sc, AllocationMode::Baseline);
  try {
    for (int k = 0; k < 2000; ++k) loop.advance(loop.initial_reference());
    FAIL() << "expected abort";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AbortedRun);
  }
  EXPECT_LT(loop.last().min_clearance, ClosedLoop::kHardFloor);
}

TEST(ClosedLoop, UnknownPresetRejected) {
  ClosedLoop loop(hover_scenario(), AllocationMode::QpCascade);
  EXPECT_THROW(loop.set_preset(std::string("diamond")), Error);
  EXPECT_NO_THROW(loop.set_preset(std::string("line")));
  EXPECT_NO_THROW(loop.set_preset(std::nullopt));
}

TEST(Metrics, MeanAndStdOfAbsoluteErrors) {
  MetricsAccumulator acc(1.0);
  TickRecord r;
  r.min_distance = 1.0;
  r.min_clearance = 2.0;
  for (int k = 0; k < 4; ++k) {
    r.t = 0.5 * k;
    r.position_error = Vec3(k % 2 ? 0.01 : -0.03, 0.0, 0.0);
    acc.add(r);
  }
  const auto m = acc.finish();
  // Samples at t = 1.0 and 1.5 only: |-3| cm and |1| cm.
  EXPECT_EQ(m.samples, 2);
  EXPECT_NEAR(m.position_mean_cm[0], 2.0, 1e-12);
  EXPECT_NEAR(m.position_std_cm[0], std::sqrt(2.0), 1e-12);
}

TEST(Rpy, RecoversAngles) {
  const Mat3 R = rot_z(0.3) * rot_y(-0.2) * rot_x(0.1);
  EXPECT_LE((rpy(R) - Vec3(0.1, -0.2, 0.3)).norm(), 1e-14);
}

}  // namespace
