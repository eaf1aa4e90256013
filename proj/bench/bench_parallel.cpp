// Serial reference vs OpenMP kernels. On a single core the parallel versions only show
// their overhead; run on a multi-core machine for speedups.

#include "cablelift/allocation.hpp"
#include "cablelift/separation.hpp"

#include <benchmark/benchmark.h>

#include <numbers>
#include <random>

using namespace cablelift;

namespace {

struct Case {
  Rig rig;
  FullSystemState state;
  DesiredWrench wrench;
};

// n robots spread evenly above a rigid plate, hovering.
Case hover_case(int n) {
  Case c;
  c.rig.payload.kind = PayloadKind::RigidBody;
  c.rig.payload.mass = 0.02;
  c.rig.payload.inertia = Vec3(3e-4, 3e-4, 6e-4).asDiagonal();
  c.state.p0 = Vec3(0, 0, 1);
  c.state.robots.resize(n);
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * i / n;
    c.rig.robots.push_back(QuadrotorParams::crazyflie(0.5, 0.1, Vec3(0.3 * std::cos(a), 0.3 * std::sin(a), 0.0)));
    c.state.robots[i].q = -Vec3(0.5 * std::cos(a), 0.5 * std::sin(a), 1.0).normalized();
  }
  c.wrench.force = Vec3(0.01, -0.02, c.rig.payload.mass * kDefaultGravity);
  c.wrench.moment = Vec3(1e-4, -2e-4, 0.0);
  return c;
}

void allocation(benchmark::State& st, bool parallel) {
  const Case c = hover_case(static_cast<int>(st.range(0)));
  AllocatorConfig cfg;
  cfg.parallel = parallel;
  CableForceAllocator alloc(c.rig, cfg);
  for (auto _ : st) benchmark::DoNotOptimize(alloc.allocate(c.state, c.wrench).data());
}

void separation(benchmark::State& st, Execution exec) {
  std::mt19937_64 rng(7);
  const PairFixture f = random_pair_fixture(PayloadKind::RigidBody, rng);
  SeparationOptions opt;
  opt.samples = static_cast<std::uint64_t>(st.range(0));
  opt.execution = exec;
  for (auto _ : st) benchmark::DoNotOptimize(check_separation(f, opt).min_distance);
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations()) * st.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(allocation, serial, false)->Arg(3)->Arg(4)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(allocation, openmp, true)->Arg(3)->Arg(4)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(separation, serial, Execution::Serial)->Arg(1 << 18)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(separation, openmp, Execution::Parallel)->Arg(1 << 18)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
