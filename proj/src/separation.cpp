#include "cablelift/separation.hpp"

#include "cablelift/error.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <vector>

namespace cablelift {

namespace {

constexpr std::uint64_t kChunk = 1u << 14;
constexpr double kTolerance = 1e-6;

Vec3 random_unit(std::mt19937_64& rng, std::normal_distribution<double>& n) {
  while (true) {
    const Vec3 v(n(rng), n(rng), n(rng));
    const double norm = v.norm();
    if (norm > 1e-12) return v / norm;
  }
}

/// Uniform on {u : n'u <= 0} by reflecting the excluded half onto the allowed one.
Vec3 sample_halfspace(const Vec3& normal, const Vec3& up, bool upper, std::mt19937_64& rng,
                      std::normal_distribution<double>& n) {
  while (true) {
    Vec3 u = random_unit(rng, n);
    const double s = normal.dot(u);
    if (s > 0.0) u -= 2.0 * s * normal;
    if (!upper || u.dot(up) >= 0.0) return u;
  }
}

Vec3 direction_with_tilt(std::mt19937_64& rng, double max_tilt) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double az = 2.0 * std::numbers::pi * U(rng);
  const double tilt = max_tilt * U(rng);
  return Vec3(std::sin(tilt) * std::cos(az), std::sin(tilt) * std::sin(az), std::cos(tilt));
}

struct Chunk {
  double min_distance = std::numeric_limits<double>::infinity();
  Vec3 u_i = Vec3::Zero();
  Vec3 u_j = Vec3::Zero();
  std::uint64_t violations = 0;
};

Chunk run_chunk(const PairFixture& f, const SeparationOptions& o, std::uint64_t c, std::uint64_t count) {
  std::seed_seq seq{static_cast<std::uint32_t>(o.seed), static_cast<std::uint32_t>(o.seed >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> n;
  const Vec3 ni = f.planes.hi.n.normalized(), nj = f.planes.hj.n.normalized();
  const double limit = f.radius_sum() - kTolerance;
  Chunk out;
  for (std::uint64_t s = 0; s < count; ++s) {
    const Vec3 ui = sample_halfspace(ni, f.up, o.upper_hemisphere, rng, n);
    const Vec3 uj = sample_halfspace(nj, f.up, o.upper_hemisphere, rng, n);
    const double d = f.distance(ui, uj);
    if (d < limit) ++out.violations;
    if (d < out.min_distance) {
      out.min_distance = d;
      out.u_i = ui;
      out.u_j = uj;
    }
  }
  return out;
}

}  // namespace

PairFixture random_pair_fixture(PayloadKind kind, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> N;
  const bool rigid = kind == PayloadKind::RigidBody;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    PairFixture f;
    f.kind = kind;
    f.r_i = 0.05 + 0.1 * U(rng);
    f.r_j = 0.05 + 0.1 * U(rng);
    f.l_i = 0.25 + 0.5 * U(rng);
    f.l_j = 0.25 + 0.5 * U(rng);
    if (f.r_i >= 2.0 * f.l_i || f.r_j >= 2.0 * f.l_j) continue;
    Mat3 R0 = Mat3::Identity();
    if (rigid) {
      const double half = 0.02 + 0.2 * U(rng);
      const Vec3 axis = Vec3(N(rng), N(rng), 0.2 * N(rng)).normalized();
      f.p_ai = -half * axis + 0.01 * Vec3(N(rng), N(rng), N(rng));
      f.p_aj = half * axis + 0.01 * Vec3(N(rng), N(rng), N(rng));
      R0 = Eigen::AngleAxisd(0.3 * N(rng), Vec3(N(rng), N(rng), N(rng)).normalized()).toRotationMatrix();
      f.up = R0.transpose() * Vec3::UnitZ();
    }
    // Current robot positions, payload frame.
    const Vec3 p_i = f.p_ai + f.l_i * (R0.transpose() * direction_with_tilt(rng, 1.0));
    const Vec3 p_j = f.p_aj + f.l_j * (R0.transpose() * direction_with_tilt(rng, 1.0));
    if ((p_i - p_j).norm() < 0.05) continue;
    DesiredWrench w;
    w.force = Vec3(0.1 * N(rng), 0.1 * N(rng), 0.2 + U(rng));
    w.moment = rigid ? Vec3(0.005 * N(rng), 0.005 * N(rng), 0.002 * N(rng)) : Vec3::Zero();
    const double lambda_s = U(rng) < 0.5 ? 0.0 : 100.0;
    try {
      if (rigid) {
        const auto [F_di, F_dj] = qp_fd(f.p_ai, f.p_aj, R0, w);
        const SvmPlane plane =
            qp_svm_rigid(p_i, p_j, f.p_ai, f.p_aj, R0.transpose() * F_di, R0.transpose() * F_dj, lambda_s);
        f.planes = tilt_hyperplanes_rigid(plane.n, plane.a, f.p_ai, f.p_aj, f.r_i, f.r_j, f.l_i, f.l_j, f.up);
      } else {
        const Vec3 n = qp_svm_pointmass(p_i, p_j, w.force, lambda_s);
        f.planes = tilt_hyperplanes_pointmass(n, f.r_i, f.r_j, f.l_i, f.l_j);
      }
    } catch (const Error&) {
      continue;
    }
    if (f.planes.degenerate_axis || f.planes.no_intersection) continue;
    return f;
  }
  throw Error(ErrorCode::BadGeometry, "could not draw a separable pair fixture");
}

SeparationResult check_separation(const PairFixture& fixture, const SeparationOptions& options) {
  if (options.samples == 0) throw Error(ErrorCode::InvalidConfig, "samples must be positive");
  const std::uint64_t chunks = (options.samples + kChunk - 1) / kChunk;
  std::vector<Chunk> parts(chunks);
  const auto nchunks = static_cast<long long>(chunks);
  const bool parallel = options.execution == Execution::Parallel;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (long long c = 0; c < nchunks; ++c) {
    const auto cu = static_cast<std::uint64_t>(c);
    const std::uint64_t count = std::min(kChunk, options.samples - cu * kChunk);
    parts[cu] = run_chunk(fixture, options, cu, count);
  }
  // Fixed reduction order keeps the argmin independent of scheduling.
  SeparationResult r;
  r.samples = options.samples;
  r.min_distance = std::numeric_limits<double>::infinity();
  for (const Chunk& p : parts) {
    r.violations += p.violations;
    if (p.min_distance < r.min_distance) {
      r.min_distance = p.min_distance;
      r.u_i = p.u_i;
      r.u_j = p.u_j;
    }
  }
  return r;
}

}  // namespace cablelift
