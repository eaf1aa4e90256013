#pragma once

#include "cablelift/allocation.hpp"

#include <cstdint>
#include <random>

namespace cablelift {

/// One robot pair with the tilted half-spaces the allocator would hand to QP_mu.
/// Everything in the payload frame; attachments are zero for a point mass.
struct PairFixture {
  PayloadKind kind = PayloadKind::PointMass;
  Vec3 p_ai = Vec3::Zero();
  Vec3 p_aj = Vec3::Zero();
  double r_i = 0.0, r_j = 0.0, l_i = 0.0, l_j = 0.0;
  /// World up in the payload frame.
  Vec3 up = Vec3::UnitZ();
  TiltedPair planes;

  double radius_sum() const { return r_i + r_j; }
  /// Robot distance for cable directions (payload towards robot).
  double distance(const Vec3& u_i, const Vec3& u_j) const {
    return ((p_ai + l_i * u_i) - (p_aj + l_j * u_j)).norm();
  }
};

/// Random but physically plausible pair (robots above the payload, separated, upward
/// F_d), passed through QP_Fd / QP_svm and the tilt stage. Retries until the
/// pipeline accepts the pair.
PairFixture random_pair_fixture(PayloadKind kind, std::mt19937_64& rng);

enum class Execution { Serial, Parallel };

struct SeparationOptions {
  std::uint64_t samples = 1'000'000;
  std::uint64_t seed = 0;
  /// Only directions with a non-negative world-up component (taut cables pulling up).
  bool upper_hemisphere = false;
  Execution execution = Execution::Parallel;
};

struct SeparationResult {
  std::uint64_t samples = 0;
  double min_distance = 0.0;
  Vec3 u_i = Vec3::Zero();
  Vec3 u_j = Vec3::Zero();
  /// Samples closer than r_i + r_j - 1e-6.
  std::uint64_t violations = 0;
};

/// Uniform samples of (u_i, u_j) inside the pair's half-spaces. Samples are drawn in
/// fixed chunks with per-chunk seeds, so both executions give bitwise identical results.
SeparationResult check_separation(const PairFixture& fixture, const SeparationOptions& options = {});

}  // namespace cablelift
