#pragma once

#include "cablelift/controller.hpp"
#include "cablelift/qp.hpp"
#include "cablelift/sim.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cablelift {

/// Set of x with n'x - a <= 0.
struct Halfspace {
  Vec3 n = Vec3::UnitX();
  double a = 0.0;

  double violation(const Vec3& x) const { return n.dot(x) - a; }
  bool contains(const Vec3& x, double tol = 0.0) const { return violation(x) <= tol; }
};

/// Constraint on the cable force of one robot (world frame).
struct RobotHalfspace {
  std::size_t robot = 0;
  Halfspace h;
};

struct AllocationMap {
  PayloadKind kind = PayloadKind::PointMass;
  MatX P;
  std::vector<Vec3> attachments;
  int rank = 0;
  bool rank_deficient = false;

  std::size_t robots() const { return attachments.size(); }
  Eigen::Index rows() const { return P.rows(); }
};

/// Point mass: [I I ...]. Rigid body: force rows [I ...] over moment rows [hat(p_ai) ...].
/// Rank deficiency is recorded on the map, not thrown.
AllocationMap build_allocation_map(std::span<const Vec3> attachments, PayloadKind kind);

/// Right-hand side of the allocation equality: F_d, or (R0' F_d, M_d).
VecX allocation_rhs(const DesiredWrench& wrench, const Mat3& R0, const AllocationMap& map);

/// |P stack(R0' mu) - rhs|.
double allocation_residual(const AllocationMap& map, const Mat3& R0, std::span<const Vec3> mu,
                           const DesiredWrench& wrench);

/// Minimum-norm cable forces. Throws Error(SingularMap) when P P' is ill-conditioned.
std::vector<Vec3> allocate_baseline(const DesiredWrench& wrench, const Mat3& R0, const AllocationMap& map);

using QpFamily = qp::Family<double>;

/// Split of F_d between two attachments (world frame) that sums to F_d exactly and
/// keeps the pair moment close to M_d. An optional family carries warm starts.
std::pair<Vec3, Vec3> qp_fd(const Vec3& p_ai, const Vec3& p_aj, const Mat3& R0, const DesiredWrench& wrench,
                            QpFamily* family = nullptr);

/// Normal of the plane through the payload that separates p_i (negative side) from
/// p_j (positive side) with maximal margin, penalising alignment with F_d.
/// Throws Error(InfeasiblePair) when no such plane exists.
Vec3 qp_svm_pointmass(const Vec3& p_i, const Vec3& p_j, const Vec3& F_d, double lambda_s,
                      QpFamily* family = nullptr);

struct SvmPlane {
  Vec3 n = Vec3::UnitX();
  double a = 0.0;
  double s_i = 0.0;
  double s_j = 0.0;
};

/// Plane n'x = a separating robot i and its attachment (negative side) from robot j
/// and its attachment, with soft margins on the force-shifted attachment points.
/// All inputs in the payload frame. Throws Error(InfeasiblePair).
SvmPlane qp_svm_rigid(const Vec3& p_i, const Vec3& p_j, const Vec3& p_ai, const Vec3& p_aj, const Vec3& F_di,
                      const Vec3& F_dj, double lambda_s, QpFamily* family = nullptr);

/// 2 asin(r / 2l). Throws Error(BadGeometry) unless 0 < r < 2l.
double tilt_angle(double r, double l);

struct TiltedPair {
  /// Position-space half-spaces: robot i must satisfy hi, robot j hj.
  Halfspace hi;
  Halfspace hj;
  Vec3 axis = Vec3::UnitY();
  bool degenerate_axis = false;
  bool no_intersection = false;
  /// Highest points of the sphere/plane circles (rigid only).
  Vec3 top_i = Vec3::Zero();
  Vec3 top_j = Vec3::Zero();
};

/// Rotates n_ij about n_ij x up by alpha_i (robot i) and -alpha_j (robot j), so that
/// both half-spaces contain their robot's side and pass through the payload.
TiltedPair tilt_hyperplanes_pointmass(const Vec3& n_ij, double r_i, double r_j, double l_i, double l_j,
                                      const Vec3& up = Vec3::UnitZ());

/// Rigid version: each plane passes through its attachment point and the highest point
/// of the circle where the cable sphere meets the separating plane, then is tilted.
/// Inputs in the payload frame; up is world up expressed in the payload frame.
TiltedPair tilt_hyperplanes_rigid(const Vec3& n_ij, double a, const Vec3& p_ai, const Vec3& p_aj, double r_i,
                                  double r_j, double l_i, double l_j, const Vec3& up = Vec3::UnitZ());

enum class PreferenceSource { PreviousSolution, UserPreset };

struct FormationPreference {
  std::vector<Vec3> mu0;
  double lambda = 0.0;
  PreferenceSource source = PreferenceSource::PreviousSolution;
  std::string preset;
};

/// Scales preferred directions so that their sum matches F_d vertically and spreads the
/// horizontal remainder equally.
std::vector<Vec3> rescale_preset(std::span<const Vec3> directions, const Vec3& F_d);

struct QpAllocation {
  std::vector<Vec3> mu;
  qp::Status status = qp::Status::MaxIter;
  int iterations = 0;
  bool warm_started = false;
  double objective = 0.0;
};

/// min 1/2|mu|^2 + lambda |mu0 - mu|^2 subject to the allocation equality and the
/// per-robot half-spaces. Throws Error(Infeasible) or Error(SolverFailure).
QpAllocation allocate_qp(const DesiredWrench& wrench, const Mat3& R0, const AllocationMap& map,
                         std::span<const RobotHalfspace> halfspaces, const FormationPreference* preference = nullptr,
                         QpFamily* family = nullptr);

enum class AllocationMode { Baseline, QpCascade };

/// Counts consecutive failed periods; the last result may be reused up to `limit` times.
class HoldPolicy {
 public:
  explicit HoldPolicy(int limit = 5) : limit_(limit) {}

  /// True while holding the previous result is still allowed.
  bool on_failure() { return ++consecutive_ <= limit_; }
  void on_success() { consecutive_ = 0; }
  int consecutive() const { return consecutive_; }
  int limit() const { return limit_; }

 private:
  int limit_;
  int consecutive_ = 0;
};

struct AllocatorConfig {
  AllocationMode mode = AllocationMode::QpCascade;
  double lambda_s = 100.0;
  double lambda_continuity = 1e-2;
  double lambda_preset = 10.0;
  /// Control periods an infeasible QP_mu may reuse the last result before aborting.
  int infeasible_hold = 5;
  bool warm_start = true;
  bool parallel = false;
  qp::Settings<double> qp;
};

struct PairDiagnostics {
  std::size_t i = 0;
  std::size_t j = 0;
  int fd_iterations = 0;
  int svm_iterations = 0;
  bool fd_warm = false;
  bool svm_warm = false;
  bool degenerate_axis = false;
  bool no_intersection = false;
  double fd_seconds = 0.0;
  double svm_seconds = 0.0;
  double tilt_seconds = 0.0;
  Vec3 normal = Vec3::Zero();
};

struct AllocationDiagnostics {
  std::vector<PairDiagnostics> pairs;
  double pairs_seconds = 0.0;
  double mu_seconds = 0.0;
  double total_seconds = 0.0;
  int mu_iterations = 0;
  bool mu_warm = false;
  std::string mu_status;
  bool held = false;
  int consecutive_infeasible = 0;
  int active_halfspaces = 0;

  int total_iterations() const;
};

/// Runs the full allocation pipeline for one rig. Owns the warm-start caches of every
/// QP family; instances never share state.
class CableForceAllocator {
 public:
  CableForceAllocator(Rig rig, AllocatorConfig config = {});
  ~CableForceAllocator();
  CableForceAllocator(CableForceAllocator&&) noexcept;
  CableForceAllocator& operator=(CableForceAllocator&&) noexcept;

  /// Throws Error(AbortedRun) after too many consecutive infeasible periods and
  /// Error(InfeasiblePair) on a separating-plane failure.
  const std::vector<Vec3>& allocate(const FullSystemState& state, const DesiredWrench& wrench);

  /// Preferred cable directions (world frame, payload towards robot); nullopt reverts
  /// to continuity with the previous solution.
  void set_preset(std::optional<std::vector<Vec3>> directions, std::string name = {});
  const std::optional<std::string>& preset_name() const { return preset_name_; }

  const AllocationMap& map() const { return map_; }
  const AllocatorConfig& config() const { return config_; }
  AllocatorConfig& config() { return config_; }
  const AllocationDiagnostics& diagnostics() const { return diag_; }
  const std::vector<RobotHalfspace>& halfspaces() const { return halfspaces_; }
  /// Position-space half-spaces (payload frame) from the last tilt stage, one per pair.
  const std::vector<TiltedPair>& tilted() const { return tilted_; }
  const std::vector<Vec3>& last() const { return mu_; }

  struct NamedProblem {
    std::string name;
    qp::Problem<double> problem;
  };
  /// Data of the most recent solve of every QP family ("fd(i,j)", "svm(i,j)", "mu").
  std::vector<NamedProblem> qp_problems() const;

 private:
  struct Caches;

  void run_pair(std::size_t k, const FullSystemState& state, const DesiredWrench& wrench);

  Rig rig_;
  AllocatorConfig config_;
  AllocationMap map_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::unique_ptr<Caches> caches_;
  std::vector<TiltedPair> tilted_;
  std::vector<RobotHalfspace> halfspaces_;
  std::vector<Vec3> mu_;
  std::optional<std::vector<Vec3>> preset_;
  std::optional<std::string> preset_name_;
  AllocationDiagnostics diag_;
  HoldPolicy hold_;
};

}  // namespace cablelift
