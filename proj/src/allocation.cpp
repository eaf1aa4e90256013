#include "cablelift/allocation.hpp"

#include "cablelift/error.hpp"

#include <chrono>
#include <exception>
#include <string>

namespace cablelift {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kInf = std::numeric_limits<double>::infinity();
// Accept an unconverged ADMM iterate only when it is this close to feasible.
constexpr double kLooseResidual = 1e-4;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const qp::Solution<double>& solve_in(QpFamily* family, std::unique_ptr<QpFamily>& local,
                                     const qp::Problem<double>& problem) {
  if (!family) {
    local = std::make_unique<QpFamily>(problem.num_variables(), problem.num_constraints());
    family = local.get();
  }
  family->update(problem);
  return family->solve();
}

bool usable(const qp::Solution<double>& sol) {
  return sol.status == qp::Status::Solved ||
         (sol.status == qp::Status::MaxIter && sol.primal_residual <= kLooseResidual && sol.x.allFinite());
}

Mat3 payload_rotation(const AllocationMap& map, const Mat3& R0) {
  return map.kind == PayloadKind::RigidBody ? R0 : Mat3::Identity();
}

Vec3 tilt_axis(const Vec3& n, const Vec3& up, bool& degenerate) {
  Vec3 axis = n.cross(up);
  degenerate = axis.norm() < 1e-9;
  if (degenerate) {
    axis = n.cross(Vec3::UnitX());
    if (axis.norm() < 1e-9) axis = Vec3::UnitY();
  }
  return axis.normalized();
}

}  // namespace

AllocationMap build_allocation_map(std::span<const Vec3> attachments, PayloadKind kind) {
  AllocationMap map;
  map.kind = kind;
  map.attachments.assign(attachments.begin(), attachments.end());
  const auto n = static_cast<Eigen::Index>(attachments.size());
  const bool rigid = kind == PayloadKind::RigidBody;
  map.P = MatX::Zero(rigid ? 6 : 3, 3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    map.P.block<3, 3>(0, 3 * i).setIdentity();
    if (rigid) map.P.block<3, 3>(3, 3 * i) = hat(attachments[static_cast<std::size_t>(i)]);
  }
  Eigen::JacobiSVD<MatX> svd(map.P);
  const auto& s = svd.singularValues();
  const double tol = 1e-10 * std::max(1.0, s.size() > 0 ? s[0] : 0.0);
  map.rank = static_cast<int>((s.array() > tol).count());
  map.rank_deficient = map.rank < map.P.rows();
  return map;
}

VecX allocation_rhs(const DesiredWrench& wrench, const Mat3& R0, const AllocationMap& map) {
  VecX rhs(map.rows());
  if (map.kind == PayloadKind::RigidBody) {
    rhs.head<3>() = R0.transpose() * wrench.force;
    rhs.tail<3>() = wrench.moment;
  } else {
    rhs = wrench.force;
  }
  return rhs;
}

double allocation_residual(const AllocationMap& map, const Mat3& R0, std::span<const Vec3> mu,
                           const DesiredWrench& wrench) {
  const Mat3 R = payload_rotation(map, R0);
  VecX stacked(3 * static_cast<Eigen::Index>(mu.size()));
  for (std::size_t i = 0; i < mu.size(); ++i) stacked.segment<3>(3 * static_cast<Eigen::Index>(i)) = R.transpose() * mu[i];
  return (map.P * stacked - allocation_rhs(wrench, R0, map)).norm();
}

std::vector<Vec3> allocate_baseline(const DesiredWrench& wrench, const Mat3& R0, const AllocationMap& map) {
  const MatX PPt = map.P * map.P.transpose();
  Eigen::JacobiSVD<MatX> svd(PPt);
  const auto& s = svd.singularValues();
  const double smin = s[s.size() - 1];
  if (!(smin > 0.0) || s[0] / smin > 1e12) {
    throw Error(ErrorCode::SingularMap, "allocation map is singular or ill-conditioned");
  }
  const VecX stacked = map.P.transpose() * PPt.ldlt().solve(allocation_rhs(wrench, R0, map));
  const Mat3 R = payload_rotation(map, R0);
  std::vector<Vec3> mu(map.robots());
  for (std::size_t i = 0; i < mu.size(); ++i) mu[i] = R * stacked.segment<3>(3 * static_cast<Eigen::Index>(i));
  return mu;
}

std::pair<Vec3, Vec3> qp_fd(const Vec3& p_ai, const Vec3& p_aj, const Mat3& R0, const DesiredWrench& wrench,
                            QpFamily* family) {
  Eigen::Matrix<double, 3, 6> G;
  G.leftCols<3>() = hat(p_ai) * R0.transpose();
  G.rightCols<3>() = hat(p_aj) * R0.transpose();
  qp::Problem<double> p;
  p.P = 2.0 * (MatX::Identity(6, 6) + G.transpose() * G);
  p.q = -2.0 * G.transpose() * wrench.moment;
  p.A = MatX::Zero(3, 6);
  p.A.leftCols(3).setIdentity();
  p.A.rightCols(3).setIdentity();
  p.l = wrench.force;
  p.u = wrench.force;
  std::unique_ptr<QpFamily> local;
  const auto& sol = solve_in(family, local, p);
  if (!usable(sol)) throw Error(ErrorCode::SolverFailure, "force split QP failed: " + std::string(qp::to_string(sol.status)));
  return {sol.x.head<3>(), sol.x.tail<3>()};
}

Vec3 qp_svm_pointmass(const Vec3& p_i, const Vec3& p_j, const Vec3& F_d, double lambda_s, QpFamily* family) {
  qp::Problem<double> p;
  p.P = 2.0 * (Mat3::Identity() + lambda_s * F_d * F_d.transpose());
  p.q = VecX::Zero(3);
  p.A = MatX(2, 3);
  p.A.row(0) = p_i.transpose();
  p.A.row(1) = p_j.transpose();
  p.l = Eigen::Vector2d(-kInf, 1.0);
  p.u = Eigen::Vector2d(-1.0, kInf);
  std::unique_ptr<QpFamily> local;
  const auto& sol = solve_in(family, local, p);
  if (sol.status == qp::Status::PrimalInfeasible) throw Error(ErrorCode::InfeasiblePair, "robots are not separable");
  if (!usable(sol)) throw Error(ErrorCode::SolverFailure, "separating plane QP failed: " + std::string(qp::to_string(sol.status)));
  return sol.x;
}

SvmPlane qp_svm_rigid(const Vec3& p_i, const Vec3& p_j, const Vec3& p_ai, const Vec3& p_aj, const Vec3& F_di,
                      const Vec3& F_dj, double lambda_s, QpFamily* family) {
  // x = (n, a, s_i, s_j)
  qp::Problem<double> p;
  p.P = MatX::Zero(6, 6);
  p.P.topLeftCorner<3, 3>() = 2.0 * Mat3::Identity();
  p.q = VecX::Zero(6);
  p.q[4] = lambda_s;
  p.q[5] = lambda_s;
  p.A = MatX::Zero(8, 6);
  p.l = VecX::Constant(8, -kInf);
  p.u = VecX::Constant(8, kInf);
  auto row = [&](int r, const Vec3& x, int slack, double slack_sign) {
    p.A.block<1, 3>(r, 0) = x.transpose();
    p.A(r, 3) = -1.0;
    if (slack >= 0) p.A(r, slack) = slack_sign;
  };
  row(0, p_i, -1, 0.0);
  p.u[0] = -1.0;
  row(1, p_ai, -1, 0.0);
  p.u[1] = -1.0;
  row(2, p_j, -1, 0.0);
  p.l[2] = 1.0;
  row(3, p_aj, -1, 0.0);
  p.l[3] = 1.0;
  row(4, p_ai + F_di, 4, -1.0);
  p.u[4] = -1.0;
  row(5, p_aj + F_dj, 5, 1.0);
  p.l[5] = 1.0;
  p.A(6, 4) = 1.0;
  p.l[6] = 0.0;
  p.A(7, 5) = 1.0;
  p.l[7] = 0.0;
  std::unique_ptr<QpFamily> local;
  const auto& sol = solve_in(family, local, p);
  if (sol.status == qp::Status::PrimalInfeasible) throw Error(ErrorCode::InfeasiblePair, "robots or attachments are not separable");
  if (!usable(sol)) throw Error(ErrorCode::SolverFailure, "separating plane QP failed: " + std::string(qp::to_string(sol.status)));
  return SvmPlane{sol.x.head<3>(), sol.x[3], sol.x[4], sol.x[5]};
}

double tilt_angle(double r, double l) {
  if (!(r > 0.0) || !(l > 0.0) || !(r < 2.0 * l)) throw Error(ErrorCode::BadGeometry, "tilt needs 0 < r < 2l");
  return 2.0 * std::asin(r / (2.0 * l));
}

TiltedPair tilt_hyperplanes_pointmass(const Vec3& n_ij, double r_i, double r_j, double l_i, double l_j,
                                      const Vec3& up) {
  if (!(n_ij.norm() > 0.0)) throw Error(ErrorCode::BadGeometry, "separating normal is zero");
  const Vec3 n = n_ij.normalized();
  TiltedPair out;
  out.axis = tilt_axis(n, up, out.degenerate_axis);
  const double ai = tilt_angle(r_i, l_i);
  const double aj = tilt_angle(r_j, l_j);
  out.hi = Halfspace{Eigen::AngleAxisd(ai, out.axis) * n, 0.0};
  out.hj = Halfspace{-(Eigen::AngleAxisd(-aj, out.axis) * n), 0.0};
  return out;
}

TiltedPair tilt_hyperplanes_rigid(const Vec3& n_ij, double a, const Vec3& p_ai, const Vec3& p_aj, double r_i,
                                  double r_j, double l_i, double l_j, const Vec3& up) {
  const double norm = n_ij.norm();
  if (!(norm > 0.0)) throw Error(ErrorCode::BadGeometry, "separating normal is zero");
  const Vec3 n = n_ij / norm;
  const double offset = a / norm;
  TiltedPair out;
  out.axis = tilt_axis(n, up, out.degenerate_axis);
  Vec3 up_in_plane = up - up.dot(n) * n;
  up_in_plane = up_in_plane.norm() > 1e-9 ? up_in_plane.normalized() : Vec3(out.axis.cross(n));

  // side = +1 for robot i (negative side of the plane), -1 for robot j.
  auto side = [&](const Vec3& p_a, double r, double l, double sign, Vec3& top) -> Halfspace {
    const double d = n.dot(p_a) - offset;
    if (std::abs(d) > l) {
      out.no_intersection = true;
      top = p_a;
      const Vec3 m = sign * n;
      return Halfspace{m, m.dot(p_a)};
    }
    const double radius = std::sqrt(std::max(0.0, l * l - d * d));
    top = p_a - d * n + radius * up_in_plane;
    Vec3 mid = out.axis.cross(top - p_a);
    mid = mid.norm() > 1e-12 ? mid.normalized() : Vec3(sign * n);
    if (sign * mid.dot(n) < 0.0) mid = -mid;
    const Vec3 tilted = Eigen::AngleAxisd(sign * tilt_angle(r, l), out.axis) * mid;
    return Halfspace{tilted, tilted.dot(p_a)};
  };
  out.hi = side(p_ai, r_i, l_i, 1.0, out.top_i);
  out.hj = side(p_aj, r_j, l_j, -1.0, out.top_j);
  return out;
}

std::vector<Vec3> rescale_preset(std::span<const Vec3> directions, const Vec3& F_d) {
  Vec3 sum = Vec3::Zero();
  for (const auto& d : directions) sum += d;
  if (!(sum.z() > 1e-9)) throw Error(ErrorCode::InvalidConfig, "preset directions must point upwards");
  const double scale = F_d.z() / sum.z();
  Vec3 residual = F_d - scale * sum;
  residual.z() = 0.0;
  const double n = static_cast<double>(directions.size());
  std::vector<Vec3> out;
  out.reserve(directions.size());
  for (const auto& d : directions) out.push_back(scale * d + residual / n);
  return out;
}

QpAllocation allocate_qp(const DesiredWrench& wrench, const Mat3& R0, const AllocationMap& map,
                         std::span<const RobotHalfspace> halfspaces, const FormationPreference* preference,
                         QpFamily* family) {
  const auto n = static_cast<Eigen::Index>(map.robots());
  const Eigen::Index rows = map.rows();
  const auto m = rows + static_cast<Eigen::Index>(halfspaces.size());
  const Mat3 R = payload_rotation(map, R0);
  const double lambda = preference ? preference->lambda : 0.0;

  qp::Problem<double> p;
  p.P = (1.0 + 2.0 * lambda) * MatX::Identity(3 * n, 3 * n);
  p.q = VecX::Zero(3 * n);
  if (preference && lambda > 0.0) {
    if (static_cast<Eigen::Index>(preference->mu0.size()) != n)
      throw Error(ErrorCode::ShapeMismatch, "preferred forces must match the robot count");
    for (Eigen::Index i = 0; i < n; ++i) p.q.segment<3>(3 * i) = -2.0 * lambda * preference->mu0[static_cast<std::size_t>(i)];
  }
  p.A = MatX::Zero(m, 3 * n);
  p.l = VecX(m);
  p.u = VecX(m);
  for (Eigen::Index i = 0; i < n; ++i) p.A.block(0, 3 * i, rows, 3) = map.P.block(0, 3 * i, rows, 3) * R.transpose();
  p.l.head(rows) = allocation_rhs(wrench, R0, map);
  p.u.head(rows) = p.l.head(rows);
  for (std::size_t k = 0; k < halfspaces.size(); ++k) {
    const auto r = rows + static_cast<Eigen::Index>(k);
    const auto& h = halfspaces[k];
    if (h.robot >= map.robots()) throw Error(ErrorCode::ShapeMismatch, "half-space refers to an unknown robot");
    p.A.block<1, 3>(r, 3 * static_cast<Eigen::Index>(h.robot)) = h.h.n.transpose();
    p.l[r] = -kInf;
    p.u[r] = h.h.a;
  }

  std::unique_ptr<QpFamily> local;
  const auto& sol = solve_in(family, local, p);
  if (sol.status == qp::Status::PrimalInfeasible) throw Error(ErrorCode::Infeasible, "half-spaces exclude every allocation");
  if (!usable(sol)) throw Error(ErrorCode::SolverFailure, "cable force QP failed: " + std::string(qp::to_string(sol.status)));

  QpAllocation out;
  out.mu.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out.mu[static_cast<std::size_t>(i)] = sol.x.segment<3>(3 * i);
  out.status = sol.status;
  out.iterations = sol.iterations;
  out.warm_started = sol.warm_started;
  out.objective = sol.objective;
  return out;
}

int AllocationDiagnostics::total_iterations() const {
  int total = mu_iterations;
  for (const auto& p : pairs) total += p.fd_iterations + p.svm_iterations;
  return total;
}

struct CableForceAllocator::Caches {
  std::vector<QpFamily> fd;
  std::vector<QpFamily> svm;
  std::unique_ptr<QpFamily> mu;
};

CableForceAllocator::CableForceAllocator(Rig rig, AllocatorConfig config)
    : rig_(std::move(rig)), config_(config), caches_(std::make_unique<Caches>()), hold_(config.infeasible_hold) {
  rig_.validate();
  const auto attachments = rig_.attachments();
  map_ = build_allocation_map(attachments, rig_.payload.kind);
  const std::size_t n = rig_.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs_.emplace_back(i, j);

  auto settings = config_.qp;
  settings.warm_start = config_.warm_start;
  const bool rigid = rig_.payload.rigid();
  for (std::size_t k = 0; k < pairs_.size(); ++k) {
    caches_->fd.emplace_back(6, 3, settings);
    caches_->svm.emplace_back(rigid ? 6 : 3, rigid ? 8 : 2, settings);
  }
  const auto vars = static_cast<Eigen::Index>(3 * n);
  caches_->mu = std::make_unique<QpFamily>(vars, map_.rows() + static_cast<Eigen::Index>(2 * pairs_.size()), settings);
  tilted_.resize(pairs_.size());
  halfspaces_.resize(2 * pairs_.size());
  diag_.pairs.resize(pairs_.size());
}

CableForceAllocator::~CableForceAllocator() = default;
CableForceAllocator::CableForceAllocator(CableForceAllocator&&) noexcept = default;
CableForceAllocator& CableForceAllocator::operator=(CableForceAllocator&&) noexcept = default;

void CableForceAllocator::set_preset(std::optional<std::vector<Vec3>> directions, std::string name) {
  if (directions && directions->size() != rig_.size())
    throw Error(ErrorCode::ShapeMismatch, "preset needs one direction per robot");
  preset_ = std::move(directions);
  preset_name_ = preset_ ? std::optional<std::string>(std::move(name)) : std::nullopt;
}

std::vector<CableForceAllocator::NamedProblem> CableForceAllocator::qp_problems() const {
  std::vector<NamedProblem> out;
  if (config_.mode == AllocationMode::Baseline || mu_.empty()) return out;
  for (std::size_t k = 0; k < pairs_.size(); ++k) {
    const std::string tag = "(" + std::to_string(pairs_[k].first) + "," + std::to_string(pairs_[k].second) + ")";
    if (rig_.payload.rigid()) out.push_back({"fd" + tag, caches_->fd[k].data()});
    out.push_back({"svm" + tag, caches_->svm[k].data()});
  }
  out.push_back({"mu", caches_->mu->data()});
  return out;
}

void CableForceAllocator::run_pair(std::size_t k, const FullSystemState& state, const DesiredWrench& wrench) {
  const auto [i, j] = pairs_[k];
  auto& d = diag_.pairs[k];
  d.i = i;
  d.j = j;
  const auto& ri = rig_.robots[i];
  const auto& rj = rig_.robots[j];
  const bool rigid = rig_.payload.rigid();
  const Mat3 R = rigid ? state.R0 : Mat3::Identity();
  const Vec3 p_i = R.transpose() * (quad_position(state, rig_, i) - state.p0);
  const Vec3 p_j = R.transpose() * (quad_position(state, rig_, j) - state.p0);

  TiltedPair tilt;
  if (rigid) {
    auto t0 = Clock::now();
    const auto [F_di, F_dj] = qp_fd(ri.attachment, rj.attachment, R, wrench, &caches_->fd[k]);
    d.fd_seconds = seconds_since(t0);
    d.fd_iterations = caches_->fd[k].last_solution().iterations;
    d.fd_warm = caches_->fd[k].last_solution().warm_started;

    t0 = Clock::now();
    const SvmPlane plane = qp_svm_rigid(p_i, p_j, ri.attachment, rj.attachment, R.transpose() * F_di,
                                        R.transpose() * F_dj, config_.lambda_s, &caches_->svm[k]);
    d.svm_seconds = seconds_since(t0);
    t0 = Clock::now();
    tilt = tilt_hyperplanes_rigid(plane.n, plane.a, ri.attachment, rj.attachment, ri.safety_radius, rj.safety_radius,
                                  ri.cable_length, rj.cable_length, R.transpose() * e3());
    d.tilt_seconds = seconds_since(t0);
    d.normal = plane.n;
  } else {
    auto t0 = Clock::now();
    const Vec3 n = qp_svm_pointmass(p_i, p_j, wrench.force, config_.lambda_s, &caches_->svm[k]);
    d.svm_seconds = seconds_since(t0);
    t0 = Clock::now();
    tilt = tilt_hyperplanes_pointmass(n, ri.safety_radius, rj.safety_radius, ri.cable_length, rj.cable_length);
    d.tilt_seconds = seconds_since(t0);
    d.normal = n;
  }
  d.svm_iterations = caches_->svm[k].last_solution().iterations;
  d.svm_warm = caches_->svm[k].last_solution().warm_started;
  d.degenerate_axis = tilt.degenerate_axis;
  d.no_intersection = tilt.no_intersection;

  // Every tilted plane passes through its attachment point, so in cable-force space
  // the half-space has zero offset.
  halfspaces_[2 * k] = RobotHalfspace{i, Halfspace{R * tilt.hi.n, 0.0}};
  halfspaces_[2 * k + 1] = RobotHalfspace{j, Halfspace{R * tilt.hj.n, 0.0}};
  tilted_[k] = tilt;
}

const std::vector<Vec3>& CableForceAllocator::allocate(const FullSystemState& state, const DesiredWrench& wrench) {
  const auto t_start = Clock::now();
  diag_.held = false;
  diag_.mu_iterations = 0;
  diag_.mu_warm = false;
  diag_.pairs_seconds = 0.0;
  diag_.mu_seconds = 0.0;
  diag_.active_halfspaces = 0;

  if (config_.mode == AllocationMode::Baseline) {
    mu_ = allocate_baseline(wrench, state.R0, map_);
    diag_.mu_status = "baseline";
    diag_.total_seconds = seconds_since(t_start);
    return mu_;
  }

  std::vector<std::exception_ptr> errors(pairs_.size());
  const auto npairs = static_cast<long>(pairs_.size());
  const auto t_pairs = Clock::now();
#pragma omp parallel for schedule(static) if (config_.parallel && npairs > 1)
  for (long k = 0; k < npairs; ++k) {
    try {
      run_pair(static_cast<std::size_t>(k), state, wrench);
    } catch (...) {
      errors[static_cast<std::size_t>(k)] = std::current_exception();
    }
  }
  diag_.pairs_seconds = seconds_since(t_pairs);
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const Error& e) {
      throw Error(e.code(), "pair (" + std::to_string(pairs_[k].first) + "," + std::to_string(pairs_[k].second) +
                                "): " + e.what());
    }
  }

  FormationPreference pref;
  if (preset_) {
    pref.source = PreferenceSource::UserPreset;
    pref.preset = preset_name_.value_or("");
    pref.mu0 = rescale_preset(*preset_, wrench.force);
    pref.lambda = config_.lambda_preset;
  } else if (!mu_.empty()) {
    pref.source = PreferenceSource::PreviousSolution;
    pref.mu0 = mu_;
    pref.lambda = config_.lambda_continuity;
  }

  const auto t_mu = Clock::now();
  try {
    QpAllocation result = allocate_qp(wrench, state.R0, map_, halfspaces_, &pref, caches_->mu.get());
    mu_ = std::move(result.mu);
    diag_.mu_iterations = result.iterations;
    diag_.mu_warm = result.warm_started;
    diag_.mu_status = std::string(qp::to_string(result.status));
    hold_.on_success();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Infeasible && e.code() != ErrorCode::SolverFailure) throw;
    diag_.mu_iterations = caches_->mu->last_solution().iterations;
    diag_.mu_status = std::string(qp::to_string(caches_->mu->last_solution().status));
    const bool may_hold = hold_.on_failure();
    if (mu_.empty() || !may_hold) {
      diag_.consecutive_infeasible = hold_.consecutive();
      throw Error(ErrorCode::AbortedRun, "cable force QP failed for " + std::to_string(hold_.consecutive()) +
                                             " consecutive periods: " + e.what());
    }
    diag_.held = true;
  }
  diag_.mu_seconds = seconds_since(t_mu);
  diag_.consecutive_infeasible = hold_.consecutive();
  for (const auto& h : halfspaces_) {
    if (std::abs(h.h.violation(mu_[h.robot])) <= 1e-6) ++diag_.active_halfspaces;
  }
  diag_.total_seconds = seconds_since(t_start);
  return mu_;
}

}  // namespace cablelift
