#include "cablelift/closed_loop.hpp"

#include "cablelift/error.hpp"

#include <numbers>
#include <random>

namespace cablelift {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

}  // namespace

double min_clearance(const FullSystemState& s, const Rig& rig, double* min_distance) {
  const std::size_t n = rig.size();
  std::vector<Vec3> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = quad_position(s, rig, i);
  double best = std::numeric_limits<double>::infinity();
  double dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = (p[i] - p[j]).norm();
      dist = std::min(dist, d);
      best = std::min(best, d / (rig.robots[i].safety_radius + rig.robots[j].safety_radius));
    }
  }
  if (min_distance) *min_distance = dist;
  return best;
}

Vec3 rpy(const Mat3& R) {
  return Vec3(std::atan2(R(2, 1), R(2, 2)), -std::asin(std::clamp(R(2, 0), -1.0, 1.0)), std::atan2(R(1, 0), R(0, 0)));
}

void Accumulator::add(double x) {
  ++n_;
  const double d = x - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (x - mean_);
}

Stat Accumulator::stat() const {
  Stat s;
  s.mean = mean_;
  s.std = n_ > 1 ? std::sqrt(m2_ / static_cast<double>(n_ - 1)) : 0.0;
  return s;
}

void MetricsAccumulator::add(const TickRecord& rec) {
  m_.simulated_seconds = rec.t;
  if (rec.min_distance < m_.min_distance) {
    m_.min_distance = rec.min_distance;
    m_.min_distance_time = rec.t;
  }
  m_.min_clearance = std::min(m_.min_clearance, rec.min_clearance);
  m_.saturation_count += rec.saturated;
  if (rec.held) ++m_.infeasibility_count;
  if (rec.allocated) {
    ++m_.allocations;
    fd_.add(rec.fd_ms);
    svm_.add(rec.svm_ms);
    tilt_.add(rec.tilt_ms);
    mu_.add(rec.mu_ms);
    total_.add(rec.total_ms);
  }
  if (rec.t < window_start_) return;
  ++m_.samples;
  for (int k = 0; k < 3; ++k) {
    pos_[k].add(100.0 * std::abs(rec.position_error[k]));
    ori_[k].add(kRadToDeg * std::abs(rec.orientation_error[k]));
  }
}

void MetricsAccumulator::abort(const std::string& reason, double t) {
  m_.aborted = true;
  m_.abort_reason = reason;
  m_.simulated_seconds = t;
}

RunMetrics MetricsAccumulator::finish() const {
  RunMetrics out = m_;
  for (int k = 0; k < 3; ++k) {
    out.position_mean_cm[k] = pos_[k].stat().mean;
    out.position_std_cm[k] = pos_[k].stat().std;
    out.orientation_mean_deg[k] = ori_[k].stat().mean;
    out.orientation_std_deg[k] = ori_[k].stat().std;
  }
  out.fd_ms = fd_.stat();
  out.svm_ms = svm_.stat();
  out.tilt_ms = tilt_.stat();
  out.mu_ms = mu_.stat();
  out.total_ms = total_.stat();
  return out;
}

ReferenceSetpoint scripted_reference(const TrajectorySpec& spec, double t) {
  ReferenceSetpoint ref;
  switch (spec.kind) {
    case TrajectoryKind::Figure8:
      ref = figure8(t, spec.period, spec.resolved_scale(), spec.center);
      break;
    case TrajectoryKind::Hover:
      ref = hover_reference(spec.center);
      break;
    case TrajectoryKind::TeleopLog:
      throw Error(ErrorCode::InvalidConfig, "teleop trajectories are driven by commands");
  }
  apply_yaw_ramp(ref, t, spec.yaw_rate);
  return ref;
}

ClosedLoop::ClosedLoop(const Scenario& scenario, AllocationMode mode)
    : scenario_(scenario),
      mode_(mode),
      controller_(scenario.rig, scenario.gains, scenario.sim.gravity),
      allocator_(scenario.rig, scenario.allocation) {
  scenario_.validate();
  scenario_.allocation.mode = mode;
  allocator_.config().mode = mode;
  presets_ = scenario_.preset_directions();

  initial_ref_ = scenario_.trajectory.kind == TrajectoryKind::TeleopLog
                     ? hover_reference(scenario_.trajectory.center)
                     : scripted_reference(scenario_.trajectory, 0.0);
  initial_ = equilibrium_state(scenario_, initial_ref_);
  if (scenario_.initial_offset > 0.0) {
    std::mt19937_64 rng(scenario_.seed);
    std::normal_distribution<double> noise(0.0, scenario_.initial_offset);
    for (int k = 0; k < 3; ++k) initial_.p0[k] += noise(rng);
  }
  state_ = initial_;
  gust_rng_.seed(scenario_.seed ^ kGustStream);
}

void ClosedLoop::reset() {
  state_ = initial_;
  gust_rng_.seed(scenario_.seed ^ kGustStream);
  controller_ = PayloadController(scenario_.rig, scenario_.gains, scenario_.sim.gravity);
  allocator_ = CableForceAllocator(scenario_.rig, scenario_.allocation);
  mu_.clear();
  tick_ = 0;
  record_ = TickRecord{};
}

void ClosedLoop::set_preset(const std::optional<std::string>& name) {
  if (!name) {
    allocator_.set_preset(std::nullopt);
    return;
  }
  const auto it = presets_.find(*name);
  if (it == presets_.end()) throw Error(ErrorCode::PresetUnavailable, "unknown preset '" + *name + "'");
  std::vector<Vec3> current(rig().size());
  for (std::size_t i = 0; i < current.size(); ++i) current[i] = -state_.robots[i].q;
  allocator_.set_preset(assign_preset(it->second, current), *name);
}

const TickRecord& ClosedLoop::advance(const ReferenceSetpoint& ref) {
  const Rig& rig = scenario_.rig;
  const std::size_t n = rig.size();
  TickRecord rec;
  rec.tick = tick_;
  rec.t = time();
  rec.ref = ref;

  std::vector<ControlOutput> outputs;
  try {
    const DesiredWrench wrench = controller_.wrench(state_, ref);
    if (mu_.empty() || tick_ % scenario_.allocation_every == 0) {
      mu_ = allocator_.allocate(state_, wrench);
      rec.allocated = true;
      const auto& d = allocator_.diagnostics();
      rec.held = d.held;
      rec.qp_iterations = d.total_iterations();
      rec.active_halfspaces = d.active_halfspaces;
      for (const auto& p : d.pairs) {
        rec.fd_ms += 1e3 * p.fd_seconds;
        rec.svm_ms += 1e3 * p.svm_seconds;
        rec.tilt_ms += 1e3 * p.tilt_seconds;
      }
      rec.mu_ms = 1e3 * d.mu_seconds;
      rec.total_ms = 1e3 * d.total_seconds;
    }
    outputs = controller_.track(state_, ref, mu_);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::AbortedRun) throw;
    throw Error(ErrorCode::AbortedRun, e.what());
  }

  inputs_.resize(n);
  rec.p0 = state_.p0;
  rec.v0 = state_.v0;
  rec.rpy0 = rpy(state_.R0);
  rec.position_error = state_.p0 - ref.p0r;
  rec.orientation_error = rpy(ref.R0r.transpose() * state_.R0);
  rec.mu = mu_;
  rec.preset = allocator_.preset_name().value_or("");
  for (std::size_t i = 0; i < n; ++i) {
    inputs_[i] = outputs[i].input();
    if (scenario_.sim.disturbance_force > 0.0) {
      std::normal_distribution<double> gust(0.0, scenario_.sim.disturbance_force);
      for (int k = 0; k < 3; ++k) inputs_[i].external_force[k] = gust(gust_rng_);
    }
    rec.robots.push_back(quad_position(state_, rig, i));
    rec.q.push_back(state_.robots[i].q);
    rec.thrust.push_back(outputs[i].thrust);
    if (outputs[i].saturated) ++rec.saturated;
  }

  double dist = 0.0;
  rec.min_clearance = min_clearance(state_, rig, &dist);
  rec.min_distance = dist;
  for (int k = 0; k < scenario_.control_every; ++k) {
    try {
      state_ = step(state_, inputs_, rig, scenario_.sim);
    } catch (const Error& e) {
      record_ = rec;
      throw Error(ErrorCode::AbortedRun, e.what());
    }
    const double c = min_clearance(state_, rig, &dist);
    if (c < rec.min_clearance) {
      rec.min_clearance = c;
      rec.min_distance = dist;
    }
  }
  ++tick_;
  record_ = std::move(rec);
  if (record_.min_clearance < kHardFloor) {
    throw Error(ErrorCode::AbortedRun, "robots closer than " + std::to_string(kHardFloor) +
                                           " (r_i + r_j): distance " + std::to_string(record_.min_distance) + " m");
  }
  return record_;
}

}  // namespace cablelift
