#include "cablelift/error.hpp"
#include "cablelift/teleop.hpp"

#include <cmath>
#include <thread>

namespace cablelift::teleop {

namespace {

Json obstacles_json(const Scenario& sc) {
  Json out = Json::array();
  for (const auto& o : sc.obstacles)
    out.push_back(Json{{"name", o.name}, {"center", to_json(o.center)}, {"size", to_json(o.size)}});
  return out;
}

const Scenario& require_operator_reference(const Scenario& sc) {
  if (sc.trajectory.kind == TrajectoryKind::Figure8)
    throw Error(ErrorCode::InvalidConfig, "serve needs a hover or teleop scenario, not a figure-8");
  return sc;
}

}  // namespace

Session::Session(const Scenario& scenario, Options options)
    : scenario_(require_operator_reference(scenario)),
      options_(options),
      loop_(scenario_, scenario_.allocation.mode),
      vr_(loop_.initial_reference().p0r, scenario_.trajectory.limits),
      ref_(vr_.current()),
      inbound_(options.queue_capacity),
      outbound_(options.queue_capacity) {
  if (!(options_.frame_rate > 0.0) || !(options_.speed > 0.0))
    throw Error(ErrorCode::InvalidConfig, "frame rate and speed must be positive");
  if (options_.frame_rate > 1.0 / scenario_.control_dt())
    throw Error(ErrorCode::InvalidConfig, "frame rate exceeds the control rate");
}

Json Session::hello() const {
  Json presets = Json::array();
  for (const auto& [name, _] : loop_.presets()) presets.push_back(name);
  Json lengths = Json::array(), radii = Json::array();
  for (const auto& r : scenario_.rig.robots) {
    lengths.push_back(r.cable_length);
    radii.push_back(r.safety_radius);
  }
  return Json{{"v", kProtocolVersion},
              {"type", "hello"},
              {"scenario", scenario_.name},
              {"payload", scenario_.rig.payload.rigid() ? "rigid_body" : "point_mass"},
              {"robots", scenario_.rig.size()},
              {"cable_length", lengths},
              {"safety_radius", radii},
              {"presets", presets},
              {"frame_rate", options_.frame_rate},
              {"control_rate", 1.0 / scenario_.control_dt()},
              {"max_speed", scenario_.trajectory.limits.max_speed},
              {"obstacles", obstacles_json(scenario_)}};
}

bool Session::push(const Command& c) {
  if (inbound_.push(Inbound{c, tick(), false})) return true;
  ++dropped_commands_;
  return false;
}

void Session::disconnected() {
  Inbound hold;
  hold.received_tick = tick();
  hold.hold = true;
  // The hold must not be lost: it is the safety default.
  while (!inbound_.push(hold)) std::this_thread::yield();
}

bool Session::pop_frame(std::string& out) { return outbound_.pop(out); }

void Session::publish(const Json& frame) {
  if (!outbound_.push(frame.dump())) ++dropped_frames_;
}

void Session::apply(const Inbound& in) {
  if (in.hold) {
    vr_.hold();
    return;
  }
  const Command& c = in.command;
  const auto seq = c.seq;
  try {
    switch (c.command.kind) {
      case CommandKind::Velocity:
        vr_.command_velocity(c.command.value);
        break;
      case CommandKind::Nudge:
        vr_.nudge(c.command.value);
        break;
      case CommandKind::Preset:
        loop_.set_preset(c.command.preset);
        break;
      case CommandKind::Pause:
        paused_ = c.paused;
        break;
      case CommandKind::Reset:
        loop_.reset();
        vr_.reset(loop_.initial_reference().p0r);
        ref_ = vr_.current();
        paused_ = false;
        error_.clear();
        tick_.store(0, std::memory_order_release);
        break;
    }
  } catch (const Error& e) {
    const std::string code = e.code() == ErrorCode::PresetUnavailable ? "unknown_preset" : "rejected";
    publish(error_frame(code, e.what(), seq));
    return;
  }
  ack_ = Ack{seq.value_or(-1), in.received_tick, tick()};
}

bool Session::step() {
  Inbound in;
  while (inbound_.pop(in)) apply(in);

  const bool running = !paused_ && error_.empty();
  if (running) {
    ref_ = vr_.advance(scenario_.control_dt());
    apply_yaw_ramp(ref_, loop_.time(), scenario_.trajectory.yaw_rate);
    try {
      loop_.advance(ref_);
    } catch (const Error& e) {
      error_ = e.what();
      publish(error_frame("aborted", error_ + "; send reset to restart"));
    }
    tick_.store(loop_.tick(), std::memory_order_release);
  }
  // Frames are due by owner iterations, so a paused session keeps streaming.
  const double per_frame = 1.0 / (options_.frame_rate * scenario_.control_dt());
  ++iterations_;
  if (static_cast<double>(iterations_) < next_frame_at_) return false;
  next_frame_at_ += per_frame;
  publish(state_frame());
  return true;
}

void Session::run(std::stop_token stop) {
  using Clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<Clock::duration>(
      std::chrono::duration<double>(scenario_.control_dt() / options_.speed));
  auto next = Clock::now();
  while (!stop.stop_requested()) {
    step();
    next += period;
    const auto now = Clock::now();
    // Never try to catch up a backlog; the simulation just runs slower than real time.
    if (next < now) next = now;
    std::this_thread::sleep_until(next);
  }
}

Json Session::state_frame() const {
  const FullSystemState& s = loop_.state();
  const Rig& rig = scenario_.rig;
  const auto& mu = loop_.last().mu;
  Json robots = Json::array();
  for (std::size_t i = 0; i < rig.size(); ++i) {
    robots.push_back(Json{{"p", to_json(quad_position(s, rig, i))},
                          {"q", to_json(s.robots[i].q)},
                          {"mu", to_json(i < mu.size() ? mu[i] : Vec3::Zero())}});
  }
  Json halfspaces = Json::array();
  for (const auto& h : loop_.allocator().halfspaces())
    halfspaces.push_back(Json{{"robot", h.robot}, {"n", to_json(h.h.n)}, {"a", h.h.a}});
  const Eigen::Quaterniond quat(s.R0);
  double dist = 0.0;
  const double clearance = min_clearance(s, rig, &dist);
  const auto& preset = loop_.allocator().preset_name();
  Json f{{"v", kProtocolVersion},
         {"type", "state"},
         {"tick", loop_.tick()},
         {"t", loop_.time()},
         {"paused", paused_ || !error_.empty()},
         {"payload", {{"p", to_json(s.p0)}, {"v", to_json(s.v0)}, {"quat", {quat.w(), quat.x(), quat.y(), quat.z()}}}},
         {"ref", {{"p", to_json(ref_.p0r)}, {"v", to_json(ref_.dp0r)}, {"a", to_json(ref_.ddp0r)}}},
         {"robots", robots},
         {"halfspaces", halfspaces},
         {"min_distance", dist},
         {"min_clearance", clearance},
         {"preset", preset ? Json(*preset) : Json(nullptr)},
         {"obstacles", obstacles_json(scenario_)},
         {"ack", {{"seq", ack_.seq}, {"received_tick", ack_.received_tick}, {"applied_tick", ack_.applied_tick}}}};
  if (!error_.empty()) f["error"] = error_;
  return f;
}

}  // namespace cablelift::teleop
