#include "cablelift/scenario_io.hpp"

#include "cablelift/error.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace cablelift {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::InvalidConfig, where + ": " + what);
}

// Rejects keys outside `allowed` so typos do not silently fall back to defaults.
void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
  if (!node.IsMap()) fail(where, "expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(where, "unknown key '" + key + "'");
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
  if (!node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception& e) {
    fail(where + "." + key, e.what());
  }
}

Vec3 vec3(const YAML::Node& node, const std::string& where) {
  if (!node.IsSequence() || node.size() != 3) fail(where, "expected a list of 3 numbers");
  try {
    return Vec3(node[0].as<double>(), node[1].as<double>(), node[2].as<double>());
  } catch (const YAML::Exception& e) {
    fail(where, e.what());
  }
}

void read_vec3(const YAML::Node& node, const char* key, Vec3& out, const std::string& where) {
  if (node[key]) out = vec3(node[key], where + "." + key);
}

PayloadParams parse_payload(const YAML::Node& node) {
  const std::string where = "payload";
  check_keys(node, where, {"kind", "mass", "inertia"});
  PayloadParams p;
  std::string kind = "point_mass";
  read(node, "kind", kind, where);
  if (kind == "point_mass") {
    p.kind = PayloadKind::PointMass;
  } else if (kind == "rigid_body") {
    p.kind = PayloadKind::RigidBody;
  } else {
    fail(where + ".kind", "expected point_mass or rigid_body");
  }
  read(node, "mass", p.mass, where);
  if (node["inertia"]) {
    const auto& in = node["inertia"];
    if (in.IsSequence() && in.size() == 3 && in[0].IsScalar()) {
      p.inertia = vec3(in, where + ".inertia").asDiagonal();
    } else if (in.IsSequence() && in.size() == 3) {
      for (int r = 0; r < 3; ++r) p.inertia.row(r) = vec3(in[r], where + ".inertia").transpose();
    } else {
      fail(where + ".inertia", "expected a diagonal [Ixx, Iyy, Izz] or a 3x3 matrix");
    }
  }
  return p;
}

QuadrotorParams parse_robot(const YAML::Node& node, std::size_t index) {
  const std::string where = "robots[" + std::to_string(index) + "]";
  check_keys(node, where,
             {"model", "cable_length", "safety_radius", "attachment", "thrust_to_weight", "mass", "inertia"});
  std::string model = "crazyflie";
  read(node, "model", model, where);
  if (model != "crazyflie") fail(where + ".model", "only 'crazyflie' is available");
  double l = 0.5, r = 0.1, ttw = 1.4;
  Vec3 attachment = Vec3::Zero();
  read(node, "cable_length", l, where);
  read(node, "safety_radius", r, where);
  read(node, "thrust_to_weight", ttw, where);
  read_vec3(node, "attachment", attachment, where);
  QuadrotorParams q = QuadrotorParams::crazyflie(l, r, attachment, ttw);
  read(node, "mass", q.mass, where);
  read_vec3(node, "inertia", q.inertia_diag, where);
  return q;
}

ControllerGains parse_gains(const YAML::Node& node) {
  const std::string where = "gains";
  check_keys(node, where, {"kp_pos", "kd_pos", "kp_rot", "kd_rot", "kq", "kw", "kR", "kOmega"});
  ControllerGains g;
  read(node, "kp_pos", g.kp_pos, where);
  read(node, "kd_pos", g.kd_pos, where);
  read(node, "kp_rot", g.kp_rot, where);
  read(node, "kd_rot", g.kd_rot, where);
  read(node, "kq", g.kq, where);
  read(node, "kw", g.kw, where);
  read(node, "kR", g.kR, where);
  read(node, "kOmega", g.kOmega, where);
  return g;
}

void parse_allocation(const YAML::Node& node, Scenario& sc) {
  const std::string where = "allocation";
  check_keys(node, where,
             {"mode", "lambda_s", "lambda", "lambda_preset", "every", "infeasible_hold", "warm_start", "parallel", "qp"});
  auto& a = sc.allocation;
  if (node["mode"]) a.mode = parse_mode(node["mode"].as<std::string>());
  read(node, "lambda_s", a.lambda_s, where);
  read(node, "lambda", a.lambda_continuity, where);
  read(node, "lambda_preset", a.lambda_preset, where);
  read(node, "every", sc.allocation_every, where);
  read(node, "infeasible_hold", a.infeasible_hold, where);
  read(node, "warm_start", a.warm_start, where);
  read(node, "parallel", a.parallel, where);
  if (const auto& q = node["qp"]) {
    const std::string w = where + ".qp";
    check_keys(q, w, {"eps_abs", "eps_rel", "max_iter", "rho", "sigma", "alpha", "polish", "adaptive_rho_interval"});
    read(q, "eps_abs", a.qp.eps_abs, w);
    read(q, "eps_rel", a.qp.eps_rel, w);
    read(q, "max_iter", a.qp.max_iter, w);
    read(q, "rho", a.qp.rho, w);
    read(q, "sigma", a.qp.sigma, w);
    read(q, "alpha", a.qp.alpha, w);
    read(q, "polish", a.qp.polish, w);
    read(q, "adaptive_rho_interval", a.qp.adaptive_rho_interval, w);
  }
}

TimedCommand parse_command(const YAML::Node& node, std::size_t index) {
  const std::string where = "trajectory.commands[" + std::to_string(index) + "]";
  check_keys(node, where, {"t", "velocity", "nudge", "preset", "pause", "reset"});
  TimedCommand c;
  read(node, "t", c.t, where);
  int kinds = 0;
  if (node["velocity"]) {
    c.command.kind = CommandKind::Velocity;
    c.command.value = vec3(node["velocity"], where + ".velocity");
    ++kinds;
  }
  if (node["nudge"]) {
    c.command.kind = CommandKind::Nudge;
    c.command.value = vec3(node["nudge"], where + ".nudge");
    ++kinds;
  }
  if (node["preset"]) {
    c.command.kind = CommandKind::Preset;
    const auto name = node["preset"].as<std::string>();
    if (name != "off") c.command.preset = name;
    ++kinds;
  }
  if (node["pause"]) {
    c.command.kind = CommandKind::Pause;
    ++kinds;
  }
  if (node["reset"]) {
    c.command.kind = CommandKind::Reset;
    ++kinds;
  }
  if (kinds != 1) fail(where, "exactly one of velocity, nudge, preset, pause, reset expected");
  return c;
}

TrajectorySpec parse_trajectory(const YAML::Node& node) {
  const std::string where = "trajectory";
  check_keys(node, where, {"kind", "period", "scale", "peak_speed", "center", "yaw_rate", "limits", "commands"});
  TrajectorySpec t;
  std::string kind = "hover";
  read(node, "kind", kind, where);
  if (kind == "figure8") {
    t.kind = TrajectoryKind::Figure8;
  } else if (kind == "hover") {
    t.kind = TrajectoryKind::Hover;
  } else if (kind == "teleop") {
    t.kind = TrajectoryKind::TeleopLog;
  } else {
    fail(where + ".kind", "expected figure8, hover or teleop");
  }
  read(node, "period", t.period, where);
  read(node, "scale", t.scale, where);
  if (node["peak_speed"]) t.peak_speed = node["peak_speed"].as<double>();
  read_vec3(node, "center", t.center, where);
  read(node, "yaw_rate", t.yaw_rate, where);
  if (const auto& lim = node["limits"]) {
    const std::string w = where + ".limits";
    check_keys(lim, w, {"max_speed", "max_accel", "max_jerk", "response"});
    read(lim, "max_speed", t.limits.max_speed, w);
    read(lim, "max_accel", t.limits.max_accel, w);
    read(lim, "max_jerk", t.limits.max_jerk, w);
    read(lim, "response", t.limits.response, w);
  }
  if (const auto& cmds = node["commands"]) {
    if (!cmds.IsSequence()) fail(where + ".commands", "expected a list");
    for (std::size_t k = 0; k < cmds.size(); ++k) t.commands.push_back(parse_command(cmds[k], k));
  }
  return t;
}

}  // namespace

std::string to_string(AllocationMode mode) { return mode == AllocationMode::Baseline ? "baseline" : "qp"; }

AllocationMode parse_mode(const std::string& text) {
  if (text == "baseline") return AllocationMode::Baseline;
  if (text == "qp") return AllocationMode::QpCascade;
  throw Error(ErrorCode::InvalidConfig, "mode must be 'baseline' or 'qp', got '" + text + "'");
}

Scenario parse_scenario(const std::string& yaml) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::Exception& e) {
    fail("scenario", e.what());
  }
  check_keys(root, "scenario",
             {"schema_version", "name", "duration", "seed", "metrics_start", "initial_offset", "control_every", "sim",
              "allocation", "gains", "payload", "robots", "trajectory", "obstacles", "presets"});
  if (!root["schema_version"]) fail("scenario", "missing schema_version");

  Scenario sc;
  try {
    read(root, "schema_version", sc.schema_version, "scenario");
    if (sc.schema_version != kScenarioSchemaVersion)
      fail("scenario.schema_version", "unsupported version " + std::to_string(sc.schema_version));
    read(root, "name", sc.name, "scenario");
    read(root, "duration", sc.duration, "scenario");
    read(root, "seed", sc.seed, "scenario");
    read(root, "metrics_start", sc.metrics_start, "scenario");
    read(root, "initial_offset", sc.initial_offset, "scenario");
    read(root, "control_every", sc.control_every, "scenario");
    if (const auto& sim = root["sim"]) {
      check_keys(sim, "sim", {"dt", "gravity", "disturbance_force"});
      read(sim, "dt", sc.sim.dt, "sim");
      read(sim, "gravity", sc.sim.gravity, "sim");
      read(sim, "disturbance_force", sc.sim.disturbance_force, "sim");
    }
    if (root["allocation"]) parse_allocation(root["allocation"], sc);
    if (root["gains"]) sc.gains = parse_gains(root["gains"]);
    if (!root["payload"]) fail("scenario", "missing payload");
    sc.rig.payload = parse_payload(root["payload"]);
    const auto& robots = root["robots"];
    if (!robots || !robots.IsSequence() || robots.size() == 0) fail("scenario", "robots must be a non-empty list");
    for (std::size_t i = 0; i < robots.size(); ++i) sc.rig.robots.push_back(parse_robot(robots[i], i));
    if (root["trajectory"]) sc.trajectory = parse_trajectory(root["trajectory"]);
    if (const auto& obs = root["obstacles"]) {
      for (std::size_t k = 0; k < obs.size(); ++k) {
        const std::string w = "obstacles[" + std::to_string(k) + "]";
        check_keys(obs[k], w, {"name", "center", "size"});
        Obstacle o;
        read(obs[k], "name", o.name, w);
        read_vec3(obs[k], "center", o.center, w);
        read_vec3(obs[k], "size", o.size, w);
        sc.obstacles.push_back(o);
      }
    }
    if (const auto& presets = root["presets"]) {
      if (!presets.IsMap()) fail("presets", "expected a mapping of name to directions");
      for (const auto& kv : presets) {
        const auto name = kv.first.as<std::string>();
        std::vector<Vec3> dirs;
        for (std::size_t i = 0; i < kv.second.size(); ++i) dirs.push_back(vec3(kv.second[i], "presets." + name));
        sc.presets[name] = dirs;
      }
    }
  } catch (const YAML::Exception& e) {
    fail("scenario", e.what());
  }
  sc.validate();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open scenario " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace cablelift
