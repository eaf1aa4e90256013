#include "cablelift/teleop.hpp"

#include <cmath>
#include <set>

namespace cablelift::teleop {

namespace {

bool is_vec3(const Json& j) {
  if (!j.is_array() || j.size() != 3) return false;
  for (const auto& x : j)
    if (!x.is_number() || !std::isfinite(x.get<double>())) return false;
  return true;
}

Vec3 vec3(const Json& j) { return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>()); }

// Small structural checker; violations are reported as "path: reason".
class Check {
 public:
  const std::string& error() const { return error_; }
  bool ok() const { return error_.empty(); }

  bool fail(const std::string& path, const std::string& why) {
    if (error_.empty()) error_ = path + ": " + why;
    return false;
  }

  bool only(const Json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [k, _] : obj.items())
      if (!keys.count(k)) return fail(path + "." + k, "unexpected key");
    return true;
  }

  const Json* field(const Json& obj, const std::string& path, const char* key, bool required = true) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) fail(path + "." + key, "missing");
      return nullptr;
    }
    return &*it;
  }

  bool number(const Json& obj, const std::string& path, const char* key, bool required = true) {
    const Json* v = field(obj, path, key, required);
    if (!v) return !required;
    if (!v->is_number() || !std::isfinite(v->get<double>())) return fail(path + "." + key, "expected a finite number");
    return true;
  }

  bool integer(const Json& obj, const std::string& path, const char* key, bool required = true, long min = 0) {
    const Json* v = field(obj, path, key, required);
    if (!v) return !required;
    if (!v->is_number_integer() || v->get<long long>() < min)
      return fail(path + "." + key, "expected an integer >= " + std::to_string(min));
    return true;
  }

  bool boolean(const Json& obj, const std::string& path, const char* key, bool required = true) {
    const Json* v = field(obj, path, key, required);
    if (!v) return !required;
    if (!v->is_boolean()) return fail(path + "." + key, "expected a boolean");
    return true;
  }

  bool string(const Json& obj, const std::string& path, const char* key, bool required = true, bool nullable = false) {
    const Json* v = field(obj, path, key, required);
    if (!v) return !required;
    if (!(v->is_string() || (nullable && v->is_null()))) return fail(path + "." + key, "expected a string");
    return true;
  }

  bool vector(const Json& obj, const std::string& path, const char* key, bool required = true) {
    const Json* v = field(obj, path, key, required);
    if (!v) return !required;
    if (!is_vec3(*v)) return fail(path + "." + key, "expected three finite numbers");
    return true;
  }

  bool array(const Json& obj, const std::string& path, const char* key) {
    const Json* v = field(obj, path, key);
    if (!v) return false;
    if (!v->is_array()) return fail(path + "." + key, "expected a list");
    return true;
  }

  bool object(const Json& obj, const std::string& path, const char* key) {
    const Json* v = field(obj, path, key);
    if (!v) return false;
    if (!v->is_object()) return fail(path + "." + key, "expected an object");
    return true;
  }

 private:
  std::string error_;
};

void check_obstacles(Check& c, const Json& frame) {
  if (!c.array(frame, "$", "obstacles")) return;
  for (std::size_t k = 0; k < frame["obstacles"].size(); ++k) {
    const Json& o = frame["obstacles"][k];
    const std::string p = "$.obstacles[" + std::to_string(k) + "]";
    if (!o.is_object()) {
      c.fail(p, "expected an object");
      return;
    }
    c.only(o, p, {"name", "center", "size"});
    c.string(o, p, "name");
    c.vector(o, p, "center");
    c.vector(o, p, "size");
  }
}

void check_hello(Check& c, const Json& f) {
  c.only(f, "$", {"v", "type", "scenario", "payload", "robots", "cable_length", "safety_radius", "presets",
                  "frame_rate", "control_rate", "max_speed", "obstacles"});
  c.string(f, "$", "scenario");
  c.string(f, "$", "payload");
  c.integer(f, "$", "robots", true, 1);
  c.number(f, "$", "frame_rate");
  c.number(f, "$", "control_rate");
  c.number(f, "$", "max_speed");
  for (const char* key : {"cable_length", "safety_radius"}) {
    if (!c.array(f, "$", key)) continue;
    for (const auto& x : f[key])
      if (!x.is_number()) c.fail(std::string("$.") + key, "expected numbers");
    if (f.contains("robots") && f["robots"].is_number_integer() && f[key].size() != f["robots"].get<std::size_t>())
      c.fail(std::string("$.") + key, "one entry per robot expected");
  }
  if (c.array(f, "$", "presets"))
    for (const auto& x : f["presets"])
      if (!x.is_string()) c.fail("$.presets", "expected strings");
  check_obstacles(c, f);
}

void check_state(Check& c, const Json& f) {
  c.only(f, "$", {"v", "type", "tick", "t", "paused", "payload", "ref", "robots", "halfspaces", "min_distance",
                  "min_clearance", "preset", "obstacles", "ack", "error"});
  c.integer(f, "$", "tick");
  c.number(f, "$", "t");
  c.boolean(f, "$", "paused");
  c.number(f, "$", "min_distance");
  c.number(f, "$", "min_clearance");
  c.string(f, "$", "preset", true, true);
  c.string(f, "$", "error", false);
  if (c.object(f, "$", "payload")) {
    const Json& p = f["payload"];
    c.only(p, "$.payload", {"p", "v", "quat"});
    c.vector(p, "$.payload", "p");
    c.vector(p, "$.payload", "v");
    if (!p.contains("quat") || !p["quat"].is_array() || p["quat"].size() != 4)
      c.fail("$.payload.quat", "expected [w, x, y, z]");
  }
  if (c.object(f, "$", "ref")) {
    c.only(f["ref"], "$.ref", {"p", "v", "a"});
    c.vector(f["ref"], "$.ref", "p");
    c.vector(f["ref"], "$.ref", "v");
    c.vector(f["ref"], "$.ref", "a");
  }
  if (c.array(f, "$", "robots")) {
    for (std::size_t k = 0; k < f["robots"].size(); ++k) {
      const Json& r = f["robots"][k];
      const std::string p = "$.robots[" + std::to_string(k) + "]";
      if (!r.is_object()) {
        c.fail(p, "expected an object");
        break;
      }
      c.only(r, p, {"p", "q", "mu"});
      c.vector(r, p, "p");
      c.vector(r, p, "q");
      c.vector(r, p, "mu");
    }
  }
  if (c.array(f, "$", "halfspaces")) {
    for (std::size_t k = 0; k < f["halfspaces"].size(); ++k) {
      const Json& h = f["halfspaces"][k];
      const std::string p = "$.halfspaces[" + std::to_string(k) + "]";
      if (!h.is_object()) {
        c.fail(p, "expected an object");
        break;
      }
      c.only(h, p, {"robot", "n", "a"});
      c.integer(h, p, "robot");
      c.vector(h, p, "n");
      c.number(h, p, "a");
    }
  }
  if (c.object(f, "$", "ack")) {
    c.only(f["ack"], "$.ack", {"seq", "received_tick", "applied_tick"});
    c.integer(f["ack"], "$.ack", "seq", true, -1);
    c.integer(f["ack"], "$.ack", "received_tick", true, -1);
    c.integer(f["ack"], "$.ack", "applied_tick", true, -1);
  }
  check_obstacles(c, f);
}

void check_cmd(Check& c, const Json& f) {
  c.only(f, "$", {"v", "type", "seq", "kind", "value", "name", "paused"});
  c.integer(f, "$", "seq", false);
  if (!c.string(f, "$", "kind")) return;
  const std::string kind = f["kind"].get<std::string>();
  if (kind == "velocity" || kind == "nudge") {
    c.vector(f, "$", "value");
    if (f.contains("name") || f.contains("paused")) c.fail("$", kind + " takes only 'value'");
  } else if (kind == "preset") {
    c.string(f, "$", "name", true, true);
    if (f.contains("value") || f.contains("paused")) c.fail("$", "preset takes only 'name'");
  } else if (kind == "pause") {
    c.boolean(f, "$", "paused", false);
    if (f.contains("value") || f.contains("name")) c.fail("$", "pause takes only 'paused'");
  } else if (kind == "reset") {
    if (f.contains("value") || f.contains("name") || f.contains("paused")) c.fail("$", "reset takes no arguments");
  } else {
    c.fail("$.kind", "unknown command '" + kind + "'");
  }
}

void check_error(Check& c, const Json& f) {
  c.only(f, "$", {"v", "type", "code", "message", "seq"});
  c.string(f, "$", "code");
  c.string(f, "$", "message");
  c.integer(f, "$", "seq", false);
}

}  // namespace

std::string validate(const Json& frame) {
  Check c;
  if (!frame.is_object()) return "$: expected an object";
  const Json* v = c.field(frame, "$", "v");
  if (!v) return c.error();
  if (!v->is_number_integer() || v->get<int>() != kProtocolVersion) return "$.v: expected 1";
  if (!c.string(frame, "$", "type")) return c.error();
  const std::string type = frame["type"].get<std::string>();
  if (type == "hello") {
    check_hello(c, frame);
  } else if (type == "state") {
    check_state(c, frame);
  } else if (type == "cmd") {
    check_cmd(c, frame);
  } else if (type == "error") {
    check_error(c, frame);
  } else {
    c.fail("$.type", "unknown message type '" + type + "'");
  }
  return c.error();
}

Command parse_command(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ProtocolError("bad_json", e.what());
  }
  if (j.is_object() && j.contains("v") && j["v"] != kProtocolVersion)
    throw ProtocolError("bad_version", "protocol version 1 expected");
  if (const std::string err = validate(j); !err.empty()) throw ProtocolError("bad_schema", err);
  if (j["type"] != "cmd") throw ProtocolError("bad_schema", "$.type: clients may only send 'cmd'");

  Command c;
  if (j.contains("seq")) c.seq = j["seq"].get<std::int64_t>();
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "velocity") {
    c.command.kind = CommandKind::Velocity;
    c.command.value = vec3(j["value"]);
  } else if (kind == "nudge") {
    c.command.kind = CommandKind::Nudge;
    c.command.value = vec3(j["value"]);
  } else if (kind == "preset") {
    c.command.kind = CommandKind::Preset;
    if (!j["name"].is_null()) c.command.preset = j["name"].get<std::string>();
  } else if (kind == "pause") {
    c.command.kind = CommandKind::Pause;
    c.paused = j.value("paused", true);
  } else {
    c.command.kind = CommandKind::Reset;
  }
  return c;
}

Json command_to_json(const Command& c) {
  Json j{{"v", kProtocolVersion}, {"type", "cmd"}};
  if (c.seq) j["seq"] = *c.seq;
  switch (c.command.kind) {
    case CommandKind::Velocity:
      j["kind"] = "velocity";
      j["value"] = to_json(c.command.value);
      break;
    case CommandKind::Nudge:
      j["kind"] = "nudge";
      j["value"] = to_json(c.command.value);
      break;
    case CommandKind::Preset:
      j["kind"] = "preset";
      j["name"] = c.command.preset ? Json(*c.command.preset) : Json(nullptr);
      break;
    case CommandKind::Pause:
      j["kind"] = "pause";
      j["paused"] = c.paused;
      break;
    case CommandKind::Reset:
      j["kind"] = "reset";
      break;
  }
  return j;
}

Json error_frame(const std::string& code, const std::string& message, std::optional<std::int64_t> seq) {
  Json j{{"v", kProtocolVersion}, {"type", "error"}, {"code", code}, {"message", message}};
  if (seq) j["seq"] = *seq;
  return j;
}

}  // namespace cablelift::teleop
