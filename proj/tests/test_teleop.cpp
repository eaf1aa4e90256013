#include "cablelift/error.hpp"
#include "cablelift/scenario_io.hpp"
#include "cablelift/teleop_server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <thread>

using namespace cablelift;
using namespace cablelift::teleop;

namespace {

const std::filesystem::path kSource = CABLELIFT_SOURCE_DIR;

Scenario passage() {
  Scenario sc = load_scenario(kSource / "scenarios/narrow_passage.yaml");
  sc.trajectory.commands.clear();
  return sc;
}

Command velocity(const Vec3& v, std::int64_t seq) {
  Command c;
  c.command.kind = CommandKind::Velocity;
  c.command.value = v;
  c.seq = seq;
  return c;
}

Command preset(std::optional<std::string> name, std::int64_t seq) {
  Command c;
  c.command.kind = CommandKind::Preset;
  c.command.preset = std::move(name);
  c.seq = seq;
  return c;
}

std::vector<Json> drain(Session& s) {
  std::vector<Json> out;
  std::string f;
  while (s.pop_frame(f)) out.push_back(Json::parse(f));
  return out;
}

}  // namespace

TEST(Protocol, CommandRoundTrip) {
  for (const Command& c : {velocity(Vec3(0.1, -0.2, 0.0), 3), preset("line", 4), preset(std::nullopt, 5)}) {
    const Json j = command_to_json(c);
    EXPECT_EQ(validate(j), "") << j.dump();
    const Command back = parse_command(j.dump());
    EXPECT_EQ(back.command.kind, c.command.kind);
    EXPECT_EQ(back.command.value, c.command.value);
    EXPECT_EQ(back.command.preset, c.command.preset);
    EXPECT_EQ(back.seq, c.seq);
  }
  const Command p = parse_command(R"({"v":1,"type":"cmd","kind":"pause","paused":false})");
  EXPECT_EQ(p.command.kind, CommandKind::Pause);
  EXPECT_FALSE(p.paused);
  EXPECT_FALSE(p.seq);
  EXPECT_TRUE(parse_command(R"({"v":1,"type":"cmd","kind":"pause"})").paused);
  EXPECT_EQ(parse_command(R"({"v":1,"type":"cmd","kind":"reset"})").command.kind, CommandKind::Reset);
}

TEST(Protocol, RejectsMalformedCommands) {
  auto code_of = [](const std::string& text) -> std::string {
    try {
      parse_command(text);
    } catch (const ProtocolError& e) {
      return e.code();
    }
    return "accepted";
  };
  EXPECT_EQ(code_of("{not json"), "bad_json");
  EXPECT_EQ(code_of(R"({"v":2,"type":"cmd","kind":"reset"})"), "bad_version");
  EXPECT_EQ(code_of(R"({"type":"cmd","kind":"reset"})"), "bad_schema");
  EXPECT_EQ(code_of(R"({"v":1,"type":"cmd","kind":"fly"})"), "bad_schema");
  EXPECT_EQ(code_of(R"({"v":1,"type":"cmd","kind":"velocity","value":[1,2]})"), "bad_schema");
  EXPECT_EQ(code_of(R"({"v":1,"type":"cmd","kind":"velocity","value":[1,2,3],"name":"x"})"), "bad_schema");
  EXPECT_EQ(code_of(R"({"v":1,"type":"cmd","kind":"reset","extra":1})"), "bad_schema");
  EXPECT_EQ(code_of(R"({"v":1,"type":"cmd","kind":"preset"})"), "bad_schema");
  EXPECT_EQ(code_of(R"({"v":1,"type":"cmd","seq":-4,"kind":"reset"})"), "bad_schema");
  EXPECT_EQ(code_of(R"({"v":1,"type":"state","tick":0})"), "bad_schema");
  EXPECT_EQ(code_of(R"([1,2,3])"), "bad_schema");
}

TEST(Protocol, ServerFramesValidate) {
  Session s(passage());
  EXPECT_EQ(validate(s.hello()), "");
  EXPECT_EQ(s.hello()["presets"].size(), 2u);
  EXPECT_EQ(validate(s.state_frame()), "");
  EXPECT_EQ(validate(error_frame("busy", "x")), "");
  Json broken = s.state_frame();
  broken["robots"][0].erase("mu");
  EXPECT_NE(validate(broken), "");
  broken = s.state_frame();
  broken["v"] = 2;
  EXPECT_NE(validate(broken), "");
}

TEST(Session, RejectsFigureEight) {
  Scenario sc = load_scenario(kSource / "scenarios/pm3_figure8.yaml");
  EXPECT_THROW(Session{sc}, Error);
}

TEST(Session, NoClientHoldsPosition) {
  Session s(passage());
  const Vec3 start = s.loop().state().p0;
  for (int k = 0; k < 250; ++k) s.step();
  EXPECT_LT((s.loop().state().p0 - start).norm(), 5e-3);
  EXPECT_EQ(s.reference().target_velocity(), Vec3::Zero());
}

TEST(Session, CommandAffectsReferenceAtNextTick) {
  Session s(passage());
  for (int k = 0; k < 10; ++k) s.step();
  const std::int64_t T = s.tick();
  const double v_before = s.loop().last().ref.dp0r.x();
  ASSERT_TRUE(s.push(velocity(Vec3(0.3, 0, 0), 7)));
  s.step();
  EXPECT_EQ(s.ack().seq, 7);
  EXPECT_EQ(s.ack().received_tick, T);
  EXPECT_LE(s.ack().applied_tick - s.ack().received_tick, 1);
  // The record of the tick that consumed the command already carries the new reference.
  EXPECT_GT(s.loop().last().ref.dp0r.x(), v_before);
  EXPECT_EQ(s.loop().last().tick, T);
}

TEST(Session, VelocityIsClampedAndSmoothed) {
  Session s(passage());
  s.push(velocity(Vec3(5, 0, 0), 1));
  double prev_v = 0.0, max_a = 0.0, max_v = 0.0;
  const double dt = s.loop().scenario().control_dt();
  for (int k = 0; k < 500; ++k) {
    s.step();
    const double v = s.loop().last().ref.dp0r.x();
    max_a = std::max(max_a, std::abs(v - prev_v) / dt);
    max_v = std::max(max_v, v);
    prev_v = v;
  }
  const auto& lim = s.loop().scenario().trajectory.limits;
  EXPECT_NEAR(s.reference().target_velocity().x(), lim.max_speed, 1e-12);
  EXPECT_LE(max_v, lim.max_speed + 1e-9);
  EXPECT_LE(max_a, lim.max_accel + 1e-6);
}

TEST(Session, DisconnectHoldsAndPauseFreezes) {
  Session s(passage());
  s.push(velocity(Vec3(0.2, 0, 0), 1));
  for (int k = 0; k < 100; ++k) s.step();
  s.disconnected();
  s.step();
  EXPECT_EQ(s.reference().target_velocity(), Vec3::Zero());

  Command pause;
  pause.command.kind = CommandKind::Pause;
  s.push(pause);
  s.step();
  const auto frozen = s.tick();
  for (int k = 0; k < 20; ++k) s.step();
  EXPECT_EQ(s.tick(), frozen);
  EXPECT_TRUE(s.paused());
  // Frames keep flowing while paused.
  const auto frames = drain(s);
  ASSERT_FALSE(frames.empty());
  EXPECT_TRUE(frames.back()["paused"].get<bool>());

  pause.paused = false;
  s.push(pause);
  s.step();
  EXPECT_EQ(s.tick(), frozen + 1);
}

TEST(Session, UnknownPresetAnswersWithErrorAndContinues) {
  Session s(passage());
  s.push(preset("zigzag", 11));
  s.step();
  bool seen = false;
  for (const auto& f : drain(s)) {
    EXPECT_EQ(validate(f), "");
    if (f["type"] == "error") {
      EXPECT_EQ(f["code"], "unknown_preset");
      EXPECT_EQ(f["seq"], 11);
      seen = true;
    }
  }
  EXPECT_TRUE(seen);
  EXPECT_FALSE(s.loop().allocator().preset_name());
  s.push(preset("line", 12));
  s.step();
  EXPECT_EQ(s.loop().allocator().preset_name(), std::optional<std::string>("line"));
}

TEST(Session, ResetReturnsToStart) {
  Session s(passage());
  const Vec3 start = s.loop().state().p0;
  s.push(velocity(Vec3(0.4, 0, 0), 1));
  for (int k = 0; k < 300; ++k) s.step();
  EXPECT_GT((s.loop().state().p0 - start).norm(), 0.05);
  Command reset;
  reset.command.kind = CommandKind::Reset;
  s.push(reset);
  s.step();
  EXPECT_EQ(s.tick(), 1);
  EXPECT_EQ(s.reference().target_velocity(), Vec3::Zero());
  EXPECT_LT((s.loop().state().p0 - start).norm(), 1e-3);
}

TEST(Session, FrameRateAndDropping) {
  Session::Options opts;
  opts.queue_capacity = 4;
  Session s(passage(), opts);
  // One simulated second at 250 Hz control.
  int published = 0;
  for (int k = 0; k < 250; ++k) published += s.step() ? 1 : 0;
  EXPECT_EQ(published, 30);
  EXPECT_EQ(s.dropped_frames(), 26u);
  EXPECT_EQ(drain(s).size(), 4u);
  // Ticks in published frames only increase.
  std::int64_t last = -1;
  for (int k = 0; k < 50; ++k) {
    if (!s.step()) continue;
    for (const auto& f : drain(s)) {
      EXPECT_GT(f["tick"].get<std::int64_t>(), last);
      last = f["tick"].get<std::int64_t>();
    }
  }
}

TEST(Server, PortFromEnvironment) {
  ::unsetenv("CABLELIFT_PORT");
  EXPECT_EQ(port_from_env(8765), 8765);
  ::setenv("CABLELIFT_PORT", "9001", 1);
  EXPECT_EQ(port_from_env(8765), 9001);
  ::setenv("CABLELIFT_PORT", "nope", 1);
  EXPECT_THROW(port_from_env(8765), Error);
  ::unsetenv("CABLELIFT_PORT");
}

// Scripted operator over a real loopback socket: velocity square wave, preset switches,
// one malformed message. Every message in both directions is checked against the schema
// and optionally written to $CABLELIFT_TRANSCRIPT for an external validator.
TEST(Loopback, ScriptedOperator) {
  namespace asio = boost::asio;
  namespace websocket = boost::beast::websocket;
  using tcp = asio::ip::tcp;

  Session::Options opts;
  opts.speed = 2.0;
  Session session(passage(), opts);
  Server server(session, 0);
  std::jthread net([&server](std::stop_token st) { server.run(st); });
  std::jthread owner([&session](std::stop_token st) { session.run(st); });

  std::ofstream transcript;
  if (const char* path = std::getenv("CABLELIFT_TRANSCRIPT")) transcript.open(path);
  std::vector<std::string> violations;
  auto record = [&](const std::string& text) {
    const Json j = Json::parse(text);
    if (const auto err = validate(j); !err.empty()) violations.push_back(err + " in " + text.substr(0, 120));
    if (transcript) transcript << j.dump() << '\n';
    return j;
  };

  asio::io_context ioc;
  websocket::stream<tcp::socket> ws(ioc);
  ws.next_layer().connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), server.port()));
  ws.handshake("127.0.0.1", "/");
  ws.text(true);
  boost::beast::flat_buffer buf;
  auto receive = [&]() {
    buf.clear();
    ws.read(buf);
    return record(boost::beast::buffers_to_string(buf.data()));
  };
  auto send = [&](const Json& j) {
    record(j.dump());
    ws.write(asio::buffer(j.dump()));
  };

  const Json hello = receive();
  ASSERT_EQ(hello["type"], "hello");

  // A second operator is turned away.
  {
    websocket::stream<tcp::socket> other(ioc);
    other.next_layer().connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), server.port()));
    other.handshake("127.0.0.1", "/");
    boost::beast::flat_buffer b;
    other.read(b);
    const Json busy = record(boost::beast::buffers_to_string(b.data()));
    EXPECT_EQ(busy["type"], "error");
    EXPECT_EQ(busy["code"], "busy");
  }

  std::int64_t seq = 0, last_tick = -1;
  int frames = 0, errors_seen = 0, max_latency = 0;
  std::map<std::int64_t, std::string> sent_kind;
  bool sent_line = false, sent_off = false, sent_garbage = false, saw_line = false, saw_off = false;
  double last_sign = 0.0;
  while (true) {
    const Json m = receive();
    if (m["type"] == "error") {
      ++errors_seen;
      EXPECT_EQ(m["code"], "bad_json");
      continue;
    }
    ASSERT_EQ(m["type"], "state");
    ++frames;
    const auto tick = m["tick"].get<std::int64_t>();
    EXPECT_GT(tick, last_tick);
    last_tick = tick;
    const double t = m["t"].get<double>();
    const auto& ack = m["ack"];
    if (ack["seq"].get<std::int64_t>() >= 0) {
      max_latency = std::max<int>(max_latency, static_cast<int>(ack["applied_tick"].get<std::int64_t>() -
                                                                ack["received_tick"].get<std::int64_t>()));
      const std::string kind = sent_kind[ack["seq"].get<std::int64_t>()];
      if (kind == "line") saw_line = saw_line || m["preset"] == "line";
      if (kind == "off" && sent_line) saw_off = saw_off || m["preset"].is_null();
    }
    if (t >= 3.0) break;

    const double sign = std::fmod(t, 1.0) < 0.5 ? 1.0 : -1.0;
    if (sign != last_sign) {
      send(command_to_json(velocity(Vec3(0.2 * sign, 0, 0), ++seq)));
      sent_kind[seq] = "velocity";
      last_sign = sign;
    }
    if (t >= 1.0 && !sent_line) {
      send(command_to_json(preset("line", ++seq)));
      sent_kind[seq] = "line";
      sent_line = true;
    }
    if (t >= 2.0 && !sent_off) {
      send(command_to_json(preset(std::nullopt, ++seq)));
      sent_kind[seq] = "off";
      sent_off = true;
    }
    if (t >= 1.5 && !sent_garbage) {
      ws.write(asio::buffer(std::string("{\"v\":1,")));
      sent_garbage = true;
    }
  }
  ws.close(websocket::close_code::normal);

  owner.request_stop();
  owner.join();
  net.request_stop();
  net.join();
  // The owner is stopped, so the disconnect hold is applied here.
  session.step();

  EXPECT_TRUE(violations.empty()) << violations.front();
  EXPECT_LE(max_latency, 1);
  EXPECT_TRUE(saw_line);
  EXPECT_TRUE(saw_off);
  EXPECT_EQ(errors_seen, 1);
  EXPECT_GE(frames, 80);
  EXPECT_EQ(session.reference().target_velocity(), Vec3::Zero());
  EXPECT_EQ(session.dropped_commands(), 0u);
}
