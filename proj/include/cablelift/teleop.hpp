#pragma once

#include "cablelift/closed_loop.hpp"
#include "cablelift/run_log.hpp"

#include <boost/lockfree/spsc_queue.hpp>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <stop_token>
#include <string>

namespace cablelift::teleop {

inline constexpr int kProtocolVersion = 1;

/// Operator command as received on the wire.
struct Command {
  TeleopCommand command;
  /// Live sessions only: false resumes a paused simulation.
  bool paused = true;
  std::optional<std::int64_t> seq;
};

/// Rejected client message. `code` is one of the documented error codes.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Parses a `cmd` message. Throws ProtocolError("bad_json" | "bad_version" | "bad_schema").
Command parse_command(const std::string& text);
Json command_to_json(const Command& c);

Json error_frame(const std::string& code, const std::string& message, std::optional<std::int64_t> seq = {});

/// Empty when `frame` conforms to the schema of its `type`; otherwise the first violation.
std::string validate(const Json& frame);

struct Ack {
  std::int64_t seq = -1;
  std::int64_t received_tick = -1;
  std::int64_t applied_tick = -1;
};

/// Owns one closed loop and drives it from operator commands. Exactly one thread (the
/// owner) calls step(); commands and frames cross threads through single-producer queues.
class Session {
 public:
  struct Options {
    double frame_rate = 30.0;
    /// Simulated seconds per wall-clock second when paced by run().
    double speed = 1.0;
    std::size_t queue_capacity = 256;
  };

  /// Figure-8 scenarios are rejected: the operator owns the reference.
  Session(const Scenario& scenario, Options options);
  explicit Session(const Scenario& scenario) : Session(scenario, Options{}) {}

  Json hello() const;

  /// Reader side. Returns false when the queue is full (the command is dropped).
  bool push(const Command& c);
  /// Reader side: the client went away. Queues a zero-velocity hold.
  void disconnected();
  /// Writer side. Frames are dropped when the writer falls behind.
  bool pop_frame(std::string& out);

  /// Owner side: applies queued commands, advances one control tick unless paused and
  /// publishes a frame when one is due. Returns true if a frame was published.
  bool step();
  /// Owner loop paced against the wall clock until stop is requested.
  void run(std::stop_token stop);

  Json state_frame() const;

  std::int64_t tick() const { return tick_.load(std::memory_order_acquire); }
  bool paused() const { return paused_; }
  const ClosedLoop& loop() const { return loop_; }
  const VelocityReference& reference() const { return vr_; }
  const Ack& ack() const { return ack_; }
  std::uint64_t dropped_frames() const { return dropped_frames_.load(); }
  std::uint64_t dropped_commands() const { return dropped_commands_.load(); }
  double frame_rate() const { return options_.frame_rate; }

 private:
  struct Inbound {
    Command command;
    std::int64_t received_tick = 0;
    bool hold = false;
  };

  void apply(const Inbound& in);
  void publish(const Json& frame);

  Scenario scenario_;
  Options options_;
  ClosedLoop loop_;
  VelocityReference vr_;
  ReferenceSetpoint ref_;
  bool paused_ = false;
  std::string error_;
  Ack ack_;
  std::int64_t iterations_ = 0;
  double next_frame_at_ = 0.0;
  std::atomic<std::int64_t> tick_{0};
  std::atomic<std::uint64_t> dropped_frames_{0};
  std::atomic<std::uint64_t> dropped_commands_{0};
  boost::lockfree::spsc_queue<Inbound> inbound_;
  boost::lockfree::spsc_queue<std::string> outbound_;
};

}  // namespace cablelift::teleop
