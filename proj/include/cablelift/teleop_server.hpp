#pragma once

#include "cablelift/teleop.hpp"

#include <memory>
#include <stop_token>
#include <string>

namespace cablelift::teleop {

/// WebSocket endpoint for one Session. One operator at a time; further clients get a
/// `busy` error and are closed. All network I/O runs on the thread calling run().
class Server {
 public:
  /// Port 0 binds an ephemeral port; see port().
  Server(Session& session, unsigned short port, const std::string& address = "127.0.0.1");
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const;
  /// Serves until stop is requested or SIGINT/SIGTERM arrives (when handle_signals).
  void run(std::stop_token stop, bool handle_signals = false);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Port from CABLELIFT_PORT when set, otherwise `fallback`.
unsigned short port_from_env(unsigned short fallback);

}  // namespace cablelift::teleop
