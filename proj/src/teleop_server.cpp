#include "cablelift/teleop_server.hpp"

#include "cablelift/error.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <cstdlib>
#include <deque>

namespace cablelift::teleop {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

constexpr auto kPollPeriod = std::chrono::milliseconds(2);
// Frames queued for a slow client beyond this are dropped, oldest first.
constexpr std::size_t kMaxPendingWrites = 8;

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, Session* session, std::function<void()> on_close)
      : ws_(std::move(socket)), session_(session), on_close_(std::move(on_close)) {}

  /// session == nullptr: reject with a busy error after the handshake.
  void start() {
    ws_.text(true);
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return self->close();
      if (!self->session_) {
        self->send(error_frame("busy", "another operator is connected").dump());
        self->closing_ = true;
        return;
      }
      self->send(self->session_->hello().dump());
      self->read();
    });
  }

  void send(std::string text) {
    if (closed_) return;
    if (pending_.size() >= kMaxPendingWrites) pending_.pop_front();
    pending_.push_back(std::move(text));
    if (!writing_) write();
  }

  bool closed() const { return closed_; }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      try {
        const Command c = parse_command(text);
        if (!self->session_->push(c)) self->send(error_frame("queue_full", "command dropped", c.seq).dump());
      } catch (const ProtocolError& e) {
        self->send(error_frame(e.code(), e.what()).dump());
      }
      self->read();
    });
  }

  void write() {
    writing_ = true;
    ws_.async_write(asio::buffer(pending_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) return self->close();
      self->pending_.pop_front();
      if (!self->pending_.empty()) return self->write();
      if (self->closing_) {
        self->ws_.async_close(websocket::close_code::try_again_later,
                              [self](beast::error_code) { self->close(); });
      }
    });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    if (session_) session_->disconnected();
    beast::error_code ignored;
    beast::get_lowest_layer(ws_).close(ignored);
    if (on_close_) on_close_();
  }

  websocket::stream<tcp::socket> ws_;
  Session* session_;
  std::function<void()> on_close_;
  beast::flat_buffer buffer_;
  std::deque<std::string> pending_;
  bool writing_ = false;
  bool closing_ = false;
  bool closed_ = false;
};

}  // namespace

struct Server::Impl {
  Impl(Session& s, unsigned short port, const std::string& address)
      : session(s), acceptor(io), timer(io), signals(io) {
    beast::error_code ec;
    const auto addr = asio::ip::make_address(address, ec);
    if (ec) throw Error(ErrorCode::InvalidConfig, "bad listen address '" + address + "'");
    const tcp::endpoint ep(addr, port);
    acceptor.open(ep.protocol());
    acceptor.set_option(asio::socket_base::reuse_address(true));
    acceptor.bind(ep, ec);
    if (ec) throw Error(ErrorCode::InvalidConfig, "cannot bind port " + std::to_string(port) + ": " + ec.message());
    acceptor.listen();
  }

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      if (client && !client->closed()) {
        std::make_shared<Connection>(std::move(socket), nullptr, nullptr)->start();
      } else {
        client = std::make_shared<Connection>(std::move(socket), &session, nullptr);
        client->start();
      }
      accept();
    });
  }

  void poll() {
    timer.expires_after(kPollPeriod);
    timer.async_wait([this](beast::error_code ec) {
      if (ec) return;
      std::string frame;
      // Without a client frames are still drained so the owner never sees a full queue.
      while (session.pop_frame(frame))
        if (client && !client->closed()) client->send(std::move(frame));
      poll();
    });
  }

  Session& session;
  asio::io_context io;
  tcp::acceptor acceptor;
  asio::steady_timer timer;
  asio::signal_set signals;
  std::shared_ptr<Connection> client;
};

Server::Server(Session& session, unsigned short port, const std::string& address)
    : impl_(std::make_unique<Impl>(session, port, address)) {}

Server::~Server() = default;

unsigned short Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::run(std::stop_token stop, bool handle_signals) {
  Impl& s = *impl_;
  std::stop_callback on_stop(stop, [&s] { asio::post(s.io, [&s] { s.io.stop(); }); });
  if (handle_signals) {
    s.signals.add(SIGINT);
    s.signals.add(SIGTERM);
    s.signals.async_wait([&s](beast::error_code, int) { s.io.stop(); });
  }
  s.accept();
  s.poll();
  s.io.run();
}

unsigned short port_from_env(unsigned short fallback) {
  const char* env = std::getenv("CABLELIFT_PORT");
  if (!env || !*env) return fallback;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 0 || v > 65535) throw Error(ErrorCode::InvalidConfig, "CABLELIFT_PORT must be a port number");
  return static_cast<unsigned short>(v);
}

}  // namespace cablelift::teleop
