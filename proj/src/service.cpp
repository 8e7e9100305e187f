#include "contactplan/service.hpp"

#include <chrono>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "contactplan/errors.hpp"

namespace contactplan {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

class WsSession;

struct TelemetryServer::Impl {
  net::io_context io;
  tcp::acceptor acceptor{io};
  std::thread thread;
  std::size_t queue_limit;

  mutable std::mutex mutex;  // guards sessions and inbox
  std::map<ClientId, std::weak_ptr<WsSession>> sessions;
  std::vector<Event> inbox;
  ClientId next_id = 1;
  std::atomic<std::uint64_t> dropped{0};

  void do_accept();
  void add(ClientId id, const std::shared_ptr<WsSession>& s) {
    std::lock_guard lock(mutex);
    sessions[id] = s;
    inbox.push_back({Event::Type::kConnected, id, {}});
  }
  void remove(ClientId id) {
    std::lock_guard lock(mutex);
    sessions.erase(id);
  }
  void push_command(ClientId id, CommandMessage cmd) {
    std::lock_guard lock(mutex);
    inbox.push_back({Event::Type::kCommand, id, std::move(cmd)});
  }
};

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, TelemetryServer::Impl& server, ClientId id)
      : ws_(std::move(socket)), server_(server), id_(id) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->server_.add(self->id_, self);
      spdlog::info("client {} connected", self->id_);
      self->do_read();
    });
  }

  // Must run on the I/O thread.
  void enqueue(std::shared_ptr<const std::string> text) {
    if (closed_) return;
    if (queue_.size() >= server_.queue_limit) {
      // Front is in flight while writing; drop the next oldest instead.
      auto victim = queue_.begin() + (writing_ ? 1 : 0);
      if (victim != queue_.end()) {
        queue_.erase(victim);
        ++server_.dropped;
      }
    }
    queue_.push_back(std::move(text));
    if (!writing_) do_write();
  }

 private:
  void do_read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      try {
        self->server_.push_command(self->id_, parse_command(text));
      } catch (const ProtocolError& e) {
        ReplyMessage reply;
        reply.kind = ReplyKind::kError;
        reply.message = e.what();
        self->enqueue(std::make_shared<const std::string>(reply_to_json(reply).dump()));
      }
      self->do_read();
    });
  }

  void do_write() {
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(*queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      self->queue_.pop_front();
                      if (ec) {
                        self->close();
                        return;
                      }
                      if (self->queue_.empty()) {
                        self->writing_ = false;
                      } else {
                        self->do_write();
                      }
                    });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    queue_.clear();
    server_.remove(id_);
    spdlog::info("client {} disconnected", id_);
  }

  websocket::stream<beast::tcp_stream> ws_;
  TelemetryServer::Impl& server_;
  ClientId id_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool writing_ = false;
  bool closed_ = false;
};

void TelemetryServer::Impl::do_accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) {
      if (ec != net::error::operation_aborted) spdlog::warn("accept failed: {}", ec.message());
      if (!acceptor.is_open()) return;
    } else {
      ClientId id;
      {
        std::lock_guard lock(mutex);
        id = next_id++;
      }
      std::make_shared<WsSession>(std::move(socket), *this, id)->start();
    }
    do_accept();
  });
}

TelemetryServer::TelemetryServer(const std::string& address, unsigned short port, std::size_t queue_limit)
    : impl_(std::make_unique<Impl>()) {
  if (queue_limit < 2) throw ArgumentError("client queue limit must be at least 2");
  impl_->queue_limit = queue_limit;
  beast::error_code ec;
  const tcp::endpoint endpoint(net::ip::make_address(address, ec), port);
  if (ec) throw ArgumentError("bad listen address '" + address + "'");
  impl_->acceptor.open(endpoint.protocol(), ec);
  if (!ec) impl_->acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) impl_->acceptor.bind(endpoint, ec);
  if (!ec) impl_->acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) throw IoError("cannot listen on " + address + ":" + std::to_string(port) + ": " + ec.message());
}

TelemetryServer::~TelemetryServer() { stop(); }

unsigned short TelemetryServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void TelemetryServer::start() {
  if (impl_->thread.joinable()) return;
  impl_->do_accept();
  impl_->thread = std::thread([this] { impl_->io.run(); });
}

void TelemetryServer::stop() {
  if (!impl_ || !impl_->thread.joinable()) return;
  net::post(impl_->io, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
  });
  impl_->io.stop();
  impl_->thread.join();
}

void TelemetryServer::broadcast(std::string text) {
  auto shared = std::make_shared<const std::string>(std::move(text));
  std::lock_guard lock(impl_->mutex);
  for (const auto& [id, weak] : impl_->sessions) {
    if (auto s = weak.lock()) net::post(impl_->io, [s, shared] { s->enqueue(shared); });
  }
}

void TelemetryServer::send(ClientId client, std::string text) {
  auto shared = std::make_shared<const std::string>(std::move(text));
  std::lock_guard lock(impl_->mutex);
  const auto it = impl_->sessions.find(client);
  if (it == impl_->sessions.end()) return;
  if (auto s = it->second.lock()) net::post(impl_->io, [s, shared] { s->enqueue(shared); });
}

std::vector<TelemetryServer::Event> TelemetryServer::drain() {
  std::lock_guard lock(impl_->mutex);
  std::vector<Event> out;
  out.swap(impl_->inbox);
  return out;
}

std::size_t TelemetryServer::client_count() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->sessions.size();
}

std::uint64_t TelemetryServer::dropped() const { return impl_->dropped.load(); }

Service::Service(Scenario scenario, ServeOptions options)
    : options_(std::move(options)),
      session_(std::move(scenario), false, options_.telemetry_hz),
      server_(options_.address, options_.port, options_.client_queue_limit) {
  if (!(options_.speed > 0.0)) throw ArgumentError("speed must be positive");
}

Service::~Service() { server_.stop(); }

void Service::run(const std::atomic<bool>& stop) {
  using clock = std::chrono::steady_clock;
  server_.start();
  spdlog::info("serving on ws://{}:{}", options_.address, server_.port());
  const auto period = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(session_.simulation().scenario().dt() / options_.speed));
  auto next = clock::now();
  while (!stop.load()) {
    std::vector<QueuedCommand> commands;
    for (TelemetryServer::Event& e : server_.drain()) {
      if (e.type == TelemetryServer::Event::Type::kConnected) {
        server_.send(e.client, reply_to_json(session_.hello()).dump());
      } else {
        commands.push_back({e.client, std::move(e.command)});
      }
    }
    SessionOutput out = session_.tick(commands);
    for (auto& [client, reply] : out.replies) server_.send(client, reply_to_json(reply).dump());
    for (const TelemetryMessage& m : out.telemetry) server_.broadcast(telemetry_to_json(m).dump());

    next += period;
    const auto now = clock::now();
    if (next < now - std::chrono::milliseconds(200)) next = now;  // do not burst after a stall
    std::this_thread::sleep_until(next);
  }
  server_.stop();
}

}  // namespace contactplan
