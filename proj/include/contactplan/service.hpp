#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "contactplan/live_session.hpp"

namespace contactplan {

// WebSocket front end. Network I/O runs on its own thread; the simulation
// loop only touches the inbox and the non-blocking send calls.
class TelemetryServer {
 public:
  struct Event {
    enum class Type { kConnected, kCommand };
    Type type = Type::kCommand;
    ClientId client = 0;
    CommandMessage command;
  };

  TelemetryServer(const std::string& address, unsigned short port, std::size_t queue_limit);
  ~TelemetryServer();
  TelemetryServer(const TelemetryServer&) = delete;
  TelemetryServer& operator=(const TelemetryServer&) = delete;

  unsigned short port() const;
  void start();
  void stop();

  // Both calls return immediately. When a client's queue is full its oldest
  // pending message is dropped.
  void broadcast(std::string text);
  void send(ClientId client, std::string text);

  std::vector<Event> drain();
  std::size_t client_count() const;
  std::uint64_t dropped() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

struct ServeOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  double speed = 1.0;          // simulated seconds per wall-clock second
  double telemetry_hz = 60.0;
  std::size_t client_queue_limit = 512;
};

// Wall-clock paced loop around a LiveSession.
class Service {
 public:
  Service(Scenario scenario, ServeOptions options);
  ~Service();

  unsigned short port() const { return server_.port(); }
  // Blocks until `stop` becomes true.
  void run(const std::atomic<bool>& stop);
  const LiveSession& session() const { return session_; }

 private:
  ServeOptions options_;
  LiveSession session_;
  TelemetryServer server_;
};

}  // namespace contactplan
