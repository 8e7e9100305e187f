#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "contactplan/protocol.hpp"
#include "contactplan/simulation.hpp"

namespace contactplan {

using ClientId = std::uint64_t;

struct QueuedCommand {
  ClientId client = 0;
  CommandMessage command;
};

struct SessionOutput {
  std::vector<TelemetryMessage> telemetry;                  // broadcast
  std::vector<std::pair<ClientId, ReplyMessage>> replies;  // addressed
};

// Simulation owner for the live service. Single-threaded: the caller feeds
// commands received since the previous tick and forwards the output.
class LiveSession {
 public:
  explicit LiveSession(Scenario scenario, bool keep_ticks = false, double telemetry_hz = 60.0);

  // Applies `commands` in order, then advances one tick unless paused.
  SessionOutput tick(const std::vector<QueuedCommand>& commands);

  ReplyMessage hello() const;
  TelemetryMessage path_update();

  bool paused() const { return paused_; }
  const Simulation& simulation() const { return *sim_; }
  // Contacts injected through apply_push since the last reset.
  const std::vector<GroundTruthContact>& injected() const { return injected_; }
  long tick_stride() const { return stride_; }

 private:
  ReplyMessage apply(const QueuedCommand& cmd, SessionOutput& out);
  TelemetryMessage make(TelemetryKind kind, nlohmann::json payload, std::optional<double> t = {});
  void step(SessionOutput& out);

  Scenario scenario_;
  bool keep_ticks_;
  long stride_;
  std::unique_ptr<Simulation> sim_;
  std::vector<GroundTruthContact> injected_;
  bool paused_ = false;
  bool last_contact_ = false;
  std::size_t windows_seen_ = 0;
  std::uint64_t seq_ = 0;
  long episodes_ = 0;
  long gated_ = 0;
  double mae_sum_ = 0.0;
};

inline constexpr int kPathUpdateSamples = 101;

}  // namespace contactplan
