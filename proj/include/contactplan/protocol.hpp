#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "contactplan/robot_model.hpp"

namespace contactplan {

inline constexpr int kProtocolVersion = 1;

enum class CommandKind { kApplyPush, kPause, kResume, kReset, kSetConfig };

const char* to_string(CommandKind kind);

struct PushCommand {
  int link = 1;
  double s = 0.5;
  Vec3 force = Vec3::Zero();  // N
  double duration = 0.0;      // s

  bool operator==(const PushCommand&) const = default;
};

struct CommandMessage {
  CommandKind kind = CommandKind::kPause;
  std::string id;  // client correlation tag, echoed in the reply
  PushCommand push;            // apply_push
  nlohmann::json config = nlohmann::json::object();  // set_config: {"detection": {...}, ...}

  bool operator==(const CommandMessage&) const = default;
};

// Throws ProtocolError with a readable reason.
CommandMessage parse_command(const nlohmann::json& doc);
CommandMessage parse_command(const std::string& text);
nlohmann::json command_to_json(const CommandMessage& command);

enum class TelemetryKind { kTick, kDetection, kEstimate, kBump, kPathUpdate, kMetrics };

const char* to_string(TelemetryKind kind);

// Broadcast stream; `seq` increases by one per message across all kinds.
struct TelemetryMessage {
  TelemetryKind kind = TelemetryKind::kTick;
  std::uint64_t seq = 0;
  double t = 0.0;
  nlohmann::json payload = nlohmann::json::object();

  bool operator==(const TelemetryMessage&) const = default;
};

TelemetryMessage parse_telemetry(const nlohmann::json& doc);
nlohmann::json telemetry_to_json(const TelemetryMessage& message);

// Direct answers to one client: hello on connect, ack or error per command.
enum class ReplyKind { kHello, kAck, kError };

const char* to_string(ReplyKind kind);

struct ReplyMessage {
  ReplyKind kind = ReplyKind::kAck;
  std::string id;       // echoed command id
  std::string command;  // command kind, empty if unparseable
  std::string message;  // error reason
  nlohmann::json payload = nlohmann::json::object();  // hello: scenario summary

  bool operator==(const ReplyMessage&) const = default;
};

ReplyMessage parse_reply(const nlohmann::json& doc);
nlohmann::json reply_to_json(const ReplyMessage& reply);

}  // namespace contactplan
