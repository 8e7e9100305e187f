#include "contactplan/protocol.hpp"

#include <cmath>
#include <initializer_list>

#include "contactplan/errors.hpp"

namespace contactplan {

using nlohmann::json;

namespace {

void check_version(const json& doc) {
  if (!doc.is_object()) throw ProtocolError("message must be a JSON object");
  if (doc.contains("protocol_version") &&
      (!doc["protocol_version"].is_number_integer() || doc["protocol_version"].get<int>() != kProtocolVersion)) {
    throw ProtocolError("unsupported protocol_version (this server speaks " + std::to_string(kProtocolVersion) + ")");
  }
  if (!doc.contains("kind") || !doc["kind"].is_string()) throw ProtocolError("missing string field 'kind'");
}

void require(const json& payload, std::initializer_list<const char*> keys, const std::string& kind) {
  if (!payload.is_object()) throw ProtocolError(kind + ": payload must be an object");
  for (const char* k : keys) {
    if (!payload.contains(k)) throw ProtocolError(kind + ": payload is missing '" + k + "'");
  }
}

double number(const json& v, const std::string& what) {
  if (!v.is_number()) throw ProtocolError(what + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ProtocolError(what + " must be finite");
  return x;
}

}  // namespace

const char* to_string(CommandKind kind) {
  switch (kind) {
    case CommandKind::kApplyPush: return "apply_push";
    case CommandKind::kPause: return "pause";
    case CommandKind::kResume: return "resume";
    case CommandKind::kReset: return "reset";
    case CommandKind::kSetConfig: return "set_config";
  }
  return "unknown";
}

const char* to_string(TelemetryKind kind) {
  switch (kind) {
    case TelemetryKind::kTick: return "tick";
    case TelemetryKind::kDetection: return "detection";
    case TelemetryKind::kEstimate: return "estimate";
    case TelemetryKind::kBump: return "bump";
    case TelemetryKind::kPathUpdate: return "path_update";
    case TelemetryKind::kMetrics: return "metrics";
  }
  return "unknown";
}

const char* to_string(ReplyKind kind) {
  switch (kind) {
    case ReplyKind::kHello: return "hello";
    case ReplyKind::kAck: return "ack";
    case ReplyKind::kError: return "error";
  }
  return "unknown";
}

CommandMessage parse_command(const json& doc) {
  check_version(doc);
  const std::string kind = doc["kind"].get<std::string>();
  CommandMessage cmd;
  if (doc.contains("id")) {
    if (!doc["id"].is_string()) throw ProtocolError("'id' must be a string");
    cmd.id = doc["id"].get<std::string>();
  }
  const json payload = doc.contains("payload") ? doc["payload"] : json::object();
  if (!payload.is_object()) throw ProtocolError("'payload' must be an object");

  if (kind == "apply_push") {
    cmd.kind = CommandKind::kApplyPush;
    require(payload, {"link", "s", "force", "duration"}, kind);
    if (!payload["link"].is_number_integer()) throw ProtocolError("apply_push: 'link' must be an integer");
    cmd.push.link = payload["link"].get<int>();
    cmd.push.s = number(payload["s"], "apply_push: 's'");
    const json& f = payload["force"];
    if (!f.is_array() || f.size() != 3) throw ProtocolError("apply_push: 'force' must hold 3 numbers");
    for (int i = 0; i < 3; ++i) cmd.push.force[i] = number(f[i], "apply_push: 'force'");
    cmd.push.duration = number(payload["duration"], "apply_push: 'duration'");
  } else if (kind == "pause") {
    cmd.kind = CommandKind::kPause;
  } else if (kind == "resume") {
    cmd.kind = CommandKind::kResume;
  } else if (kind == "reset") {
    cmd.kind = CommandKind::kReset;
  } else if (kind == "set_config") {
    cmd.kind = CommandKind::kSetConfig;
    for (const auto& [key, value] : payload.items()) {
      if (key != "detection" && key != "estimation" && key != "planner") {
        throw ProtocolError("set_config: unknown block '" + key + "'");
      }
      if (!value.is_object()) throw ProtocolError("set_config: '" + key + "' must be an object");
    }
    cmd.config = payload;
  } else {
    throw ProtocolError("unknown command kind '" + kind + "'");
  }
  return cmd;
}

CommandMessage parse_command(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed JSON: ") + e.what());
  }
  return parse_command(doc);
}

json command_to_json(const CommandMessage& cmd) {
  json out = {{"kind", to_string(cmd.kind)}, {"protocol_version", kProtocolVersion}};
  if (!cmd.id.empty()) out["id"] = cmd.id;
  if (cmd.kind == CommandKind::kApplyPush) {
    out["payload"] = {{"link", cmd.push.link},
                      {"s", cmd.push.s},
                      {"force", {cmd.push.force.x(), cmd.push.force.y(), cmd.push.force.z()}},
                      {"duration", cmd.push.duration}};
  } else if (cmd.kind == CommandKind::kSetConfig) {
    out["payload"] = cmd.config;
  }
  return out;
}

TelemetryMessage parse_telemetry(const json& doc) {
  check_version(doc);
  const std::string kind = doc["kind"].get<std::string>();
  TelemetryMessage msg;
  bool known = false;
  for (TelemetryKind k : {TelemetryKind::kTick, TelemetryKind::kDetection, TelemetryKind::kEstimate,
                          TelemetryKind::kBump, TelemetryKind::kPathUpdate, TelemetryKind::kMetrics}) {
    if (kind == to_string(k)) {
      msg.kind = k;
      known = true;
    }
  }
  if (!known) throw ProtocolError("unknown telemetry kind '" + kind + "'");
  if (!doc.contains("seq") || !doc["seq"].is_number_unsigned()) throw ProtocolError("missing 'seq'");
  msg.seq = doc["seq"].get<std::uint64_t>();
  msg.t = number(doc.value("t", json(nullptr)), "'t'");
  msg.payload = doc.value("payload", json::object());
  switch (msg.kind) {
    case TelemetryKind::kTick:
      require(msg.payload, {"k", "s_path", "q", "frames", "tip", "eta_bar", "contact"}, kind);
      break;
    case TelemetryKind::kDetection:
      require(msg.payload, {"k", "contact", "eta_bar", "link"}, kind);
      break;
    case TelemetryKind::kEstimate:
      require(msg.payload, {"window", "gated", "estimate"}, kind);
      break;
    case TelemetryKind::kBump:
      require(msg.payload, {"window", "start", "horizon", "increment"}, kind);
      break;
    case TelemetryKind::kPathUpdate:
      require(msg.payload, {"samples"}, kind);
      break;
    case TelemetryKind::kMetrics:
      require(msg.payload, {}, kind);
      break;
  }
  return msg;
}

json telemetry_to_json(const TelemetryMessage& m) {
  return {{"kind", to_string(m.kind)},
          {"protocol_version", kProtocolVersion},
          {"seq", m.seq},
          {"t", m.t},
          {"payload", m.payload}};
}

ReplyMessage parse_reply(const json& doc) {
  check_version(doc);
  const std::string kind = doc["kind"].get<std::string>();
  ReplyMessage r;
  if (kind == "hello") {
    r.kind = ReplyKind::kHello;
  } else if (kind == "ack") {
    r.kind = ReplyKind::kAck;
  } else if (kind == "error") {
    r.kind = ReplyKind::kError;
  } else {
    throw ProtocolError("unknown reply kind '" + kind + "'");
  }
  r.id = doc.value("id", "");
  r.command = doc.value("command", "");
  r.message = doc.value("message", "");
  r.payload = doc.value("payload", json::object());
  return r;
}

json reply_to_json(const ReplyMessage& r) {
  json out = {{"kind", to_string(r.kind)}, {"protocol_version", kProtocolVersion}};
  if (!r.id.empty()) out["id"] = r.id;
  if (!r.command.empty()) out["command"] = r.command;
  if (!r.message.empty()) out["message"] = r.message;
  if (!r.payload.empty()) out["payload"] = r.payload;
  return out;
}

}  // namespace contactplan
