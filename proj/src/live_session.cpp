#include "contactplan/live_session.hpp"

#include <cmath>

#include "contactplan/errors.hpp"
#include "contactplan/scenario.hpp"
#include "contactplan/trace_io.hpp"

namespace contactplan {

using nlohmann::json;

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json vec_json(const VecX& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

}  // namespace

LiveSession::LiveSession(Scenario scenario, bool keep_ticks, double telemetry_hz)
    : scenario_(std::move(scenario)), keep_ticks_(keep_ticks) {
  if (!(telemetry_hz > 0.0)) throw ArgumentError("telemetry rate must be positive");
  stride_ = std::max(1L, static_cast<long>(std::ceil(scenario_.sample_rate / telemetry_hz - 1e-9)));
  sim_ = std::make_unique<Simulation>(scenario_, keep_ticks_);
  sim_->set_unbounded(true);
}

TelemetryMessage LiveSession::make(TelemetryKind kind, json payload, std::optional<double> t) {
  return {kind, seq_++, t.value_or(sim_->next_time()), std::move(payload)};
}

ReplyMessage LiveSession::hello() const {
  json reference = json::array();
  for (int i = 0; i < kPathUpdateSamples; ++i) {
    const double s = (i == kPathUpdateSamples - 1) ? 1.0 : static_cast<double>(i) / (kPathUpdateSamples - 1);
    reference.push_back(vec_json(scenario_.path.at(s).position));
  }
  json deformed = json::array();
  for (const PathSample& p : sample_deformed_path(sim_->deformation(), scenario_.path, kPathUpdateSamples)) {
    deformed.push_back({p.s, p.position.x(), p.position.y(), p.position.z()});
  }
  ReplyMessage r;
  r.kind = ReplyKind::kHello;
  r.payload = {{"dof", scenario_.model.dof()},
               {"sample_rate", scenario_.sample_rate},
               {"tick_stride", stride_},
               {"force_limit", scenario_.force_limit},
               {"theta_tau", sim_->scenario().detection.theta_tau},
               {"reference_path", reference},
               {"deformed_path", deformed},
               {"t", sim_->next_time()},
               {"paused", paused_},
               {"description", scenario_.description}};
  return r;
}

TelemetryMessage LiveSession::path_update() {
  json samples = json::array();
  for (const PathSample& p : sample_deformed_path(sim_->deformation(), scenario_.path, kPathUpdateSamples)) {
    samples.push_back({p.s, p.position.x(), p.position.y(), p.position.z()});
  }
  json bumps = json::array();
  for (const BumpRecord& b : sim_->deformation().bumps()) bumps.push_back(bump_to_json(b));
  return make(TelemetryKind::kPathUpdate, {{"samples", samples}, {"bumps", bumps}});
}

ReplyMessage LiveSession::apply(const QueuedCommand& q, SessionOutput& out) {
  const CommandMessage& cmd = q.command;
  ReplyMessage reply;
  reply.kind = ReplyKind::kAck;
  reply.id = cmd.id;
  reply.command = to_string(cmd.kind);
  try {
    switch (cmd.kind) {
      case CommandKind::kApplyPush: {
        if (!(cmd.push.duration > 0.0)) throw ValidationError("push duration must be positive");
        GroundTruthContact c;
        c.link = cmd.push.link;
        c.s = cmd.push.s;
        c.force = cmd.push.force;
        c.profile = ForceProfile::kConstant;
        c.t_start = sim_->next_time();
        c.t_end = c.t_start + cmd.push.duration;
        sim_->add_contact(c);
        injected_.push_back(c);
        reply.payload = {{"t_start", c.t_start}, {"t_end", c.t_end}};
        break;
      }
      case CommandKind::kPause:
        paused_ = true;
        break;
      case CommandKind::kResume:
        paused_ = false;
        break;
      case CommandKind::kReset:
        sim_ = std::make_unique<Simulation>(scenario_, keep_ticks_);
        sim_->set_unbounded(true);
        injected_.clear();
        last_contact_ = false;
        windows_seen_ = 0;
        episodes_ = gated_ = 0;
        mae_sum_ = 0.0;
        out.telemetry.push_back(path_update());
        break;
      case CommandKind::kSetConfig: {
        // Validate every block before touching the simulation.
        DetectionConfig det = sim_->scenario().detection;
        EstimationConfig est = sim_->scenario().estimation;
        PlannerConfig plan = sim_->scenario().planner;
        if (cmd.config.contains("detection")) apply_detection_patch(det, cmd.config["detection"]);
        if (cmd.config.contains("estimation")) apply_estimation_patch(est, cmd.config["estimation"]);
        if (cmd.config.contains("planner")) apply_planner_patch(plan, cmd.config["planner"]);
        det.validate(scenario_.model.dof());
        est.validate();
        plan.validate();
        sim_->set_detection_config(det);
        sim_->set_estimation_config(est);
        sim_->set_planner_config(plan);
        break;
      }
    }
  } catch (const std::exception& e) {
    reply.kind = ReplyKind::kError;
    reply.message = e.what();
    reply.payload = json::object();
  }
  return reply;
}

void LiveSession::step(SessionOutput& out) {
  if (!sim_->step()) return;
  const TickRecord& r = sim_->last_tick();
  if (r.contact != last_contact_) {
    if (r.contact) ++episodes_;
    out.telemetry.push_back(make(TelemetryKind::kDetection,
                                 {{"k", r.k},
                                  {"contact", r.contact},
                                  {"eta_bar", r.eta_bar},
                                  {"link", r.link > 0 ? json(r.link) : json(nullptr)}},
                                 r.t));
    last_contact_ = r.contact;
  }
  const auto& windows = sim_->windows();
  for (; windows_seen_ < windows.size(); ++windows_seen_) {
    const WindowRecord& w = windows[windows_seen_];
    if (w.estimate) {
      out.telemetry.push_back(make(TelemetryKind::kEstimate, {{"window", w.index},
                                                              {"gated", w.gated},
                                                              {"estimate", estimate_to_json(*w.estimate)}},
                                   r.t));
    }
    if (w.gated) {
      ++gated_;
      mae_sum_ += w.estimate->torque_mae;
    }
    if (w.outcome == CommitOutcome::kCommitted) {
      const BumpRecord& b = sim_->deformation().bumps().back();
      json payload = bump_to_json(b);
      payload["deviation"] = vec_json(w.deviation);
      out.telemetry.push_back(make(TelemetryKind::kBump, payload, r.t));
      TelemetryMessage update = path_update();
      update.t = r.t;
      out.telemetry.push_back(std::move(update));
    }
  }
  if (r.k % stride_ == 0) {
    const FrameSet frames = forward_kinematics(scenario_.model, r.q);
    json pts = json::array({vec_json(Vec3(scenario_.model.base().translation()))});
    for (int j = 1; j <= scenario_.model.dof(); ++j) pts.push_back(vec_json(frames.origin(j)));
    pts.push_back(vec_json(frames.tip()));
    TelemetryMessage m = make(TelemetryKind::kTick, {{"k", r.k},
                                                     {"s_path", r.s_path},
                                                     {"q", vec_json(r.q)},
                                                     {"frames", pts},
                                                     {"tip", vec_json(r.tip)},
                                                     {"target", vec_json(r.target)},
                                                     {"eta_bar", r.eta_bar},
                                                     {"contact", r.contact},
                                                     {"link", r.link > 0 ? json(r.link) : json(nullptr)}},
                                 r.t);
    out.telemetry.push_back(std::move(m));
  }
  const long per_second = std::lround(scenario_.sample_rate);
  if (per_second > 0 && (r.k + 1) % per_second == 0) {
    out.telemetry.push_back(make(TelemetryKind::kMetrics,
                                 {{"ticks", r.k + 1},
                                  {"episodes", episodes_},
                                  {"bumps", sim_->deformation().bumps().size()},
                                  {"gated_windows", gated_},
                                  {"torque_mae", gated_ > 0 ? json(mae_sum_ / gated_) : json(nullptr)},
                                  {"aborted", sim_->aborted()}},
                                 r.t));
  }
}

SessionOutput LiveSession::tick(const std::vector<QueuedCommand>& commands) {
  SessionOutput out;
  for (const QueuedCommand& q : commands) out.replies.emplace_back(q.client, apply(q, out));
  if (!paused_) step(out);
  return out;
}

}  // namespace contactplan
