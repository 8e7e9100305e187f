#include "contactplan/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "contactplan/errors.hpp"

namespace contactplan {

namespace {

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

// Moves q until the tip sits on `goal`. Damped Newton steps on position only.
VecX settle(const RobotModel& model, VecX q, const Vec3& goal, double damping) {
  for (int i = 0; i < 5000; ++i) {
    const Vec3 err = goal - forward_kinematics(model, q).tip();
    if (err.norm() < 1e-10) return q;
    q = resolved_rate_step(model, q, 0.5 * err, damping, 1.0);
  }
  const double residual = (goal - forward_kinematics(model, q).tip()).norm();
  if (residual > 1e-6) throw ValidationError("robot.q0: the tip cannot reach the start of the path");
  return q;
}

}  // namespace

ContactPipeline::ContactPipeline(RobotModel model, DetectionConfig detection,
                                 EstimationConfig estimation, int window_ticks)
    : model_(std::move(model)),
      detector_(std::move(detection), model_.dof()),
      estimation_(estimation),
      window_ticks_(window_ticks) {
  estimation_.validate();
  if (window_ticks_ < 1) throw ArgumentError("window length must be at least one tick");
}

void ContactPipeline::set_estimation_config(EstimationConfig config) {
  config.validate();
  estimation_ = config;
}

void ContactPipeline::set_window_ticks(int window_ticks) {
  if (window_ticks < 1) throw ArgumentError("window length must be at least one tick");
  window_ticks_ = window_ticks;
}

ContactPipeline::Step ContactPipeline::add_sample(const ResidualSample& sample) {
  Step out;
  out.detection = detector_.update(sample.tau_hat);
  out.localization = localize_link(sample.tau_hat, detector_.config().tau_th);

  if (out.detection.contact) {
    ++window_contact_;
    if (out.localization.link) {
      buffer_.push_back({sample, *out.localization.link, ticks_});
      const std::size_t cap = 4 * static_cast<std::size_t>(std::max(window_ticks_, estimation_.window_n));
      while (buffer_.size() > cap) buffer_.pop_front();
    }
  }
  if (out.detection.falling) {
    buffer_.clear();
    window_falling_ = true;
  }

  ++ticks_;
  if (ticks_ - window_start_ >= window_ticks_) {
    WindowReport report;
    report.index = window_index_++;
    report.t_end = sample.t;
    report.contact_fraction = static_cast<double>(window_contact_) / window_ticks_;
    report.episode_ended = window_falling_;
    report.estimate = estimate_window();
    out.window = std::move(report);
    window_contact_ = 0;
    window_falling_ = false;
    window_start_ = ticks_;
  }
  return out;
}

std::optional<ContactEstimate> ContactPipeline::estimate_window() const {
  // Modal link among this window's samples; ties go to the more distal link.
  std::map<int, int> counts;
  for (const Buffered& b : buffer_) {
    if (b.tick >= window_start_) ++counts[b.link];
  }
  if (counts.empty()) return std::nullopt;
  int link = 0, best = 0;
  for (const auto& [l, c] : counts) {
    if (c >= best) {
      best = c;
      link = l;
    }
  }
  std::vector<ResidualSample> samples;
  for (auto it = buffer_.rbegin(); it != buffer_.rend(); ++it) {
    if (it->link != link) continue;
    samples.push_back(it->sample);
    if (static_cast<int>(samples.size()) == estimation_.window_n) break;
  }
  if (static_cast<int>(samples.size()) < kMinEstimateSamples) return std::nullopt;
  std::reverse(samples.begin(), samples.end());
  return estimate_contact(samples, link, model_, estimation_);
}

Simulation::Simulation(const Scenario& scenario, bool keep_ticks)
    : scenario_(scenario),
      true_model_(scenario.model.with_mass_scale(1.0 + scenario.noise.mass_scale_error)),
      pipeline_(scenario.model, scenario.detection, scenario.estimation, scenario.planner.window_n_d),
      rng_(scenario.seed),
      keep_ticks_(keep_ticks) {
  scenario_.validate();
  if (scenario_.qdd_source == AccelerationSource::kFiltered) {
    filter_.emplace(scenario_.model.dof(), scenario_.sample_rate, scenario_.qdd_cutoff_hz);
  }
  trace_.contacts = scenario_.contacts;
  path_length_ = scenario_.path.length();
  q_ = settle(scenario_.model, scenario_.tracking.q0, scenario_.path.at(0.0).position,
              scenario_.tracking.ik_damping);
  q_prev_ = q_;
  qd_prev_ = VecX::Zero(q_.size());
  if (keep_ticks_) trace_.ticks.reserve(static_cast<std::size_t>(scenario_.tick_count()));
}

bool Simulation::finished() const {
  if (trace_.aborted) return true;
  return !unbounded_ && k_ >= scenario_.tick_count();
}

void Simulation::add_contact(const GroundTruthContact& contact) {
  validate_contact(contact, scenario_.model, scenario_.force_limit);
  if (contact.t_start < next_time()) throw ArgumentError("contact cannot start in the past");
  trace_.contacts.push_back(contact);
}

void Simulation::set_detection_config(const DetectionConfig& config) {
  config.validate(scenario_.model.dof());
  scenario_.detection = config;
  pipeline_.set_detection_config(config);
}

void Simulation::set_estimation_config(const EstimationConfig& config) {
  pipeline_.set_estimation_config(config);
  scenario_.estimation = config;
}

void Simulation::set_planner_config(const PlannerConfig& config) {
  config.validate();
  scenario_.planner = config;
  pipeline_.set_window_ticks(config.window_n_d);
}

Vec3 Simulation::path_tangent(double s) const {
  constexpr double h = 1e-4;
  const double a = std::max(0.0, s - h);
  const double b = std::min(1.0, s + h);
  return (evaluate_path(trace_.deformation, scenario_.path, b).position -
          evaluate_path(trace_.deformation, scenario_.path, a).position) /
         (b - a);
}

double Simulation::advance_path(double dt) const {
  if (s_ >= 1.0) return 1.0;
  const TrackingConfig& tr = scenario_.tracking;
  const double t = next_time();
  const double v_max = scenario_.planner.tip_speed;
  double v = v_max * std::max(smoothstep(t / tr.ramp_time), 0.02);
  const double tangent = path_tangent(s_).norm();
  if (!(tangent > 1e-12)) return 1.0;
  // Brake so the tip arrives at the goal without a velocity step.
  const double remaining = (1.0 - s_) * tangent;
  v = std::min(v, std::sqrt(2.0 * (v_max / tr.ramp_time) * remaining));
  const double s_next = s_ + v * dt / tangent;
  return (s_next >= 1.0 || remaining < 1e-9) ? 1.0 : s_next;
}

bool Simulation::step() {
  if (finished()) return false;
  const double dt = scenario_.dt();
  const double t = next_time();
  const RobotModel& model = scenario_.model;

  TickRecord rec;
  rec.k = k_;
  rec.t = t;
  rec.s_path = s_;
  rec.q = q_;
  rec.qd = (q_ - q_prev_) / dt;
  const VecX qdd_exact = (rec.qd - qd_prev_) / dt;
  rec.qdd = filter_ ? filter_->update(rec.qd) : qdd_exact;

  std::vector<AppliedForce> applied;
  for (const GroundTruthContact& c : trace_.contacts) {
    if (c.active(t)) applied.push_back({c.link, c.s, c.force_at(t)});
  }
  rec.tau_meas = simulate_measured_torque(true_model_, rec.q, rec.qd, qdd_exact, applied,
                                          scenario_.noise.sigma, rng_);
  rec.tau_model = inverse_dynamics(model, rec.q, rec.qd, rec.qdd);
  rec.tau_hat = compute_residual(rec.tau_meas, rec.tau_model);

  const ContactPipeline::Step ps = pipeline_.add_sample({t, rec.q, rec.qd, rec.qdd, rec.tau_hat});
  rec.eta = ps.detection.eta;
  rec.eta_bar = ps.detection.eta_bar;
  rec.contact = ps.detection.contact;
  rec.link = (ps.detection.contact && ps.localization.link) ? *ps.localization.link : 0;

  const Pose target = evaluate_path(trace_.deformation, scenario_.path, s_);
  rec.target = target.position;
  rec.tip = forward_kinematics(model, q_).tip();

  if (ps.window) {
    const ContactPipeline::WindowReport& w = *ps.window;
    WindowRecord win;
    win.index = w.index;
    win.tick_end = k_;
    win.t_end = w.t_end;
    win.contact_fraction = w.contact_fraction;
    win.estimate = w.estimate;
    win.summary.index = w.index;
    win.summary.s_next = s_;
    win.summary.contact_fraction = w.contact_fraction;
    const bool enough_contact = w.contact_fraction >= scenario_.planner.min_contact_fraction;
    win.gated = enough_contact && w.estimate.has_value();
    if (win.gated) {
      win.summary.f_bar = w.estimate->force;
      win.summary.f_hat = w.estimate->force;
    }
    if (win.gated || !enough_contact) {
      CommitResult cr = commit_window(trace_.deformation, win.summary, scenario_.planner);
      trace_.deformation = std::move(cr.state);
      win.outcome = cr.outcome;
      win.deviation = cr.deviation;
      win.increment = cr.increment;
      win.horizon = cr.horizon;
    }
    if (w.episode_ended) {
      trace_.deformation.reset_episode();
      win.episode_reset = true;
    }
    trace_.windows.push_back(std::move(win));
  }

  // Tracking: feedforward along the deformed path plus tip position feedback.
  const TrackingConfig& tr = scenario_.tracking;
  const double err = (rec.target - rec.tip).norm();
  error_time_ = err > tr.abort_error ? error_time_ + dt : 0.0;
  if (error_time_ > tr.abort_duration) {
    trace_.aborted = true;
    trace_.abort_reason = "path tracking lost: tip error " + std::to_string(err) + " m at t = " +
                          std::to_string(t) + " s";
  }

  const double s_next = advance_path(dt);
  const Vec3 next_target = evaluate_path(trace_.deformation, scenario_.path, s_next).position;
  const Vec3 v_cmd = (next_target - rec.target) / dt + tr.ik_gain * (rec.target - rec.tip);
  q_prev_ = q_;
  qd_prev_ = rec.qd;
  q_ = resolved_rate_step(model, q_, v_cmd, tr.ik_damping, dt);
  s_ = s_next;
  ++k_;

  if (keep_ticks_) trace_.ticks.push_back(rec);
  last_ = std::move(rec);
  return !trace_.aborted;
}

RunTrace Simulation::take_trace() {
  trace_.deformed_path = sample_deformed_path(trace_.deformation, scenario_.path, kDeformedPathSamples);
  return std::move(trace_);
}

RunTrace run(const Scenario& scenario) {
  Simulation sim(scenario);
  while (sim.step()) {
  }
  return sim.take_trace();
}

}  // namespace contactplan
