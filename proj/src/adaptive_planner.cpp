#include "contactplan/adaptive_planner.hpp"

#include <algorithm>

#include "contactplan/errors.hpp"

namespace contactplan {

void PlannerConfig::validate() const {
  if (!(alpha_gain > 0.0)) throw ValidationError("planner.alpha_gain must be positive");
  if (!(f_sat > 0.0)) throw ValidationError("planner.f_sat must be positive");
  if (!(beta > 0.0)) throw ValidationError("planner.beta must be positive");
  if (!(epsilon >= 0.0)) throw ValidationError("planner.epsilon must be non-negative");
  if (window_n_d < 1) throw ValidationError("planner.window_n_d must be at least 1");
  if (!(min_contact_fraction >= 0.0 && min_contact_fraction <= 1.0)) {
    throw ValidationError("planner.min_contact_fraction must lie in [0, 1]");
  }
  if (!(tip_speed > 0.0)) throw ValidationError("planner.tip_speed must be positive");
}

WindowAverage window_average(std::span<const Vec3> forces) {
  if (forces.empty()) throw ArgumentError("window average needs at least one force sample");
  Vec3 sum = Vec3::Zero();
  for (const Vec3& f : forces) sum += f;
  WindowAverage out;
  out.mean = sum / static_cast<double>(forces.size());
  const double norm = out.mean.norm();
  if (norm >= kZeroForce) out.direction = out.mean / norm;
  return out;
}

Vec3 target_deviation(const Vec3& f_bar, const PlannerConfig& config) {
  const double norm = f_bar.norm();
  if (norm < kZeroForce) return Vec3::Zero();
  return config.alpha_gain * std::min(norm, config.f_sat) * (f_bar / norm);
}

Vec3 incremental_update(const Vec3& delta, const Vec3& delta_prev, double epsilon) {
  const Vec3 inc = delta - delta_prev;
  if (inc.norm() <= epsilon) return Vec3::Zero();
  return inc;
}

double effective_horizon(const Vec3& f_bar, double s_next, double beta) {
  if (!(s_next >= 0.0 && s_next <= 1.0)) throw ArgumentError("s_next must lie in [0, 1]");
  return std::max(0.0, std::min(beta * f_bar.norm(), 1.0 - s_next));
}

double bump(double xi) {
  const double c = xi * (1.0 - xi);
  return 16.0 * c * c;
}

double bump_derivative(double xi) { return 32.0 * xi * (1.0 - xi) * (1.0 - 2.0 * xi); }

double xi_of_s(double s, double start, double horizon) {
  if (!(horizon > 0.0)) return 0.0;
  return std::clamp((s - start) / horizon, 0.0, 1.0);
}

const char* to_string(CommitOutcome outcome) {
  switch (outcome) {
    case CommitOutcome::kCommitted: return "committed";
    case CommitOutcome::kSkippedLowContact: return "skipped_low_contact";
    case CommitOutcome::kNoIncrement: return "no_increment";
    case CommitOutcome::kSkippedZeroHorizon: return "skipped_zero_horizon";
  }
  return "unknown";
}

Vec3 DeformationState::displacement(double s) const {
  Vec3 d = Vec3::Zero();
  for (const BumpRecord& b : bumps_) d += b.increment * bump(xi_of_s(s, b.start, b.horizon));
  return d;
}

Vec3 DeformationState::derivative(double s) const {
  Vec3 d = Vec3::Zero();
  for (const BumpRecord& b : bumps_) {
    if (s <= b.start || s >= b.start + b.horizon) continue;
    d += b.increment * (bump_derivative(xi_of_s(s, b.start, b.horizon)) / b.horizon);
  }
  return d;
}

CommitResult commit_window(const DeformationState& state, const WindowSummary& summary,
                           const PlannerConfig& config) {
  CommitResult out{state};
  if (summary.contact_fraction < config.min_contact_fraction) {
    out.outcome = CommitOutcome::kSkippedLowContact;
    return out;
  }
  out.deviation = target_deviation(summary.f_bar, config);
  out.increment = incremental_update(out.deviation, state.delta_prev_, config.epsilon);
  out.horizon = effective_horizon(summary.f_bar, summary.s_next, config.beta);
  out.state.delta_prev_ = out.deviation;

  if (out.increment.isZero(0.0)) {
    out.outcome = CommitOutcome::kNoIncrement;
  } else if (!(out.horizon > 0.0)) {
    out.outcome = CommitOutcome::kSkippedZeroHorizon;
  } else {
    out.state.bumps_.push_back({summary.index, summary.s_next, out.horizon, out.increment});
    out.outcome = CommitOutcome::kCommitted;
  }
  return out;
}

Pose evaluate_path(const DeformationState& state, const ReferencePath& path, double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw ArgumentError("path parameter must lie in [0, 1]");
  Pose pose = path.at(s);
  pose.position += state.displacement(s);
  return pose;
}

std::vector<PathSample> sample_deformed_path(const DeformationState& state,
                                             const ReferencePath& path, int count) {
  if (count < 2) throw ArgumentError("need at least two samples");
  std::vector<PathSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double s = (i == count - 1) ? 1.0 : static_cast<double>(i) / (count - 1);
    const Pose p = evaluate_path(state, path, s);
    out.push_back({s, p.position, p.orientation});
  }
  return out;
}

}  // namespace contactplan
