#pragma once

#include <optional>
#include <span>
#include <vector>

#include "contactplan/reference_path.hpp"

namespace contactplan {

struct PlannerConfig {
  double alpha_gain = 0.005;  // m/N
  double f_sat = 50.0;        // N
  double beta = 0.01;         // path-parameter units per N
  double epsilon = 0.005;     // m
  int window_n_d = 100;       // ticks per planner window
  double min_contact_fraction = 0.5;
  double tip_speed = 0.05;    // m/s along the deformed path

  void validate() const;
};

struct WindowSummary {
  int index = 0;
  Vec3 f_bar = Vec3::Zero();
  std::optional<Vec3> f_hat;
  double s_next = 0.0;
  double contact_fraction = 0.0;
};

struct WindowAverage {
  Vec3 mean = Vec3::Zero();
  std::optional<Vec3> direction;
};

inline constexpr double kZeroForce = 1e-9;  // N

WindowAverage window_average(std::span<const Vec3> forces);

// alpha * sat(||F||, f_sat) * F/||F||
Vec3 target_deviation(const Vec3& f_bar, const PlannerConfig& config);

// delta - delta_prev, or zero when its norm is within the deadband.
Vec3 incremental_update(const Vec3& delta, const Vec3& delta_prev, double epsilon);

// min(beta * ||F||, 1 - s_next)
double effective_horizon(const Vec3& f_bar, double s_next, double beta);

// 16 xi^2 (1 - xi)^2
double bump(double xi);
double bump_derivative(double xi);

// clamp((s - start) / horizon, 0, 1); zero for an empty horizon.
double xi_of_s(double s, double start, double horizon);

struct BumpRecord {
  int window = 0;
  double start = 0.0;
  double horizon = 0.0;
  Vec3 increment = Vec3::Zero();
};

enum class CommitOutcome {
  kCommitted,
  kSkippedLowContact,   // contact fraction below threshold
  kNoIncrement,         // increment inside the deadband
  kSkippedZeroHorizon,  // nonzero increment but nothing left of the path
};

const char* to_string(CommitOutcome outcome);

struct CommitResult;
class DeformationState;
CommitResult commit_window(const DeformationState& state, const WindowSummary& summary,
                           const PlannerConfig& config);

// Accumulated path deformation d(s) as a sum of bump records.
class DeformationState {
 public:
  const std::vector<BumpRecord>& bumps() const { return bumps_; }
  const Vec3& delta_prev() const { return delta_prev_; }

  Vec3 displacement(double s) const;
  Vec3 derivative(double s) const;

  // Contact episode ended: the next episode starts from a zero target.
  void reset_episode() { delta_prev_.setZero(); }

 private:
  friend CommitResult commit_window(const DeformationState&, const WindowSummary&,
                                    const PlannerConfig&);
  std::vector<BumpRecord> bumps_;
  Vec3 delta_prev_ = Vec3::Zero();
};

struct CommitResult {
  DeformationState state;
  CommitOutcome outcome = CommitOutcome::kNoIncrement;
  Vec3 deviation = Vec3::Zero();
  Vec3 increment = Vec3::Zero();
  double horizon = 0.0;
};

// x_d(s) + d(s); orientation from the reference.
Pose evaluate_path(const DeformationState& state, const ReferencePath& path, double s);

// Deformed path sampled on `count` evenly spaced s values.
std::vector<PathSample> sample_deformed_path(const DeformationState& state,
                                             const ReferencePath& path, int count);

}  // namespace contactplan
