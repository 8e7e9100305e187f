#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "contactplan/scenario.hpp"

namespace contactplan {

// Window bookkeeping on top of the detector: buffers localized contact
// samples and produces one estimate per planner window. Used unchanged by the
// online loop and the offline trace estimator.
class ContactPipeline {
 public:
  struct WindowReport {
    int index = 0;  // 0-based
    double t_end = 0.0;
    double contact_fraction = 0.0;
    std::optional<ContactEstimate> estimate;
    bool episode_ended = false;  // a falling edge happened inside the window
  };

  struct Step {
    DetectionStep detection;
    Localization localization;
    std::optional<WindowReport> window;
  };

  ContactPipeline(RobotModel model, DetectionConfig detection, EstimationConfig estimation,
                  int window_ticks);

  Step add_sample(const ResidualSample& sample);

  const DetectionConfig& detection_config() const { return detector_.config(); }
  const EstimationConfig& estimation_config() const { return estimation_; }
  void set_detection_config(DetectionConfig config) { detector_.set_config(std::move(config)); }
  void set_estimation_config(EstimationConfig config);
  void set_window_ticks(int window_ticks);

 private:
  struct Buffered {
    ResidualSample sample;
    int link = 0;
    long tick = 0;
  };

  std::optional<ContactEstimate> estimate_window() const;

  RobotModel model_;
  ContactDetector detector_;
  EstimationConfig estimation_;
  int window_ticks_;
  std::deque<Buffered> buffer_;  // contact samples of the current episode
  long ticks_ = 0;
  long window_start_ = 0;
  int window_index_ = 0;
  int window_contact_ = 0;
  bool window_falling_ = false;
};

// Minimum matching samples before a window estimate is attempted.
inline constexpr int kMinEstimateSamples = 10;

struct TickRecord {
  long k = 0;
  double t = 0.0;
  double s_path = 0.0;
  VecX q, qd, qdd;
  VecX tau_meas, tau_model, tau_hat;
  double eta = 0.0;
  double eta_bar = 0.0;
  bool contact = false;
  int link = 0;  // 0 when not localized
  Vec3 tip = Vec3::Zero();
  Vec3 target = Vec3::Zero();
};

struct WindowRecord {
  int index = 0;
  long tick_end = 0;
  double t_end = 0.0;
  double contact_fraction = 0.0;
  std::optional<ContactEstimate> estimate;
  bool gated = false;  // passed the contact-fraction gate and produced an estimate
  WindowSummary summary;
  std::optional<CommitOutcome> outcome;
  Vec3 deviation = Vec3::Zero();
  Vec3 increment = Vec3::Zero();
  double horizon = 0.0;
  bool episode_reset = false;
};

struct RunTrace {
  std::vector<TickRecord> ticks;
  std::vector<WindowRecord> windows;
  std::vector<GroundTruthContact> contacts;  // scripted plus injected
  DeformationState deformation;
  std::vector<PathSample> deformed_path;
  bool aborted = false;
  std::string abort_reason;
};

inline constexpr int kDeformedPathSamples = 201;

// Closed loop: kinematic path tracking, torque synthesis, detection,
// estimation and planning, one tick per call to step().
class Simulation {
 public:
  explicit Simulation(const Scenario& scenario, bool keep_ticks = true);

  // Advances one tick. Returns false once the run is finished or aborted.
  bool step();
  bool finished() const;
  bool aborted() const { return trace_.aborted; }
  // Ignore the scenario duration and keep ticking (live service).
  void set_unbounded(bool unbounded) { unbounded_ = unbounded; }

  // Adds a contact; it must not start before the next tick.
  void add_contact(const GroundTruthContact& contact);
  void set_detection_config(const DetectionConfig& config);
  void set_estimation_config(const EstimationConfig& config);
  void set_planner_config(const PlannerConfig& config);

  long next_tick() const { return k_; }
  double next_time() const { return static_cast<double>(k_) * scenario_.dt(); }
  const Scenario& scenario() const { return scenario_; }
  const TickRecord& last_tick() const { return last_; }
  const std::vector<WindowRecord>& windows() const { return trace_.windows; }
  const DeformationState& deformation() const { return trace_.deformation; }
  const RunTrace& trace() const { return trace_; }
  // Finalizes the deformed path samples and hands over the trace.
  RunTrace take_trace();

 private:
  double advance_path(double dt) const;
  Vec3 path_tangent(double s) const;

  Scenario scenario_;
  RobotModel true_model_;
  ContactPipeline pipeline_;
  std::optional<AccelerationFilter> filter_;
  Rng rng_;
  bool keep_ticks_;
  bool unbounded_ = false;

  long k_ = 0;
  double s_ = 0.0;
  double path_length_ = 0.0;
  VecX q_, q_prev_, qd_prev_;
  double error_time_ = 0.0;
  TickRecord last_;
  RunTrace trace_;
};

RunTrace run(const Scenario& scenario);

}  // namespace contactplan
