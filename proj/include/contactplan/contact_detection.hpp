#pragma once

#include <deque>
#include <optional>

#include "contactplan/robot_model.hpp"

namespace contactplan {

struct DetectionConfig {
  VecX weights;  // diagonal of W_tau; empty means identity
  double alpha_ewma = 0.2;
  double theta_tau = 1.0;  // N*m
  int n_on = 5;
  int n_off = 10;
  double tau_th = 0.3;  // N*m, localization threshold

  // Throws ValidationError. `dof` is used to check the weight length.
  void validate(int dof) const;
};

// One tick of joint state together with its residual torque.
struct ResidualSample {
  double t = 0.0;
  VecX q;
  VecX qd;
  VecX qdd;
  VecX tau_hat;
};

VecX compute_residual(const VecX& tau_meas, const VecX& tau_model);

// eta = || W tau_hat ||_2
double detection_statistic(const VecX& tau_hat, const DetectionConfig& config);

double ewma_update(double eta, double eta_bar_prev, double alpha);

struct DetectionState {
  double eta_bar = 0.0;
  bool contact = false;
  std::deque<double> history;  // most recent eta_bar last, at most max(n_on, n_off)
};

// Appends `eta_bar_new` to the history and applies the on/off hysteresis rule.
// The ON branch is evaluated first, so a run of values exactly at threshold
// switches contact on.
DetectionState hysteresis_update(DetectionState state, double eta_bar_new,
                                 const DetectionConfig& config);

struct Localization {
  std::optional<int> link;  // 1-based
  // Significant residuals are not a contiguous run from joint 1.
  bool noncontiguous = false;
};

// Last joint with a meaningful residual (|tau| > tau_th) whose successor is
// negligible; the last joint itself when its residual is meaningful.
Localization localize_link(const VecX& tau_hat, double tau_th);

struct DetectionStep {
  double eta = 0.0;
  double eta_bar = 0.0;
  bool contact = false;
  bool rising = false;
  bool falling = false;
};

// Stateful detector: statistic, EWMA smoothing and hysteresis for one robot.
class ContactDetector {
 public:
  ContactDetector(DetectionConfig config, int dof);

  DetectionStep update(const VecX& tau_hat);
  void reset();

  const DetectionState& state() const { return state_; }
  const DetectionConfig& config() const { return config_; }
  void set_config(DetectionConfig config);

 private:
  DetectionConfig config_;
  int dof_;
  DetectionState state_;
};

// Joint acceleration from sampled velocities: backward difference followed by
// a second-order Butterworth low-pass (bilinear transform, prewarped).
class AccelerationFilter {
 public:
  AccelerationFilter(int dof, double sample_rate, double cutoff_hz = 20.0);

  VecX update(const VecX& qd);
  void reset();

 private:
  double dt_;
  double b0_, b1_, b2_, a1_, a2_;
  bool primed_ = false;
  VecX prev_qd_;
  VecX x1_, x2_, y1_, y2_;
};

}  // namespace contactplan
