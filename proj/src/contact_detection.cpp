#include "contactplan/contact_detection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "contactplan/errors.hpp"

namespace contactplan {

void DetectionConfig::validate(int dof) const {
  if (weights.size() != 0) {
    if (weights.size() != dof) {
      throw ValidationError("detection.weights must have one entry per joint");
    }
    if (!(weights.array() > 0.0).all() || !weights.allFinite()) {
      throw ValidationError("detection.weights must be positive");
    }
  }
  if (!(alpha_ewma > 0.0 && alpha_ewma <= 1.0)) {
    throw ValidationError("detection.alpha_ewma must lie in (0, 1]");
  }
  if (!(theta_tau > 0.0)) throw ValidationError("detection.theta_tau must be positive");
  if (n_on < 1) throw ValidationError("detection.n_on must be at least 1");
  if (n_off < 1) throw ValidationError("detection.n_off must be at least 1");
  if (!(tau_th > 0.0)) throw ValidationError("detection.tau_th must be positive");
}

VecX compute_residual(const VecX& tau_meas, const VecX& tau_model) {
  if (tau_meas.size() != tau_model.size()) {
    throw ConfigurationError("residual: measured and model torques differ in length (" +
                             std::to_string(tau_meas.size()) + " vs " +
                             std::to_string(tau_model.size()) + ")");
  }
  return tau_meas - tau_model;
}

double detection_statistic(const VecX& tau_hat, const DetectionConfig& config) {
  if (config.weights.size() == 0) return tau_hat.norm();
  if (config.weights.size() != tau_hat.size()) {
    throw ConfigurationError("detection weights do not match the residual length");
  }
  return config.weights.cwiseProduct(tau_hat).norm();
}

double ewma_update(double eta, double eta_bar_prev, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ArgumentError("EWMA factor must lie in (0, 1]");
  return alpha * eta + (1.0 - alpha) * eta_bar_prev;
}

DetectionState hysteresis_update(DetectionState state, double eta_bar_new,
                                 const DetectionConfig& config) {
  const std::size_t keep = static_cast<std::size_t>(std::max(config.n_on, config.n_off));
  state.eta_bar = eta_bar_new;
  state.history.push_back(eta_bar_new);
  while (state.history.size() > keep) state.history.pop_front();

  const auto recent = [&](int count) {
    return std::make_pair(state.history.end() - count, state.history.end());
  };
  const int available = static_cast<int>(state.history.size());
  if (available >= config.n_on) {
    auto [b, e] = recent(config.n_on);
    if (*std::min_element(b, e) >= config.theta_tau) {
      state.contact = true;
      return state;
    }
  }
  if (available >= config.n_off) {
    auto [b, e] = recent(config.n_off);
    if (*std::max_element(b, e) <= config.theta_tau) {
      state.contact = false;
    }
  }
  return state;
}

Localization localize_link(const VecX& tau_hat, double tau_th) {
  const int n = static_cast<int>(tau_hat.size());
  Localization out;
  if (n == 0) return out;
  const auto meaningful = [&](int j) { return std::abs(tau_hat[j - 1]) > tau_th; };

  if (meaningful(n)) {
    out.link = n;
  } else {
    for (int j = n - 1; j >= 1; --j) {
      if (meaningful(j) && !meaningful(j + 1)) {
        out.link = j;
        break;
      }
    }
  }
  if (out.link) {
    for (int j = 1; j < *out.link; ++j) {
      if (!meaningful(j)) {
        out.noncontiguous = true;
        break;
      }
    }
  }
  return out;
}

ContactDetector::ContactDetector(DetectionConfig config, int dof)
    : config_(std::move(config)), dof_(dof) {
  config_.validate(dof_);
}

void ContactDetector::set_config(DetectionConfig config) {
  config.validate(dof_);
  config_ = std::move(config);
}

DetectionStep ContactDetector::update(const VecX& tau_hat) {
  if (tau_hat.size() != dof_) throw ConfigurationError("residual length does not match robot");
  DetectionStep step;
  step.eta = detection_statistic(tau_hat, config_);
  const bool was = state_.contact;
  const double smoothed = ewma_update(step.eta, state_.eta_bar, config_.alpha_ewma);
  state_ = hysteresis_update(std::move(state_), smoothed, config_);
  step.eta_bar = state_.eta_bar;
  step.contact = state_.contact;
  step.rising = !was && state_.contact;
  step.falling = was && !state_.contact;
  return step;
}

void ContactDetector::reset() { state_ = DetectionState{}; }

AccelerationFilter::AccelerationFilter(int dof, double sample_rate, double cutoff_hz)
    : dt_(1.0 / sample_rate) {
  if (!(sample_rate > 0.0)) throw ArgumentError("sample rate must be positive");
  if (!(cutoff_hz > 0.0 && cutoff_hz < 0.5 * sample_rate)) {
    throw ArgumentError("filter cutoff must lie below the Nyquist frequency");
  }
  const double k = std::tan(std::numbers::pi * cutoff_hz / sample_rate);
  const double q = std::numbers::sqrt2 / 2.0;
  const double norm = 1.0 / (1.0 + k / q + k * k);
  b0_ = k * k * norm;
  b1_ = 2.0 * b0_;
  b2_ = b0_;
  a1_ = 2.0 * (k * k - 1.0) * norm;
  a2_ = (1.0 - k / q + k * k) * norm;
  prev_qd_ = VecX::Zero(dof);
  reset();
}

void AccelerationFilter::reset() {
  primed_ = false;
  const auto n = prev_qd_.size();
  x1_ = x2_ = y1_ = y2_ = VecX::Zero(n);
}

VecX AccelerationFilter::update(const VecX& qd) {
  if (qd.size() != prev_qd_.size()) throw ConfigurationError("qd length does not match filter");
  if (!primed_) {
    prev_qd_ = qd;
    primed_ = true;
    return VecX::Zero(qd.size());
  }
  const VecX raw = (qd - prev_qd_) / dt_;
  prev_qd_ = qd;
  const VecX y = b0_ * raw + b1_ * x1_ + b2_ * x2_ - a1_ * y1_ - a2_ * y2_;
  x2_ = x1_;
  x1_ = raw;
  y2_ = y1_;
  y1_ = y;
  return y;
}

}  // namespace contactplan
