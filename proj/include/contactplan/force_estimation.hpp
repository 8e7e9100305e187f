#pragma once

#include <span>
#include <vector>

#include "contactplan/contact_detection.hpp"
#include "contactplan/robot_model.hpp"

namespace contactplan {

struct EstimationConfig {
  double lambda = 0.05;    // damping, N*m per N
  double f_max = 60.0;     // N, admissible force magnitude
  int grid_points = 21;
  double brent_tol = 1e-4;  // in s units
  int window_n = 50;        // samples per estimate

  void validate() const;
};

struct ForceSolution {
  Vec3 force = Vec3::Zero();
  bool clamped = false;
};

// Damped least squares for one contact force over a stacked system.
// `stacked_jt` holds J_c(t_k)^T blocks one under another ((N*n) x 3), and
// `stacked_tau` the matching residuals. The unconstrained solution
// (J~^T J~ + lambda^2 I)^-1 J~^T tau~ is scaled back onto ||F|| <= f_max.
ForceSolution closed_form_force(const MatX& stacked_jt, const VecX& stacked_tau, double lambda,
                                double f_max);

// Same solve from accumulated normal equations (J~^T J~, J~^T tau~).
ForceSolution closed_form_force(const Mat3& normal, const Vec3& rhs, double lambda, double f_max);

struct ContactEstimate {
  int link = 0;  // 1-based
  double s_hat = 0.5;
  Vec3 force = Vec3::Zero();
  double cost = 0.0;        // (N*m)^2
  bool clamped = false;
  Vec3 point = Vec3::Zero();  // world contact point at the newest sample
  bool unidentifiable = false;     // flat cost over s (no excitation)
  bool low_observability = false;  // stacked Jacobian rank < 3
  double singular_ratio = 0.0;     // sigma_min / sigma_max of the stacked Jacobian
  double torque_mae = 0.0;         // mean |J^T F - tau_hat| over the fitted samples
  int samples = 0;
  double t_first = 0.0;
  double t_last = 0.0;
};

// Cost of a single contact at arc length s on one link, with the force
// eliminated by the damped closed-form solve. Precomputes the per-sample
// Jacobians at both centerline endpoints; J_c is affine in s.
class ReducedCost {
 public:
  ReducedCost(const RobotModel& model, std::span<const ResidualSample> samples, int link,
              const EstimationConfig& config);

  // 0.5 * sum_k || tau_k - J_k(s)^T F*(s) ||^2 with the projected F*(s).
  double operator()(double s) const;
  ForceSolution force_at(double s) const;
  double fit_cost(double s, const Vec3& force) const;
  // Fit cost plus 0.5 * lambda^2 ||F||^2.
  double regularized_cost(double s, const Vec3& force) const;
  // J~^T J~ at s.
  Mat3 normal_matrix(double s) const;
  Vec3 normal_rhs(double s) const;
  MatX stacked_jt(double s) const;
  VecX stacked_tau() const;
  double torque_mae(double s, const Vec3& force) const;

  std::size_t size() const { return tau_.size(); }

 private:
  Mat3X jacobian(std::size_t k, double s) const { return j_base_[k] + s * j_delta_[k]; }

  double lambda_;
  double f_max_;
  std::vector<Mat3X> j_base_;
  std::vector<Mat3X> j_delta_;
  std::vector<VecX> tau_;
  // Accumulated sums for the normal equations as polynomials in s.
  Mat3 aa_ = Mat3::Zero(), ab_ = Mat3::Zero(), bb_ = Mat3::Zero();
  Vec3 a_tau_ = Vec3::Zero(), b_tau_ = Vec3::Zero();
};

double reduced_cost(double s, std::span<const ResidualSample> samples, const RobotModel& model,
                    int link, const EstimationConfig& config);

// Grid search over s followed by Brent refinement in the best grid cell.
ContactEstimate estimate_contact(std::span<const ResidualSample> samples, int link,
                                 const RobotModel& model, const EstimationConfig& config);

inline constexpr double kLowObservabilityRatio = 1e-6;

}  // namespace contactplan
