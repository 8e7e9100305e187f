#include "contactplan/force_estimation.hpp"

#include <algorithm>
#include <cmath>

#include "contactplan/brent.hpp"
#include "contactplan/errors.hpp"

namespace contactplan {
namespace {

ForceSolution project(Vec3 force, double f_max) {
  ForceSolution out{force, false};
  const double norm = force.norm();
  if (norm > f_max) {
    out.force = force * (f_max / norm);
    // rounding can leave the norm an ulp above the bound
    while (out.force.norm() > f_max) out.force *= std::nextafter(1.0, 0.0);
    out.clamped = true;
  }
  return out;
}

}  // namespace

void EstimationConfig::validate() const {
  if (!(lambda > 0.0)) throw ValidationError("estimation.lambda must be positive");
  if (!(f_max > 0.0)) throw ValidationError("estimation.f_max must be positive");
  if (grid_points < 2) throw ValidationError("estimation.grid_points must be at least 2");
  if (!(brent_tol > 0.0)) throw ValidationError("estimation.brent_tol must be positive");
  if (window_n < 1) throw ValidationError("estimation.window_n must be at least 1");
}

ForceSolution closed_form_force(const MatX& stacked_jt, const VecX& stacked_tau, double lambda,
                                double f_max) {
  if (stacked_jt.cols() != 3 || stacked_jt.rows() != stacked_tau.size()) {
    throw ConfigurationError("stacked Jacobian must be (N*n) x 3 and match the residual stack");
  }
  if (stacked_jt.rows() == 0) throw ArgumentError("force solve needs at least one sample");
  if (!stacked_jt.allFinite() || !stacked_tau.allFinite()) {
    throw ArgumentError("force solve inputs must be finite");
  }
  return closed_form_force(Mat3(stacked_jt.transpose() * stacked_jt),
                           Vec3(stacked_jt.transpose() * stacked_tau), lambda, f_max);
}

ForceSolution closed_form_force(const Mat3& normal, const Vec3& rhs, double lambda, double f_max) {
  if (!(lambda > 0.0)) throw ArgumentError("damping factor must be positive");
  if (!(f_max > 0.0)) throw ArgumentError("force bound must be positive");
  if (!normal.allFinite() || !rhs.allFinite()) throw ArgumentError("force solve inputs must be finite");
  const Mat3 damped = normal + lambda * lambda * Mat3::Identity();
  return project(damped.ldlt().solve(rhs), f_max);
}

ReducedCost::ReducedCost(const RobotModel& model, std::span<const ResidualSample> samples,
                         int link, const EstimationConfig& config)
    : lambda_(config.lambda), f_max_(config.f_max) {
  config.validate();
  if (samples.empty()) throw ArgumentError("contact estimation needs a nonempty window");
  if (link < 1 || link > model.dof()) {
    throw ArgumentError("link index " + std::to_string(link) + " outside the chain");
  }
  j_base_.reserve(samples.size());
  j_delta_.reserve(samples.size());
  tau_.reserve(samples.size());
  for (const ResidualSample& sample : samples) {
    model.check_dimension(sample.tau_hat, "tau_hat");
    if (!sample.tau_hat.allFinite()) throw ArgumentError("residual torques must be finite");
    const FrameSet frames = forward_kinematics(model, sample.q);
    Mat3X j0 = point_jacobian(model, frames, link, 0.0);
    Mat3X j1 = point_jacobian(model, frames, link, 1.0);
    Mat3X delta = j1 - j0;
    aa_ += j0 * j0.transpose();
    ab_ += j0 * delta.transpose();
    bb_ += delta * delta.transpose();
    a_tau_ += j0 * sample.tau_hat;
    b_tau_ += delta * sample.tau_hat;
    j_base_.push_back(std::move(j0));
    j_delta_.push_back(std::move(delta));
    tau_.push_back(sample.tau_hat);
  }
}

Mat3 ReducedCost::normal_matrix(double s) const {
  return aa_ + s * (ab_ + ab_.transpose()) + s * s * bb_;
}

Vec3 ReducedCost::normal_rhs(double s) const { return a_tau_ + s * b_tau_; }

ForceSolution ReducedCost::force_at(double s) const {
  return closed_form_force(normal_matrix(s), normal_rhs(s), lambda_, f_max_);
}

double ReducedCost::fit_cost(double s, const Vec3& force) const {
  double total = 0.0;
  for (std::size_t k = 0; k < tau_.size(); ++k) {
    total += (tau_[k] - jacobian(k, s).transpose() * force).squaredNorm();
  }
  return 0.5 * total;
}

double ReducedCost::regularized_cost(double s, const Vec3& force) const {
  return fit_cost(s, force) + 0.5 * lambda_ * lambda_ * force.squaredNorm();
}

double ReducedCost::operator()(double s) const { return fit_cost(s, force_at(s).force); }

MatX ReducedCost::stacked_jt(double s) const {
  const auto n = tau_.front().size();
  MatX out(static_cast<Eigen::Index>(tau_.size()) * n, 3);
  for (std::size_t k = 0; k < tau_.size(); ++k) {
    out.middleRows(static_cast<Eigen::Index>(k) * n, n) = jacobian(k, s).transpose();
  }
  return out;
}

VecX ReducedCost::stacked_tau() const {
  const auto n = tau_.front().size();
  VecX out(static_cast<Eigen::Index>(tau_.size()) * n);
  for (std::size_t k = 0; k < tau_.size(); ++k) {
    out.segment(static_cast<Eigen::Index>(k) * n, n) = tau_[k];
  }
  return out;
}

double ReducedCost::torque_mae(double s, const Vec3& force) const {
  double total = 0.0;
  Eigen::Index count = 0;
  for (std::size_t k = 0; k < tau_.size(); ++k) {
    total += (tau_[k] - jacobian(k, s).transpose() * force).cwiseAbs().sum();
    count += tau_[k].size();
  }
  return total / static_cast<double>(count);
}

double reduced_cost(double s, std::span<const ResidualSample> samples, const RobotModel& model,
                    int link, const EstimationConfig& config) {
  if (!(s >= 0.0 && s <= 1.0)) throw ArgumentError("arc length s must lie in [0, 1]");
  return ReducedCost(model, samples, link, config)(s);
}

ContactEstimate estimate_contact(std::span<const ResidualSample> samples, int link,
                                 const RobotModel& model, const EstimationConfig& config) {
  const ReducedCost cost(model, samples, link, config);

  const int grid = config.grid_points;
  std::vector<double> values(grid);
  for (int i = 0; i < grid; ++i) values[i] = cost(static_cast<double>(i) / (grid - 1));
  const auto best_it = std::min_element(values.begin(), values.end());
  const int best = static_cast<int>(best_it - values.begin());
  const double worst = *std::max_element(values.begin(), values.end());

  ContactEstimate est;
  est.link = link;
  est.samples = static_cast<int>(samples.size());
  est.t_first = samples.front().t;
  est.t_last = samples.back().t;

  if (worst - *best_it <= 1e-12 * std::max(1.0, worst)) {
    est.unidentifiable = true;
    est.s_hat = 0.5;
  } else {
    const auto f = [&cost](double s) { return cost(s); };
    const double h = 1.0 / (grid - 1);
    const double s_best = best * h;
    ScalarMinimum refined;
    if (best > 0 && best < grid - 1) {
      refined = brent_minimize(f, s_best - h, s_best, s_best + h, config.brent_tol);
    } else if (best == 0) {
      refined = brent_minimize_bounded(f, 0.0, h, config.brent_tol);
    } else {
      refined = brent_minimize_bounded(f, 1.0 - h, 1.0, config.brent_tol);
    }
    est.s_hat = refined.fx <= *best_it ? std::clamp(refined.x, 0.0, 1.0) : s_best;
  }

  const ForceSolution sol = cost.force_at(est.s_hat);
  est.force = sol.force;
  est.clamped = sol.clamped;
  est.cost = cost.fit_cost(est.s_hat, sol.force);
  est.torque_mae = cost.torque_mae(est.s_hat, sol.force);
  est.point = forward_kinematics(model, samples.back().q).contact_point(link, est.s_hat);

  Eigen::SelfAdjointEigenSolver<Mat3> eig(cost.normal_matrix(est.s_hat));
  const Vec3 sv = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  est.singular_ratio = sv.maxCoeff() > 0.0 ? sv.minCoeff() / sv.maxCoeff() : 0.0;
  est.low_observability = est.singular_ratio < kLowObservabilityRatio;
  return est;
}

}  // namespace contactplan
