#include <doctest.h>

#include <cmath>
#include <random>

#include "contactplan/contact_detection.hpp"
#include "contactplan/errors.hpp"
#include "oracles.hpp"

using namespace contactplan;

namespace {

VecX vec(std::initializer_list<double> v) {
  VecX out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

DetectionConfig config(int n_on, int n_off, double theta) {
  DetectionConfig c;
  c.n_on = n_on;
  c.n_off = n_off;
  c.theta_tau = theta;
  return c;
}

std::vector<bool> feed(const std::vector<double>& seq, const DetectionConfig& c) {
  DetectionState s;
  std::vector<bool> out;
  for (double v : seq) {
    s = hysteresis_update(s, v, c);
    out.push_back(s.contact);
  }
  return out;
}

}  // namespace

TEST_CASE("residual") {
  const VecX a = vec({1.0, 2.0, 3.0});
  CHECK(compute_residual(a, a).norm() == 0.0);
  CHECK(compute_residual(a, vec({0.5, 2.5, 3.0})) == vec({0.5, -0.5, 0.0}));
  CHECK_THROWS_AS(compute_residual(a, vec({1.0})), ConfigurationError);

  std::mt19937_64 rng(1);
  const RobotModel m = oracle::random_chain(4, rng);
  const VecX q = oracle::random_vector(4, rng, 1.0);
  const VecX tau_model = inverse_dynamics(m, q, q, q);
  const VecX jtf = external_torque_from_force(m, q, 3, 0.4, Vec3(1, -2, 3));
  CHECK((compute_residual(tau_model + jtf, tau_model) - jtf).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("detection statistic") {
  DetectionConfig c;
  CHECK(detection_statistic(VecX::Zero(7), c) == 0.0);
  CHECK(detection_statistic(vec({3, 4, 0, 0, 0, 0, 0}), c) == 5.0);

  std::mt19937_64 rng(2);
  c.weights = VecX::Constant(7, 1.0) + oracle::random_vector(7, rng, 0.5).cwiseAbs();
  DetectionConfig scaled = c;
  scaled.weights *= 2.5;
  for (int i = 0; i < 100; ++i) {
    const VecX a = oracle::random_vector(7, rng, 3.0);
    const VecX b = oracle::random_vector(7, rng, 3.0);
    const double k = oracle::uniform(rng, -4, 4);
    CHECK(detection_statistic(a + b, c) <= detection_statistic(a, c) + detection_statistic(b, c) + 1e-12);
    CHECK(detection_statistic(k * a, c) == doctest::Approx(std::abs(k) * detection_statistic(a, c)).epsilon(1e-13));
    CHECK(detection_statistic(a, scaled) == doctest::Approx(2.5 * detection_statistic(a, c)).epsilon(1e-13));
  }
  c.weights = VecX::Constant(3, 1.0);
  CHECK_THROWS(detection_statistic(VecX::Zero(7), c));
}

TEST_CASE("EWMA") {
  CHECK(ewma_update(3.7, 1.0, 1.0) == 3.7);
  CHECK(ewma_update(2.0, 0.0, 0.5) == 1.0);
  CHECK_THROWS_AS(ewma_update(1.0, 0.0, 0.0), ArgumentError);

  const double alpha = 0.2, c = 1.7;
  double y = 0.0;
  for (int k = 1; k <= 60; ++k) {
    y = ewma_update(c, y, alpha);
    CHECK(y == doctest::Approx(c * (1 - std::pow(1 - alpha, k))).epsilon(1e-12));
  }

  std::mt19937_64 rng(3);
  double lo = 0.5, hi = 0.5;
  y = 0.5;
  for (int k = 0; k < 500; ++k) {
    const double x = oracle::uniform(rng, -2, 5);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    y = ewma_update(x, y, 0.3);
    CHECK(y >= lo);
    CHECK(y <= hi);
  }
}

TEST_CASE("hysteresis") {
  SUBCASE("switches on after n_on samples above threshold") {
    const auto c = feed({1.2, 1.3, 1.1}, config(3, 3, 1.0));
    CHECK(c == std::vector<bool>{false, false, true});
  }
  SUBCASE("oscillation around the threshold never switches on") {
    const auto c = feed({0.9, 1.1, 0.9, 1.1, 0.9, 1.1}, config(2, 2, 1.0));
    for (bool v : c) CHECK_FALSE(v);
  }
  SUBCASE("values exactly at threshold switch on") {
    const auto c = feed({1.0, 1.0, 1.0}, config(3, 3, 1.0));
    CHECK(c.back());
  }
  SUBCASE("switches off after n_off samples at or below threshold") {
    const auto c = feed({2, 2, 2, 0.5, 0.5, 1.0, 0.5}, config(3, 4, 1.0));
    CHECK(c == std::vector<bool>{false, false, true, true, true, true, false});
  }
  SUBCASE("history bounded") {
    DetectionState s;
    const DetectionConfig c = config(3, 8, 1.0);
    for (int i = 0; i < 100; ++i) s = hysteresis_update(s, 0.1 * i, c);
    CHECK(s.history.size() == 8);
  }
  SUBCASE("no chattering on random input") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      const int n_on = 1 + static_cast<int>(rng() % 6);
      const int n_off = 1 + static_cast<int>(rng() % 10);
      const DetectionConfig c = config(n_on, n_off, 1.0);
      std::vector<double> seq;
      for (int i = 0; i < 2000; ++i) seq.push_back(oracle::uniform(rng, 0.0, 2.0));
      const auto flags = feed(seq, c);
      long last = -1000000;
      bool prev = false;
      for (long i = 0; i < static_cast<long>(flags.size()); ++i) {
        if (flags[i] != prev) {
          CHECK(i - last >= std::min(n_on, n_off));
          last = i;
          prev = flags[i];
        }
      }
    }
  }
}

TEST_CASE("contact detector") {
  DetectionConfig c;
  ContactDetector det(c, 3);
  DetectionStep step;
  int on_at = -1;
  for (int k = 0; k < 40; ++k) {
    step = det.update(vec({3.0, 0.0, 0.0}));
    if (step.rising) on_at = k;
  }
  CHECK(step.contact);
  // 0.2 EWMA of a step of 3 crosses 1.0 on the second sample; 5 samples above.
  CHECK(on_at == 5);
  int off_at = -1;
  for (int k = 0; k < 60; ++k) {
    step = det.update(VecX::Zero(3));
    if (step.falling) off_at = k;
  }
  CHECK_FALSE(step.contact);
  CHECK(off_at >= c.n_off - 1);
  det.reset();
  CHECK(det.state().eta_bar == 0.0);
  CHECK_THROWS_AS(det.set_config(config(0, 3, 1.0)), ValidationError);
  CHECK_THROWS_AS(ContactDetector(c, 3).update(VecX::Zero(4)), ConfigurationError);
}

TEST_CASE("localization") {
  CHECK(*localize_link(vec({2.0, 1.5, 0.01, 0.0, 0.0, 0.0, 0.0}), 0.1).link == 2);
  CHECK(*localize_link(vec({2.0, 1.5, 0.01, 0.0, 0.0, 0.0, 0.4}), 0.1).link == 7);
  CHECK_FALSE(localize_link(vec({0.05, -0.09, 0.01, 0.0}), 0.1).link);
  // The successor exactly at threshold is negligible.
  CHECK(*localize_link(vec({1.0, 0.5, 0.1, 0.0}), 0.1).link == 2);
  // Non-contiguous residuals: the largest match wins and the sample is flagged.
  const Localization gap = localize_link(vec({1.0, 0.0, 0.8, 0.0}), 0.1);
  CHECK(*gap.link == 3);
  CHECK(gap.noncontiguous);
  CHECK_FALSE(localize_link(vec({1.0, 0.8, 0.0, 0.0}), 0.1).noncontiguous);
}

TEST_CASE("localization of generated contact torques") {
  std::mt19937_64 rng(5);
  const RobotModel m = load_chain(std::string(CONTACTPLAN_FIXTURE_DIR) + "/robots/franka_like.json");
  const double tau_th = 0.3;
  int checked = 0;
  while (checked < 200) {
    const VecX q = oracle::random_vector(7, rng, 1.5);
    const int link = 1 + static_cast<int>(rng() % 7);
    const double s = oracle::uniform(rng, 0.1, 0.9);
    const Vec3 f = oracle::uniform(rng, 10, 40) * oracle::random_unit(rng);
    const VecX tau = external_torque_from_force(m, q, link, s, f);
    // Keep only cases where every proximal joint sees a clear moment.
    if (tau.head(link).cwiseAbs().minCoeff() <= tau_th) continue;
    ++checked;
    CHECK(*localize_link(tau, tau_th).link == link);
  }
}

TEST_CASE("acceleration filter") {
  AccelerationFilter f(1, 1000.0, 20.0);
  VecX qd(1);
  VecX a;
  // Constant acceleration 2 rad/s^2: the filtered estimate settles on it.
  for (int k = 0; k < 2000; ++k) {
    qd << 2.0 * k * 1e-3;
    a = f.update(qd);
  }
  CHECK(a[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK_THROWS_AS(AccelerationFilter(1, 1000.0, 600.0), ArgumentError);
}
