#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "contactplan/errors.hpp"
#include "contactplan/robot_model.hpp"
#include "oracles.hpp"

using namespace contactplan;

namespace {

// Planar arm rotating about z with links along x.
RobotModel planar_arm(const std::vector<double>& lengths, Vec3 gravity = Vec3::Zero()) {
  std::vector<JointSpec> joints;
  std::vector<LinkSpec> links;
  double prev = 0.0;
  for (double l : lengths) {
    JointSpec j;
    j.axis = Vec3::UnitZ();
    j.origin.translation() = Vec3(prev, 0.0, 0.0);
    joints.push_back(j);
    LinkSpec link;
    link.mass = 1.0;
    link.com = Vec3(l / 2.0, 0.0, 0.0);
    link.inertia = Mat3::Identity() * 0.01;
    link.tip = Vec3(l, 0.0, 0.0);
    links.push_back(link);
    prev = l;
  }
  return RobotModel(joints, links, std::vector<FrictionSpec>(lengths.size()), gravity);
}

RobotModel fixture_chain() { return load_chain(std::string(CONTACTPLAN_FIXTURE_DIR) + "/robots/franka_like.json"); }

}  // namespace

TEST_CASE("one-link arm kinematics") {
  const RobotModel arm = planar_arm({0.5});
  VecX q(1);
  q << 0.0;
  CHECK((forward_kinematics(arm, q).tip() - Vec3(0.5, 0, 0)).norm() < 1e-15);
  q << std::numbers::pi / 2;
  CHECK((forward_kinematics(arm, q).tip() - Vec3(0, 0.5, 0)).norm() < 1e-15);

  q << 0.0;
  CHECK((point_jacobian(arm, q, 1, 1.0).col(0) - Vec3(0, 0.5, 0)).norm() < 1e-15);
  CHECK((point_jacobian(arm, q, 1, 0.5).col(0) - Vec3(0, 0.25, 0)).norm() < 1e-15);
  CHECK(external_torque_from_force(arm, q, 1, 1.0, Vec3(0, 10, 0))[0] == doctest::Approx(5.0).epsilon(1e-15));
  // Force along the link through the joint axis has no moment arm.
  CHECK(std::abs(external_torque_from_force(arm, q, 1, 0.7, Vec3(-8, 0, 0))[0]) < 1e-15);
}

TEST_CASE("forward kinematics is 2pi periodic in every joint") {
  std::mt19937_64 rng(3);
  const RobotModel m = oracle::random_chain(4, rng);
  const VecX q = oracle::random_vector(4, rng, 2.0);
  const FrameSet a = forward_kinematics(m, q);
  for (int j = 0; j < 4; ++j) {
    VecX q2 = q;
    q2[j] += 2 * std::numbers::pi;
    CHECK((forward_kinematics(m, q2).tip() - a.tip()).norm() < 1e-12);
  }
}

TEST_CASE("rigid links and orthonormal frames") {
  std::mt19937_64 rng(4);
  const RobotModel m = oracle::random_chain(5, rng);
  const FrameSet ref = forward_kinematics(m, VecX::Zero(5));
  for (int trial = 0; trial < 50; ++trial) {
    const FrameSet f = forward_kinematics(m, oracle::random_vector(5, rng, 3.0));
    for (int i = 0; i < 5; ++i) {
      CHECK(std::abs((f.link_tip[i] - f.link_base[i]).norm() - (ref.link_tip[i] - ref.link_base[i]).norm()) < 1e-12);
      const Mat3 r = f.joint_frames[i].linear();
      CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-12);
      CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("point Jacobian") {
  std::mt19937_64 rng(5);
  const RobotModel m = oracle::random_chain(3, rng);
  const VecX q = oracle::random_vector(3, rng, 2.0);

  SUBCASE("distal columns are zero") {
    const Mat3X j = point_jacobian(m, q, 2, 0.6);
    CHECK(j.col(2).norm() == 0.0);
  }
  SUBCASE("columns are axis cross lever arm") {
    const FrameSet f = forward_kinematics(m, q);
    const Vec3 p = f.contact_point(3, 0.4);
    const Mat3X j = point_jacobian(m, q, 3, 0.4);
    for (int c = 1; c <= 3; ++c) CHECK((j.col(c - 1) - f.axis(c, m).cross(p - f.origin(c))).norm() < 1e-14);
  }
  SUBCASE("tip of the last link matches the end-effector Jacobian") {
    CHECK((point_jacobian(m, q, 3, 1.0) - end_effector_jacobian(m, q)).norm() < 1e-14);
  }
  SUBCASE("bad link index") {
    CHECK_THROWS_AS(point_jacobian(m, q, 0, 0.5), ArgumentError);
    CHECK_THROWS_AS(point_jacobian(m, q, 4, 0.5), ArgumentError);
  }
}

TEST_CASE("Jacobian transpose agrees with differentiated contact point") {
  std::mt19937_64 rng(6);
  const RobotModel m = fixture_chain();
  for (int trial = 0; trial < 20; ++trial) {
    const VecX q = oracle::random_vector(7, rng, 1.5);
    const int link = 1 + trial % 7;
    const double s = oracle::uniform(rng, 0.0, 1.0);
    const Vec3 f = 20.0 * oracle::random_unit(rng);
    const VecX tau = external_torque_from_force(m, q, link, s, f);
    VecX fd(7);
    const double h = 1e-7;
    for (int j = 0; j < 7; ++j) {
      VecX e = VecX::Zero(7);
      e[j] = h;
      fd[j] = f.dot(oracle::centerline_point(m, q + e, link, s) - oracle::centerline_point(m, q - e, link, s)) /
              (2 * h);
    }
    CHECK((tau - fd).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("virtual work identity") {
  std::mt19937_64 rng(7);
  const RobotModel m = oracle::random_chain(6, rng);
  const VecX q = oracle::random_vector(6, rng, 2.0);
  const Vec3 f(3.0, -7.0, 11.0);
  const VecX tau = external_torque_from_force(m, q, 5, 0.3, f);
  const Mat3X j = point_jacobian(m, q, 5, 0.3);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const VecX dq = oracle::random_vector(6, rng, 1.0);
    worst = std::max(worst, std::abs(f.dot(j * dq) - tau.dot(dq)));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("inverse dynamics: static cases") {
  SUBCASE("horizontal one-link arm under gravity") {
    const RobotModel arm = planar_arm({0.5}, Vec3(0, -9.81, 0));
    const VecX z = VecX::Zero(1);
    CHECK(inverse_dynamics(arm, z, z, z)[0] == doctest::Approx(2.4525).epsilon(1e-14));
  }
  SUBCASE("no gravity, at rest") {
    std::mt19937_64 rng(8);
    const RobotModel m = oracle::random_chain(4, rng).with_gravity(Vec3::Zero());
    const VecX z = VecX::Zero(4);
    CHECK(inverse_dynamics(m, oracle::random_vector(4, rng, 2.0), z, z).norm() < 1e-14);
  }
}

TEST_CASE("inverse dynamics against the Lagrangian oracle") {
  std::mt19937_64 rng(9);
  for (int n : {2, 3}) {
    for (int trial = 0; trial < 3; ++trial) {
      const RobotModel m = oracle::random_chain(n, rng);
      const VecX q = oracle::random_vector(n, rng, 2.0);
      const VecX qd = oracle::random_vector(n, rng, 1.5);
      const VecX qdd = oracle::random_vector(n, rng, 3.0);
      const VecX rnea = inverse_dynamics(m, q, qd, qdd);
      const VecX lag = oracle::lagrange_torque(m, q, qd, qdd);
      CHECK((rnea - lag).cwiseAbs().maxCoeff() < 1e-5);
    }
  }
}

TEST_CASE("mass matrix is symmetric positive definite") {
  std::mt19937_64 rng(10);
  const RobotModel m = fixture_chain();
  const MatX M = mass_matrix(m, oracle::random_vector(7, rng, 1.5));
  CHECK((M - M.transpose()).norm() < 1e-12);
  CHECK(Eigen::SelfAdjointEigenSolver<MatX>(M).eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("passivity: qd . C(q,qd) qd equals the rate of kinetic energy") {
  std::mt19937_64 rng(11);
  const RobotModel m = oracle::random_chain(4, rng, false).with_gravity(Vec3::Zero());
  const VecX q = oracle::random_vector(4, rng, 2.0);
  const VecX qd = oracle::random_vector(4, rng, 1.0);
  const double power = qd.dot(inverse_dynamics(m, q, qd, VecX::Zero(4)));
  // Along the motion q(t) = q + t qd with qdd = 0, dKE/dt = 1/2 qd^T dM/dt qd.
  auto ke = [&](double t) { return 0.5 * qd.dot(mass_matrix(m, q + t * qd) * qd); };
  const double h = 1e-4;
  const double dke = (8 * (ke(h) - ke(-h)) - (ke(2 * h) - ke(-2 * h))) / (12 * h);
  CHECK(std::abs(power - dke) < 1e-5);
}

TEST_CASE("friction torque") {
  std::vector<JointSpec> joints(1);
  std::vector<LinkSpec> links(1);
  links[0].mass = 1.0;
  links[0].inertia = Mat3::Identity() * 0.01;
  links[0].tip = Vec3(0.3, 0, 0);
  const RobotModel m(joints, links, {FrictionSpec{0.2, 0.5}}, Vec3::Zero());
  VecX qd(1);
  qd << 0.1;
  CHECK(friction_torque(m, qd)[0] == doctest::Approx(0.02 + 0.5 * std::tanh(100.0)));
  CHECK(m.without_friction().friction()[0].viscous == 0.0);
}

TEST_CASE("world rotation of the base rotates Jacobians and keeps torques") {
  std::mt19937_64 rng(12);
  const RobotModel m = oracle::random_chain(5, rng);
  Eigen::Isometry3d r = Eigen::Isometry3d::Identity();
  r.linear() = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  r.translation() = Vec3(0.1, -0.2, 0.3);
  const RobotModel mr = m.with_base_transform(r);
  const VecX q = oracle::random_vector(5, rng, 2.0);
  const VecX qd = oracle::random_vector(5, rng, 1.0);
  const VecX qdd = oracle::random_vector(5, rng, 1.0);
  CHECK((point_jacobian(mr, q, 4, 0.3) - r.linear() * point_jacobian(m, q, 4, 0.3)).norm() < 1e-13);
  CHECK((inverse_dynamics(mr, q, qd, qdd) - inverse_dynamics(m, q, qd, qdd)).norm() < 1e-11);
}

TEST_CASE("resolved-rate step") {
  const RobotModel arm = planar_arm({0.4, 0.35, 0.25});
  VecX q(3);
  q << 0.3, 0.8, -0.6;

  SUBCASE("zero command leaves q unchanged") {
    CHECK(resolved_rate_step(arm, q, Vec3::Zero(), 0.01, 1e-3) == q);
  }

  SUBCASE("tracks a straight line to within 1 mm") {
    const double dt = 1e-3, speed = 0.05;
    const Vec3 start = forward_kinematics(arm, q).tip();
    const Vec3 dir = Vec3(-1.0, 1.0, 0.0).normalized();
    double worst = 0.0;
    for (int k = 1; k <= 2000; ++k) {
      const Vec3 target = start + dir * speed * k * dt;
      const Vec3 err = target - forward_kinematics(arm, q).tip();
      q = resolved_rate_step(arm, q, dir * speed + 50.0 * err, 0.01, dt);
      worst = std::max(worst, (target - forward_kinematics(arm, q).tip()).norm());
    }
    CHECK(worst < 1e-3);
  }

  SUBCASE("joint speed bounded by the damped inverse near a singularity") {
    VecX straight = VecX::Zero(3);
    const double lambda = 0.05, dt = 1e-3;
    for (const Vec3& v : {Vec3(1.0, 0, 0), Vec3(0.3, 0.0, 0.0), Vec3(0.5, 0.5, 0.0)}) {
      const VecX qn = resolved_rate_step(arm, straight, v, lambda, dt);
      CHECK((qn - straight).norm() / dt <= v.norm() / (2 * lambda) + 1e-12);
    }
  }

  SUBCASE("NaN input is rejected") {
    CHECK_THROWS_AS(resolved_rate_step(arm, q, Vec3(NAN, 0, 0), 0.01, 1e-3), ArgumentError);
  }
}

TEST_CASE("chain file round trip") {
  const RobotModel m = fixture_chain();
  CHECK(m.dof() == 7);
  const RobotModel again = parse_chain(chain_to_json(m));
  std::mt19937_64 rng(13);
  const VecX q = oracle::random_vector(7, rng, 1.0);
  CHECK((forward_kinematics(again, q).tip() - forward_kinematics(m, q).tip()).norm() < 1e-12);
  CHECK((inverse_dynamics(again, q, q, q) - inverse_dynamics(m, q, q, q)).norm() < 1e-10);
}

TEST_CASE("malformed chain files") {
  using nlohmann::json;
  json doc = chain_to_json(fixture_chain());
  json bad = doc;
  bad["links"].erase(0);
  CHECK_THROWS_AS(parse_chain(bad), ConfigurationError);
  bad = doc;
  bad["joints"][0]["axis"] = {0, 0, 0};
  CHECK_THROWS(parse_chain(bad));
  bad = doc;
  bad["bogus"] = 1;
  CHECK_THROWS_AS(parse_chain(bad), LoadError);
  CHECK_THROWS_AS(load_chain("/nonexistent/chain.json"), LoadError);
}
