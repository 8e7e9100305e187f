#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

namespace contactplan {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Mat3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;

struct JointLimits {
  double lower = 0.0;
  double upper = 0.0;
};

// Revolute joint. `origin` is the fixed transform from the parent link frame
// to the joint frame; the joint then rotates about `axis` (joint frame).
struct JointSpec {
  Vec3 axis = Vec3::UnitZ();
  Eigen::Isometry3d origin = Eigen::Isometry3d::Identity();
  std::optional<JointLimits> limits;
};

// Rigid link attached to the joint of the same index. The centerline runs
// from the joint origin (link frame zero) to `tip`, expressed in the link
// frame. Inertia is about the center of mass, in the link frame.
struct LinkSpec {
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();
  Vec3 tip = Vec3::Zero();
};

// Viscous plus smoothed Coulomb friction:
//   tau_f = viscous * qd + coulomb * tanh(qd / kCoulombVelocityScale)
struct FrictionSpec {
  double viscous = 0.0;
  double coulomb = 0.0;
};

inline constexpr double kCoulombVelocityScale = 1e-3;  // rad/s

// Immutable description of an n-DOF revolute serial chain. All link indices
// in the public API are 1-based (link 1 is attached to joint 1).
class RobotModel {
 public:
  RobotModel(std::vector<JointSpec> joints, std::vector<LinkSpec> links,
             std::vector<FrictionSpec> friction, Vec3 gravity);

  int dof() const { return static_cast<int>(joints_.size()); }
  const std::vector<JointSpec>& joints() const { return joints_; }
  const std::vector<LinkSpec>& links() const { return links_; }
  const std::vector<FrictionSpec>& friction() const { return friction_; }
  const Vec3& gravity() const { return gravity_; }
  const Eigen::Isometry3d& base() const { return base_; }

  // Copy with every link mass multiplied by `scale` (inertias scale too).
  RobotModel with_mass_scale(double scale) const;
  // Copy whose base frame is pre-multiplied by `transform`; gravity is
  // rotated along with it so the physics is unchanged in the new world frame.
  RobotModel with_base_transform(const Eigen::Isometry3d& transform) const;
  RobotModel with_gravity(const Vec3& gravity) const;
  RobotModel without_friction() const;

  void check_dimension(const VecX& v, const char* what) const;

 private:
  std::vector<JointSpec> joints_;
  std::vector<LinkSpec> links_;
  std::vector<FrictionSpec> friction_;
  Vec3 gravity_;
  Eigen::Isometry3d base_ = Eigen::Isometry3d::Identity();
};

// Chain file I/O. See docs/file_formats.md for the schema.
RobotModel parse_chain(const nlohmann::json& doc);
RobotModel load_chain(const std::filesystem::path& file);
nlohmann::json chain_to_json(const RobotModel& model);

// World-frame poses of every joint frame (after joint rotation, so the
// rotation part is also the link orientation) and link centerline endpoints.
struct FrameSet {
  std::vector<Eigen::Isometry3d> joint_frames;
  std::vector<Vec3> link_base;
  std::vector<Vec3> link_tip;

  Vec3 origin(int joint) const { return joint_frames[joint - 1].translation(); }
  Vec3 axis(int joint, const RobotModel& model) const {
    return joint_frames[joint - 1].linear() * model.joints()[joint - 1].axis;
  }
  const Vec3& tip() const { return link_tip.back(); }
  // Point at normalized arc length s on the centerline of `link`.
  Vec3 contact_point(int link, double s) const;
};

FrameSet forward_kinematics(const RobotModel& model, const VecX& q);

// 3 x n Jacobian of the point at arc length s on `link`. Columns of joints
// distal to the link are zero.
Mat3X point_jacobian(const RobotModel& model, const VecX& q, int link, double s);
Mat3X point_jacobian(const RobotModel& model, const FrameSet& frames, int link,
                     double s);
// Jacobian of the tip of the last link.
Mat3X end_effector_jacobian(const RobotModel& model, const VecX& q);

// Recursive Newton-Euler: M(q) qdd + C(q,qd) qd + G(q) + F_f(qd).
VecX inverse_dynamics(const RobotModel& model, const VecX& q, const VecX& qd,
                      const VecX& qdd);
// Joint-space inertia matrix, assembled column-wise from unit accelerations.
MatX mass_matrix(const RobotModel& model, const VecX& q);
VecX friction_torque(const RobotModel& model, const VecX& qd);

// J_c(q, s)^T F for a force F applied at arc length s on `link`.
VecX external_torque_from_force(const RobotModel& model, const VecX& q, int link,
                                double s, const Vec3& force);

// One damped resolved-rate step toward tip velocity `tip_velocity`:
//   q + dt * J^T (J J^T + damping^2 I)^-1 v
// Joint limits are clamped when the model defines them.
VecX resolved_rate_step(const RobotModel& model, const VecX& q,
                        const Vec3& tip_velocity, double damping, double dt);

}  // namespace contactplan
