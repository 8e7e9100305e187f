#include "contactplan/robot_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "contactplan/errors.hpp"

namespace contactplan {
namespace {

using nlohmann::json;

void check_link(const RobotModel& model, int link) {
  if (link < 1 || link > model.dof()) {
    std::ostringstream msg;
    msg << "link index " << link << " outside [1, " << model.dof() << "]";
    throw ArgumentError(msg.str());
  }
}

void check_arc_length(double s) {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw ArgumentError("arc length s must lie in [0, 1], got " + std::to_string(s));
  }
}

bool all_finite(const VecX& v) { return v.allFinite(); }

Eigen::Isometry3d make_transform(const Vec3& xyz, const Vec3& rpy) {
  // URDF convention: R = Rz(yaw) * Ry(pitch) * Rx(roll)
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
                Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
                Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
                   .toRotationMatrix();
  t.translation() = xyz;
  return t;
}

Vec3 rpy_of(const Mat3& r) {
  // Inverse of make_transform's rotation; valid away from pitch = +-pi/2.
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return {roll, pitch, yaw};
}

Vec3 read_vec3(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3) {
    throw LoadError("chain file: '" + key + "' must be an array of 3 numbers");
  }
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) {
      throw LoadError("chain file: '" + key + "' must contain numbers");
    }
    v[i] = j[i].get<double>();
  }
  return v;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

void reject_unknown(const json& obj, std::initializer_list<const char*> known,
                    const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw LoadError("chain file: unknown key '" + key + "' in " + where);
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw LoadError(std::string("chain file: missing key '") + key + "' in " + where);
  }
  return *it;
}

// Recursive Newton-Euler in the world frame. `gravity` may differ from the
// model's so that mass_matrix can switch it off.
VecX rnea(const RobotModel& model, const FrameSet& frames, const VecX& qd,
          const VecX& qdd, const Vec3& gravity, bool with_friction) {
  const int n = model.dof();
  std::vector<Vec3> omega(n), alpha(n), a_origin(n), f(n), moment(n), com(n);

  Vec3 w_prev = Vec3::Zero();
  Vec3 wd_prev = Vec3::Zero();
  Vec3 a_prev = -gravity;  // base acceleration trick
  Vec3 o_prev = model.base().translation();

  for (int i = 0; i < n; ++i) {
    const Eigen::Isometry3d& frame = frames.joint_frames[i];
    const Vec3 z = frame.linear() * model.joints()[i].axis;
    const Vec3 o = frame.translation();
    const Vec3 r = o - o_prev;

    a_origin[i] = a_prev + wd_prev.cross(r) + w_prev.cross(w_prev.cross(r));
    omega[i] = w_prev + z * qd[i];
    alpha[i] = wd_prev + z * qdd[i] + w_prev.cross(z * qd[i]);

    const LinkSpec& link = model.links()[i];
    com[i] = frame * link.com;
    const Vec3 rc = com[i] - o;
    const Vec3 a_com = a_origin[i] + alpha[i].cross(rc) + omega[i].cross(omega[i].cross(rc));
    const Mat3 inertia_world = frame.linear() * link.inertia * frame.linear().transpose();

    f[i] = link.mass * a_com;
    moment[i] = inertia_world * alpha[i] + omega[i].cross(inertia_world * omega[i]);

    w_prev = omega[i];
    wd_prev = alpha[i];
    a_prev = a_origin[i];
    o_prev = o;
  }

  VecX tau(n);
  Vec3 force_next = Vec3::Zero();
  Vec3 moment_next = Vec3::Zero();
  Vec3 o_next = Vec3::Zero();
  for (int i = n - 1; i >= 0; --i) {
    const Eigen::Isometry3d& frame = frames.joint_frames[i];
    const Vec3 o = frame.translation();
    const Vec3 force = f[i] + force_next;
    Vec3 m = moment[i] + (com[i] - o).cross(f[i]);
    if (i + 1 < n) m += moment_next + (o_next - o).cross(force_next);
    tau[i] = (frame.linear() * model.joints()[i].axis).dot(m);
    force_next = force;
    moment_next = m;
    o_next = o;
  }
  if (with_friction) tau += friction_torque(model, qd);
  return tau;
}

}  // namespace

RobotModel::RobotModel(std::vector<JointSpec> joints, std::vector<LinkSpec> links,
                       std::vector<FrictionSpec> friction, Vec3 gravity)
    : joints_(std::move(joints)),
      links_(std::move(links)),
      friction_(std::move(friction)),
      gravity_(gravity) {
  if (joints_.empty()) throw ConfigurationError("robot needs at least one joint");
  if (joints_.size() != links_.size()) {
    throw ConfigurationError("number of joints and links must match");
  }
  if (friction_.empty()) friction_.resize(joints_.size());
  if (friction_.size() != joints_.size()) {
    throw ConfigurationError("friction entries must match the number of joints");
  }
  if (!gravity_.allFinite()) throw ConfigurationError("gravity must be finite");
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    const std::string tag = " (joint/link " + std::to_string(i + 1) + ")";
    auto& joint = joints_[i];
    if (!(joint.axis.norm() > 0.0) || !joint.axis.allFinite()) {
      throw ConfigurationError("joint axis must be a nonzero vector" + tag);
    }
    joint.axis.normalize();
    if (joint.limits && !(joint.limits->lower < joint.limits->upper)) {
      throw ConfigurationError("joint limits must satisfy lower < upper" + tag);
    }
    const auto& link = links_[i];
    if (!(link.mass > 0.0)) throw ConfigurationError("link mass must be positive" + tag);
    if (!link.inertia.isApprox(link.inertia.transpose(), 1e-12)) {
      throw ConfigurationError("link inertia must be symmetric" + tag);
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(link.inertia);
    if (!(eig.eigenvalues().minCoeff() > 0.0)) {
      throw ConfigurationError("link inertia must be positive definite" + tag);
    }
    if (!(link.tip.norm() > 0.0)) {
      throw ConfigurationError("link centerline must have nonzero length" + tag);
    }
  }
}

RobotModel RobotModel::with_mass_scale(double scale) const {
  RobotModel copy = *this;
  for (auto& link : copy.links_) {
    link.mass *= scale;
    link.inertia *= scale;
  }
  return copy;
}

RobotModel RobotModel::with_base_transform(const Eigen::Isometry3d& transform) const {
  RobotModel copy = *this;
  copy.base_ = transform * base_;
  copy.gravity_ = transform.linear() * gravity_;
  return copy;
}

RobotModel RobotModel::with_gravity(const Vec3& gravity) const {
  RobotModel copy = *this;
  copy.gravity_ = gravity;
  return copy;
}

RobotModel RobotModel::without_friction() const {
  RobotModel copy = *this;
  for (auto& f : copy.friction_) f = FrictionSpec{};
  return copy;
}

void RobotModel::check_dimension(const VecX& v, const char* what) const {
  if (v.size() != dof()) {
    std::ostringstream msg;
    msg << what << " has length " << v.size() << ", robot has " << dof() << " joints";
    throw ConfigurationError(msg.str());
  }
}

RobotModel parse_chain(const json& doc) {
  if (!doc.is_object()) throw LoadError("chain file: top level must be an object");
  reject_unknown(doc, {"name", "joints", "links", "gravity", "friction"}, "document");

  const json& jj = require(doc, "joints", "document");
  const json& jl = require(doc, "links", "document");
  if (!jj.is_array() || !jl.is_array()) throw LoadError("chain file: joints/links must be arrays");

  std::vector<JointSpec> joints;
  for (std::size_t i = 0; i < jj.size(); ++i) {
    const json& e = jj[i];
    const std::string where = "joints[" + std::to_string(i) + "]";
    if (!e.is_object()) throw LoadError("chain file: " + where + " must be an object");
    reject_unknown(e, {"name", "axis", "origin_xyz", "origin_rpy", "limits"}, where);
    JointSpec spec;
    spec.axis = read_vec3(require(e, "axis", where), where + ".axis");
    const Vec3 xyz = e.contains("origin_xyz") ? read_vec3(e["origin_xyz"], where + ".origin_xyz")
                                              : Vec3::Zero();
    const Vec3 rpy = e.contains("origin_rpy") ? read_vec3(e["origin_rpy"], where + ".origin_rpy")
                                              : Vec3::Zero();
    spec.origin = make_transform(xyz, rpy);
    if (e.contains("limits")) {
      const json& lim = e["limits"];
      if (!lim.is_array() || lim.size() != 2 || !lim[0].is_number() || !lim[1].is_number()) {
        throw LoadError("chain file: " + where + ".limits must be [lower, upper]");
      }
      spec.limits = JointLimits{lim[0].get<double>(), lim[1].get<double>()};
    }
    joints.push_back(spec);
  }

  std::vector<LinkSpec> links;
  for (std::size_t i = 0; i < jl.size(); ++i) {
    const json& e = jl[i];
    const std::string where = "links[" + std::to_string(i) + "]";
    if (!e.is_object()) throw LoadError("chain file: " + where + " must be an object");
    reject_unknown(e, {"name", "mass", "com", "inertia", "tip"}, where);
    LinkSpec spec;
    const json& mass = require(e, "mass", where);
    if (!mass.is_number()) throw LoadError("chain file: " + where + ".mass must be a number");
    spec.mass = mass.get<double>();
    spec.com = read_vec3(require(e, "com", where), where + ".com");
    spec.tip = read_vec3(require(e, "tip", where), where + ".tip");
    const json& in = require(e, "inertia", where);
    if (!in.is_array() || in.size() != 6) {
      throw LoadError("chain file: " + where + ".inertia must hold 6 values [ixx ixy ixz iyy iyz izz]");
    }
    double v[6];
    for (int k = 0; k < 6; ++k) {
      if (!in[k].is_number()) throw LoadError("chain file: " + where + ".inertia must be numeric");
      v[k] = in[k].get<double>();
    }
    spec.inertia << v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5];
    links.push_back(spec);
  }

  std::vector<FrictionSpec> friction;
  if (doc.contains("friction")) {
    const json& jf = doc["friction"];
    if (!jf.is_array()) throw LoadError("chain file: friction must be an array");
    for (std::size_t i = 0; i < jf.size(); ++i) {
      const std::string where = "friction[" + std::to_string(i) + "]";
      reject_unknown(jf[i], {"viscous", "coulomb"}, where);
      friction.push_back({jf[i].value("viscous", 0.0), jf[i].value("coulomb", 0.0)});
    }
  }

  Vec3 gravity(0.0, 0.0, -9.81);
  if (doc.contains("gravity")) gravity = read_vec3(doc["gravity"], "gravity");

  return RobotModel(std::move(joints), std::move(links), std::move(friction), gravity);
}

RobotModel load_chain(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError("cannot open chain file " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError("chain file " + file.string() + ": " + e.what());
  }
  return parse_chain(doc);
}

json chain_to_json(const RobotModel& model) {
  json joints = json::array();
  for (const auto& j : model.joints()) {
    json e = {{"axis", vec_json(j.axis)},
              {"origin_xyz", vec_json(j.origin.translation())},
              {"origin_rpy", vec_json(rpy_of(j.origin.linear()))}};
    if (j.limits) e["limits"] = {j.limits->lower, j.limits->upper};
    joints.push_back(e);
  }
  json links = json::array();
  for (const auto& l : model.links()) {
    const Mat3& i = l.inertia;
    links.push_back({{"mass", l.mass},
                     {"com", vec_json(l.com)},
                     {"inertia", {i(0, 0), i(0, 1), i(0, 2), i(1, 1), i(1, 2), i(2, 2)}},
                     {"tip", vec_json(l.tip)}});
  }
  json friction = json::array();
  for (const auto& f : model.friction()) {
    friction.push_back({{"viscous", f.viscous}, {"coulomb", f.coulomb}});
  }
  return {{"joints", joints},
          {"links", links},
          {"friction", friction},
          {"gravity", vec_json(model.gravity())}};
}

Vec3 FrameSet::contact_point(int link, double s) const {
  const Vec3& base = link_base[link - 1];
  return base + s * (link_tip[link - 1] - base);
}

FrameSet forward_kinematics(const RobotModel& model, const VecX& q) {
  model.check_dimension(q, "q");
  if (!all_finite(q)) throw ArgumentError("q must be finite");
  const int n = model.dof();
  FrameSet frames;
  frames.joint_frames.reserve(n);
  frames.link_base.reserve(n);
  frames.link_tip.reserve(n);
  Eigen::Isometry3d parent = model.base();
  for (int i = 0; i < n; ++i) {
    const JointSpec& joint = model.joints()[i];
    Eigen::Isometry3d frame = parent * joint.origin;
    frame.rotate(Eigen::AngleAxisd(q[i], joint.axis));
    frames.joint_frames.push_back(frame);
    frames.link_base.push_back(frame.translation());
    frames.link_tip.push_back(frame * model.links()[i].tip);
    parent = frame;
  }
  return frames;
}

Mat3X point_jacobian(const RobotModel& model, const FrameSet& frames, int link, double s) {
  check_link(model, link);
  check_arc_length(s);
  const Vec3 p = frames.contact_point(link, s);
  Mat3X jac = Mat3X::Zero(3, model.dof());
  for (int j = 1; j <= link; ++j) {
    jac.col(j - 1) = frames.axis(j, model).cross(p - frames.origin(j));
  }
  return jac;
}

Mat3X point_jacobian(const RobotModel& model, const VecX& q, int link, double s) {
  check_link(model, link);
  check_arc_length(s);
  return point_jacobian(model, forward_kinematics(model, q), link, s);
}

Mat3X end_effector_jacobian(const RobotModel& model, const VecX& q) {
  return point_jacobian(model, q, model.dof(), 1.0);
}

VecX friction_torque(const RobotModel& model, const VecX& qd) {
  model.check_dimension(qd, "qd");
  VecX tau(model.dof());
  for (int i = 0; i < model.dof(); ++i) {
    const FrictionSpec& f = model.friction()[i];
    tau[i] = f.viscous * qd[i] + f.coulomb * std::tanh(qd[i] / kCoulombVelocityScale);
  }
  return tau;
}

VecX inverse_dynamics(const RobotModel& model, const VecX& q, const VecX& qd,
                      const VecX& qdd) {
  model.check_dimension(qd, "qd");
  model.check_dimension(qdd, "qdd");
  if (!all_finite(qd) || !all_finite(qdd)) throw ArgumentError("qd and qdd must be finite");
  return rnea(model, forward_kinematics(model, q), qd, qdd, model.gravity(), true);
}

MatX mass_matrix(const RobotModel& model, const VecX& q) {
  const FrameSet frames = forward_kinematics(model, q);
  const int n = model.dof();
  const VecX zero = VecX::Zero(n);
  MatX m(n, n);
  for (int c = 0; c < n; ++c) {
    m.col(c) = rnea(model, frames, zero, VecX::Unit(n, c), Vec3::Zero(), false);
  }
  return m;
}

VecX external_torque_from_force(const RobotModel& model, const VecX& q, int link, double s,
                                const Vec3& force) {
  if (!force.allFinite()) throw ArgumentError("force must be finite");
  return point_jacobian(model, q, link, s).transpose() * force;
}

VecX resolved_rate_step(const RobotModel& model, const VecX& q, const Vec3& tip_velocity,
                        double damping, double dt) {
  if (!(dt > 0.0)) throw ArgumentError("dt must be positive");
  if (!(damping > 0.0)) throw ArgumentError("IK damping must be positive");
  if (!tip_velocity.allFinite()) throw ArgumentError("tip velocity must be finite");
  const Mat3X jac = end_effector_jacobian(model, q);
  const Mat3 jjt = jac * jac.transpose() + damping * damping * Mat3::Identity();
  VecX next = q + dt * (jac.transpose() * jjt.ldlt().solve(tip_velocity));
  for (int i = 0; i < model.dof(); ++i) {
    if (const auto& lim = model.joints()[i].limits) {
      next[i] = std::clamp(next[i], lim->lower, lim->upper);
    }
  }
  return next;
}

}  // namespace contactplan
