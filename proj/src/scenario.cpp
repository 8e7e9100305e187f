#include "contactplan/scenario.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "contactplan/errors.hpp"

namespace contactplan {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw LoadError("scenario: '" + where + "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!known.count(key)) {
      throw LoadError("scenario: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

double get_number(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw LoadError("scenario: '" + where + "." + key + "' must be a number");
  return v.get<double>();
}

int get_int(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw LoadError("scenario: '" + where + "." + key + "' must be an integer");
  return v.get<int>();
}

Vec3 get_vec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw LoadError("scenario: '" + where + "' must hold 3 numbers");
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number()) throw LoadError("scenario: '" + where + "' must hold numbers");
    out[i] = v[i].get<double>();
  }
  return out;
}

VecX get_vector(const json& v, const std::string& where) {
  if (!v.is_array()) throw LoadError("scenario: '" + where + "' must be an array");
  VecX out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw LoadError("scenario: '" + where + "' must hold numbers");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

ForceProfile parse_profile(const std::string& name) {
  if (name == "constant") return ForceProfile::kConstant;
  if (name == "trapezoid") return ForceProfile::kTrapezoid;
  if (name == "half_sine") return ForceProfile::kHalfSine;
  throw LoadError("scenario: unknown force profile '" + name + "'");
}

VecX default_q0(const RobotModel& model) {
  VecX q = VecX::Zero(model.dof());
  for (int i = 0; i < model.dof(); ++i) {
    if (const auto& lim = model.joints()[i].limits) q[i] = 0.5 * (lim->lower + lim->upper);
  }
  return q;
}

ReferencePath parse_path_block(const json& block, const std::filesystem::path& base_dir) {
  if (block.is_string()) return load_path(base_dir / block.get<std::string>());
  if (block.is_array()) return parse_path(block);
  reject_unknown(block, {"file", "samples", "line"}, "path");
  if (block.contains("file")) {
    if (!block["file"].is_string()) throw LoadError("scenario: 'path.file' must be a string");
    return load_path(base_dir / block["file"].get<std::string>());
  }
  if (block.contains("samples")) return parse_path(block["samples"]);
  if (block.contains("line")) {
    const json& line = block["line"];
    reject_unknown(line, {"start", "goal", "count", "quaternion"}, "path.line");
    Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
    if (line.contains("quaternion")) {
      const VecX q = get_vector(line["quaternion"], "path.line.quaternion");
      if (q.size() != 4) throw LoadError("scenario: 'path.line.quaternion' must be [w, x, y, z]");
      orientation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
    }
    const int count = line.contains("count") ? get_int(line, "count", "path.line") : 101;
    return ReferencePath::line(get_vec3(line.at("start"), "path.line.start"),
                               get_vec3(line.at("goal"), "path.line.goal"), count, orientation);
  }
  throw LoadError("scenario: 'path' needs one of 'file', 'samples' or 'line'");
}

}  // namespace

const char* to_string(ForceProfile profile) {
  switch (profile) {
    case ForceProfile::kConstant: return "constant";
    case ForceProfile::kTrapezoid: return "trapezoid";
    case ForceProfile::kHalfSine: return "half_sine";
  }
  return "constant";
}

Vec3 GroundTruthContact::force_at(double t) const {
  if (!active(t)) return Vec3::Zero();
  switch (profile) {
    case ForceProfile::kConstant:
      return force;
    case ForceProfile::kTrapezoid: {
      const double rise = std::min(ramp, 0.5 * (t_end - t_start));
      if (!(rise > 0.0)) return force;
      const double scale = std::min({1.0, (t - t_start) / rise, (t_end - t) / rise});
      return scale * force;
    }
    case ForceProfile::kHalfSine:
      return std::sin(std::numbers::pi * (t - t_start) / (t_end - t_start)) * force;
  }
  return force;
}

long Scenario::tick_count() const { return std::lround(duration * sample_rate); }

void Scenario::validate() const {
  if (!(duration > 0.0)) throw ValidationError("duration must be positive");
  if (!(sample_rate > 0.0)) throw ValidationError("sample_rate must be positive");
  if (!(force_limit > 0.0)) throw ValidationError("force_limit must be positive");
  if (tracking.q0.size() != model.dof()) {
    throw ValidationError("robot.q0 must have one entry per joint");
  }
  if (!(tracking.ik_damping > 0.0)) throw ValidationError("robot.ik_damping must be positive");
  if (!(tracking.ik_gain >= 0.0)) throw ValidationError("robot.ik_gain must be non-negative");
  if (!(tracking.ramp_time > 0.0)) throw ValidationError("robot.ramp_time must be positive");
  if (!(noise.sigma >= 0.0)) throw ValidationError("noise.sigma must be non-negative");
  if (!(noise.mass_scale_error > -1.0)) throw ValidationError("noise.mass_scale_error must exceed -1");
  detection.validate(model.dof());
  estimation.validate();
  planner.validate();
  if (!(qdd_cutoff_hz > 0.0 && qdd_cutoff_hz < 0.5 * sample_rate)) {
    throw ValidationError("detection.qdd_cutoff_hz must lie below the Nyquist frequency");
  }
  for (std::size_t i = 0; i < contacts.size(); ++i) {
    const GroundTruthContact& c = contacts[i];
    try {
      validate_contact(c, model, force_limit);
    } catch (const ValidationError& e) {
      throw ValidationError("contacts[" + std::to_string(i) + "]: " + e.what());
    }
    if (c.t_start < 0.0 || c.t_end > duration) {
      throw ValidationError("contacts[" + std::to_string(i) + "]: contact window must lie within the run duration");
    }
  }
}

void validate_contact(const GroundTruthContact& c, const RobotModel& model, double force_limit) {
  if (c.link < 1 || c.link > model.dof()) throw ValidationError("contact link outside the chain");
  if (!(c.s >= 0.0 && c.s <= 1.0)) throw ValidationError("contact s must lie in [0, 1]");
  if (!(c.t_start < c.t_end)) throw ValidationError("contact needs t_start < t_end");
  if (!c.force.allFinite() || c.force.norm() > force_limit) {
    throw ValidationError("contact force exceeds the scenario force limit");
  }
  if (!(c.ramp >= 0.0)) throw ValidationError("contact ramp must be non-negative");
}

GroundTruthContact parse_contact(const json& doc) {
  reject_unknown(doc, {"link", "s", "force", "profile", "ramp", "t_start", "t_end"}, "contacts[]");
  GroundTruthContact c;
  for (const char* key : {"link", "s", "force", "t_start", "t_end"}) {
    if (!doc.contains(key)) throw LoadError(std::string("scenario: contact is missing key '") + key + "'");
  }
  c.link = get_int(doc, "link", "contacts[]");
  c.s = get_number(doc, "s", "contacts[]");
  c.force = get_vec3(doc["force"], "contacts[].force");
  c.t_start = get_number(doc, "t_start", "contacts[]");
  c.t_end = get_number(doc, "t_end", "contacts[]");
  if (doc.contains("profile")) {
    if (!doc["profile"].is_string()) throw LoadError("scenario: 'contacts[].profile' must be a string");
    c.profile = parse_profile(doc["profile"].get<std::string>());
  }
  if (doc.contains("ramp")) c.ramp = get_number(doc, "ramp", "contacts[]");
  return c;
}

json contact_to_json(const GroundTruthContact& c) {
  return {{"link", c.link},         {"s", c.s},         {"force", vec_json(c.force)},
          {"profile", to_string(c.profile)}, {"ramp", c.ramp}, {"t_start", c.t_start},
          {"t_end", c.t_end}};
}

void apply_detection_patch(DetectionConfig& config, const json& patch) {
  reject_unknown(patch, {"weights", "alpha_ewma", "theta_tau", "n_on", "n_off", "tau_th"}, "detection");
  if (patch.contains("weights")) config.weights = get_vector(patch["weights"], "detection.weights");
  if (patch.contains("alpha_ewma")) config.alpha_ewma = get_number(patch, "alpha_ewma", "detection");
  if (patch.contains("theta_tau")) config.theta_tau = get_number(patch, "theta_tau", "detection");
  if (patch.contains("n_on")) config.n_on = get_int(patch, "n_on", "detection");
  if (patch.contains("n_off")) config.n_off = get_int(patch, "n_off", "detection");
  if (patch.contains("tau_th")) config.tau_th = get_number(patch, "tau_th", "detection");
}

void apply_estimation_patch(EstimationConfig& config, const json& patch) {
  reject_unknown(patch, {"lambda", "f_max", "grid_points", "brent_tol", "window_n"}, "estimation");
  if (patch.contains("lambda")) config.lambda = get_number(patch, "lambda", "estimation");
  if (patch.contains("f_max")) config.f_max = get_number(patch, "f_max", "estimation");
  if (patch.contains("grid_points")) config.grid_points = get_int(patch, "grid_points", "estimation");
  if (patch.contains("brent_tol")) config.brent_tol = get_number(patch, "brent_tol", "estimation");
  if (patch.contains("window_n")) config.window_n = get_int(patch, "window_n", "estimation");
}

void apply_planner_patch(PlannerConfig& config, const json& patch) {
  reject_unknown(patch,
                 {"alpha_gain", "f_sat", "beta", "epsilon", "window_n_d", "min_contact_fraction", "tip_speed"},
                 "planner");
  if (patch.contains("alpha_gain")) config.alpha_gain = get_number(patch, "alpha_gain", "planner");
  if (patch.contains("f_sat")) config.f_sat = get_number(patch, "f_sat", "planner");
  if (patch.contains("beta")) config.beta = get_number(patch, "beta", "planner");
  if (patch.contains("epsilon")) config.epsilon = get_number(patch, "epsilon", "planner");
  if (patch.contains("window_n_d")) config.window_n_d = get_int(patch, "window_n_d", "planner");
  if (patch.contains("min_contact_fraction")) {
    config.min_contact_fraction = get_number(patch, "min_contact_fraction", "planner");
  }
  if (patch.contains("tip_speed")) config.tip_speed = get_number(patch, "tip_speed", "planner");
}

json detection_to_json(const DetectionConfig& c) {
  json weights = json::array();
  for (Eigen::Index i = 0; i < c.weights.size(); ++i) weights.push_back(c.weights[i]);
  return {{"weights", weights}, {"alpha_ewma", c.alpha_ewma}, {"theta_tau", c.theta_tau},
          {"n_on", c.n_on},     {"n_off", c.n_off},           {"tau_th", c.tau_th}};
}

json estimation_to_json(const EstimationConfig& c) {
  return {{"lambda", c.lambda},       {"f_max", c.f_max},       {"grid_points", c.grid_points},
          {"brent_tol", c.brent_tol}, {"window_n", c.window_n}};
}

json planner_to_json(const PlannerConfig& c) {
  return {{"alpha_gain", c.alpha_gain}, {"f_sat", c.f_sat},
          {"beta", c.beta},             {"epsilon", c.epsilon},
          {"window_n_d", c.window_n_d}, {"min_contact_fraction", c.min_contact_fraction},
          {"tip_speed", c.tip_speed}};
}

Scenario parse_scenario(const json& doc, const std::filesystem::path& base_dir) {
  reject_unknown(doc,
                 {"description", "robot", "path", "contacts", "noise", "detection", "estimation",
                  "planner", "duration", "sample_rate", "seed", "force_limit"},
                 "");
  for (const char* key : {"robot", "path", "duration"}) {
    if (!doc.contains(key)) throw LoadError(std::string("scenario: missing key '") + key + "'");
  }

  const json& robot = doc["robot"];
  std::filesystem::path robot_file;
  TrackingConfig tracking;
  json robot_block = robot.is_string() ? json{{"chain", robot}} : robot;
  reject_unknown(robot_block,
                 {"chain", "q0", "ik_damping", "ik_gain", "ramp_time", "abort_error", "abort_duration"},
                 "robot");
  if (!robot_block.contains("chain") || !robot_block["chain"].is_string()) {
    throw LoadError("scenario: 'robot.chain' must name a chain file");
  }
  robot_file = base_dir / robot_block["chain"].get<std::string>();
  RobotModel model = load_chain(robot_file);
  tracking.q0 = robot_block.contains("q0") ? get_vector(robot_block["q0"], "robot.q0") : default_q0(model);
  if (robot_block.contains("ik_damping")) tracking.ik_damping = get_number(robot_block, "ik_damping", "robot");
  if (robot_block.contains("ik_gain")) tracking.ik_gain = get_number(robot_block, "ik_gain", "robot");
  if (robot_block.contains("ramp_time")) tracking.ramp_time = get_number(robot_block, "ramp_time", "robot");
  if (robot_block.contains("abort_error")) tracking.abort_error = get_number(robot_block, "abort_error", "robot");
  if (robot_block.contains("abort_duration")) {
    tracking.abort_duration = get_number(robot_block, "abort_duration", "robot");
  }

  ReferencePath path = parse_path_block(doc["path"], base_dir);

  Scenario sc{.source = {},
              .robot_file = robot_file,
              .model = std::move(model),
              .path = std::move(path),
              .tracking = tracking};

  if (doc.contains("description")) {
    if (!doc["description"].is_string()) throw LoadError("scenario: 'description' must be a string");
    sc.description = doc["description"].get<std::string>();
  }
  if (doc.contains("contacts")) {
    if (!doc["contacts"].is_array()) throw LoadError("scenario: 'contacts' must be an array");
    for (const json& c : doc["contacts"]) sc.contacts.push_back(parse_contact(c));
  }
  if (doc.contains("noise")) {
    const json& n = doc["noise"];
    reject_unknown(n, {"sigma", "mass_scale_error"}, "noise");
    if (n.contains("sigma")) sc.noise.sigma = get_number(n, "sigma", "noise");
    if (n.contains("mass_scale_error")) sc.noise.mass_scale_error = get_number(n, "mass_scale_error", "noise");
  }
  if (doc.contains("detection")) {
    json det = doc["detection"];
    if (!det.is_object()) throw LoadError("scenario: 'detection' must be an object");
    if (det.contains("qdd_source")) {
      const json& src = det["qdd_source"];
      if (src == "exact") {
        sc.qdd_source = AccelerationSource::kExact;
      } else if (src == "filtered") {
        sc.qdd_source = AccelerationSource::kFiltered;
      } else {
        throw LoadError("scenario: 'detection.qdd_source' must be \"exact\" or \"filtered\"");
      }
      det.erase("qdd_source");
    }
    if (det.contains("qdd_cutoff_hz")) {
      sc.qdd_cutoff_hz = get_number(det, "qdd_cutoff_hz", "detection");
      det.erase("qdd_cutoff_hz");
    }
    apply_detection_patch(sc.detection, det);
  }
  if (doc.contains("estimation")) apply_estimation_patch(sc.estimation, doc["estimation"]);
  if (doc.contains("planner")) apply_planner_patch(sc.planner, doc["planner"]);
  sc.duration = get_number(doc, "duration", "");
  if (doc.contains("sample_rate")) sc.sample_rate = get_number(doc, "sample_rate", "");
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned() && !doc["seed"].is_number_integer()) {
      throw LoadError("scenario: 'seed' must be an integer");
    }
    sc.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("force_limit")) sc.force_limit = get_number(doc, "force_limit", "");

  sc.validate();
  return sc;
}

json load_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError("cannot open " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError(file.string() + ": " + e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& file) {
  Scenario sc = parse_scenario(load_json_file(file), file.parent_path());
  sc.source = file;
  return sc;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw LoadError("override '" + assignment + "' must have the form KEY=VALUE");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &doc;
  std::stringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) path.push_back(part);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    json& next = (*node)[path[i]];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) throw LoadError("override '" + key + "' walks into a non-object");
    node = &next;
  }
  (*node)[path.back()] = value;
}

VecX simulate_measured_torque(const RobotModel& true_model, const VecX& q, const VecX& qd,
                              const VecX& qdd, std::span<const AppliedForce> contacts, double sigma,
                              Rng& rng) {
  const FrameSet frames = forward_kinematics(true_model, q);
  VecX tau = inverse_dynamics(true_model, q, qd, qdd);
  for (const AppliedForce& c : contacts) {
    tau += point_jacobian(true_model, frames, c.link, c.s).transpose() * c.force;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index j = 0; j < tau.size(); ++j) tau[j] += sigma * normal(rng);
  return tau;
}

}  // namespace contactplan
