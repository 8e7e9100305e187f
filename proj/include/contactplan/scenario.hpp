#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "contactplan/adaptive_planner.hpp"
#include "contactplan/contact_detection.hpp"
#include "contactplan/force_estimation.hpp"
#include "contactplan/reference_path.hpp"
#include "contactplan/robot_model.hpp"

namespace contactplan {

enum class ForceProfile { kConstant, kTrapezoid, kHalfSine };

const char* to_string(ForceProfile profile);

// Scripted contact with a body-fixed point of application.
struct GroundTruthContact {
  int link = 1;
  double s = 0.5;
  Vec3 force = Vec3::Zero();  // peak force
  ForceProfile profile = ForceProfile::kConstant;
  double ramp = 0.05;  // s, trapezoid rise/fall time
  double t_start = 0.0;
  double t_end = 0.0;

  bool active(double t) const { return t >= t_start && t < t_end; }
  Vec3 force_at(double t) const;
};

struct NoiseConfig {
  double sigma = 0.0;             // N*m, i.i.d. per joint and tick
  double mass_scale_error = 0.0;  // true masses are (1 + delta) times the model's
};

struct TrackingConfig {
  VecX q0;
  double ik_damping = 0.01;
  double ik_gain = 50.0;     // 1/s, tip position feedback
  double ramp_time = 0.5;    // s, speed ramp at start and end of the path
  double abort_error = 0.05;     // m
  double abort_duration = 0.5;   // s
};

enum class AccelerationSource { kExact, kFiltered };

struct Scenario {
  std::filesystem::path source;
  std::filesystem::path robot_file;
  RobotModel model;
  ReferencePath path;
  TrackingConfig tracking;
  std::vector<GroundTruthContact> contacts;
  NoiseConfig noise;
  DetectionConfig detection;
  AccelerationSource qdd_source = AccelerationSource::kExact;
  double qdd_cutoff_hz = 20.0;
  EstimationConfig estimation;
  PlannerConfig planner;
  double duration = 0.0;
  double sample_rate = 1000.0;
  std::uint64_t seed = 1;
  double force_limit = 100.0;  // N, bound on scripted and pushed forces
  std::string description;

  long tick_count() const;
  double dt() const { return 1.0 / sample_rate; }
  void validate() const;
};

// `base_dir` resolves relative robot and path references.
Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir);
Scenario load_scenario(const std::filesystem::path& file);
// Applies `key.sub=value` overrides to a scenario document before parsing.
void apply_override(nlohmann::json& doc, const std::string& assignment);
nlohmann::json load_json_file(const std::filesystem::path& file);

GroundTruthContact parse_contact(const nlohmann::json& doc);
nlohmann::json contact_to_json(const GroundTruthContact& contact);
void validate_contact(const GroundTruthContact& contact, const RobotModel& model, double force_limit);

void apply_detection_patch(DetectionConfig& config, const nlohmann::json& patch);
void apply_estimation_patch(EstimationConfig& config, const nlohmann::json& patch);
void apply_planner_patch(PlannerConfig& config, const nlohmann::json& patch);

nlohmann::json detection_to_json(const DetectionConfig& config);
nlohmann::json estimation_to_json(const EstimationConfig& config);
nlohmann::json planner_to_json(const PlannerConfig& config);

struct AppliedForce {
  int link = 1;
  double s = 0.5;
  Vec3 force = Vec3::Zero();
};

using Rng = std::mt19937_64;

// tau_meas = ID_true(q, qd, qdd) + sum_c J_c^T F_c + noise. One normal draw per
// joint is taken every call regardless of sigma, so the noise stream does not
// depend on the configuration.
VecX simulate_measured_torque(const RobotModel& true_model, const VecX& q, const VecX& qd,
                              const VecX& qdd, std::span<const AppliedForce> contacts, double sigma,
                              Rng& rng);

}  // namespace contactplan
