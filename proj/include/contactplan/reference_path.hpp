#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "contactplan/robot_model.hpp"

namespace contactplan {

struct PathSample {
  double s = 0.0;
  Vec3 position = Vec3::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

struct Pose {
  Vec3 position = Vec3::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

// Original Cartesian path x_d(s), s in [0, 1]: piecewise linear in position,
// slerp in orientation.
class ReferencePath {
 public:
  explicit ReferencePath(std::vector<PathSample> samples);

  // Straight segment with `count` evenly spaced samples and fixed orientation.
  static ReferencePath line(const Vec3& start, const Vec3& goal, int count,
                            const Eigen::Quaterniond& orientation = Eigen::Quaterniond::Identity());

  Pose at(double s) const;
  Vec3 position(double s) const { return at(s).position; }
  const std::vector<PathSample>& samples() const { return samples_; }
  double length() const;

 private:
  std::vector<PathSample> samples_;
};

// Path files: a JSON array of {"s", "xyz", "quaternion": [w, x, y, z]}, or an
// object with the same array under "samples" (deformed-path exports).
ReferencePath parse_path(const nlohmann::json& doc);
ReferencePath load_path(const std::filesystem::path& file);
nlohmann::json path_samples_to_json(const std::vector<PathSample>& samples);

}  // namespace contactplan
