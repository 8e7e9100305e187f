#include "contactplan/reference_path.hpp"

#include <algorithm>
#include <fstream>

#include "contactplan/errors.hpp"

namespace contactplan {

using nlohmann::json;

ReferencePath::ReferencePath(std::vector<PathSample> samples) : samples_(std::move(samples)) {
  if (samples_.size() < 2) throw ValidationError("path needs at least two samples");
  if (samples_.front().s != 0.0 || samples_.back().s != 1.0) {
    throw ValidationError("path parameter must run from s = 0 to s = 1");
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!samples_[i].position.allFinite()) throw ValidationError("path positions must be finite");
    if (i > 0 && !(samples_[i].s > samples_[i - 1].s)) {
      throw ValidationError("path parameter must be strictly increasing");
    }
    samples_[i].orientation.normalize();
  }
}

ReferencePath ReferencePath::line(const Vec3& start, const Vec3& goal, int count,
                                  const Eigen::Quaterniond& orientation) {
  if (count < 2) throw ArgumentError("a line path needs at least two samples");
  std::vector<PathSample> samples;
  for (int i = 0; i < count; ++i) {
    const double s = (i == count - 1) ? 1.0 : static_cast<double>(i) / (count - 1);
    samples.push_back({s, start + s * (goal - start), orientation});
  }
  samples.back().position = goal;
  return ReferencePath(std::move(samples));
}

Pose ReferencePath::at(double s) const {
  if (s <= 0.0) return {samples_.front().position, samples_.front().orientation};
  if (s >= 1.0) return {samples_.back().position, samples_.back().orientation};
  const auto upper = std::upper_bound(samples_.begin(), samples_.end(), s,
                                      [](double v, const PathSample& p) { return v < p.s; });
  const PathSample& b = *upper;
  const PathSample& a = *(upper - 1);
  const double u = (s - a.s) / (b.s - a.s);
  return {a.position + u * (b.position - a.position), a.orientation.slerp(u, b.orientation)};
}

double ReferencePath::length() const {
  double total = 0.0;
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    total += (samples_[i].position - samples_[i - 1].position).norm();
  }
  return total;
}

ReferencePath parse_path(const json& doc) {
  const json* list = &doc;
  if (doc.is_object()) {
    if (!doc.contains("samples")) throw LoadError("path file: missing key 'samples'");
    list = &doc["samples"];
  }
  if (!list->is_array()) throw LoadError("path file: expected an array of samples");
  std::vector<PathSample> samples;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const json& e = (*list)[i];
    const std::string where = "path sample " + std::to_string(i);
    if (!e.is_object()) throw LoadError(where + " must be an object");
    for (const auto& [key, _] : e.items()) {
      if (key != "s" && key != "xyz" && key != "quaternion") {
        throw LoadError(where + ": unknown key '" + key + "'");
      }
    }
    if (!e.contains("s") || !e["s"].is_number()) throw LoadError(where + ": missing numeric 's'");
    if (!e.contains("xyz") || !e["xyz"].is_array() || e["xyz"].size() != 3) {
      throw LoadError(where + ": 'xyz' must hold 3 numbers");
    }
    PathSample p;
    p.s = e["s"].get<double>();
    p.position = Vec3(e["xyz"][0].get<double>(), e["xyz"][1].get<double>(), e["xyz"][2].get<double>());
    if (e.contains("quaternion")) {
      const json& q = e["quaternion"];
      if (!q.is_array() || q.size() != 4) throw LoadError(where + ": 'quaternion' must be [w, x, y, z]");
      p.orientation = Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                                         q[3].get<double>());
    }
    samples.push_back(p);
  }
  return ReferencePath(std::move(samples));
}

ReferencePath load_path(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError("cannot open path file " + file.string());
  try {
    return parse_path(json::parse(in));
  } catch (const json::exception& e) {
    throw LoadError("path file " + file.string() + ": " + e.what());
  }
}

json path_samples_to_json(const std::vector<PathSample>& samples) {
  json out = json::array();
  for (const auto& p : samples) {
    const auto& q = p.orientation;
    out.push_back({{"s", p.s},
                   {"xyz", {p.position.x(), p.position.y(), p.position.z()}},
                   {"quaternion", {q.w(), q.x(), q.y(), q.z()}}});
  }
  return out;
}

}  // namespace contactplan
