#pragma once

#include <optional>
#include <vector>

#include <json.hpp>

#include "contactplan/simulation.hpp"

namespace contactplan {

// A maximal run of ticks with C = 1.
struct Episode {
  long k_on = 0;
  std::optional<long> k_off;  // first tick with C = 0 again
  double t_on = 0.0;
  std::optional<double> t_off;
};

struct ContactMetrics {
  int contact = 0;  // index into RunTrace::contacts
  long k_start = 0;
  std::optional<long> k_end;  // first tick without force
  std::optional<int> episode;
  std::optional<long> detection_latency;  // ticks from onset to C = 1, inclusive
  std::optional<long> clear_latency;      // ticks from release to C = 0, inclusive
  int estimates = 0;
  int link_hits = 0;
  double torque_mae = 0.0;       // N*m, mean over estimates
  double force_error = 0.0;      // N, mean ||F_hat - F_true||
  double force_error_max = 0.0;  // N
  std::optional<double> location_error;  // mean |s_hat - s_true| over estimates on the true link
};

struct MetricsReport {
  long ticks = 0;
  bool aborted = false;
  std::vector<Episode> episodes;
  std::vector<ContactMetrics> contacts;
  int false_positives = 0;
  int bumps = 0;
  int gated_windows = 0;
  std::optional<double> torque_mae;  // N*m, over all gated estimates
  double goal_error = 0.0;          // m, final tip against the goal
};

std::vector<Episode> find_episodes(const std::vector<TickRecord>& ticks);

MetricsReport compute_metrics(const RunTrace& trace, const Scenario& scenario);

nlohmann::json metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::json& doc);

}  // namespace contactplan
