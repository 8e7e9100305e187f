#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "contactplan/metrics.hpp"
#include "contactplan/simulation.hpp"

namespace contactplan {

// Column order of ticks.csv; per-joint columns are suffixed 1..n.
std::vector<std::string> tick_columns(int dof);
// Bare residual trace: t, q1..qn, tau_hat1..n. Enough for offline estimation.
std::vector<std::string> residual_columns(int dof);

void write_ticks_csv(std::ostream& out, const std::vector<TickRecord>& ticks, int dof);
// Reads either column layout; fields missing from a residual trace are zero.
// `name` labels error messages ("name:LINE: ...").
std::vector<TickRecord> read_ticks_csv(std::istream& in, const std::string& name);
std::vector<TickRecord> load_ticks_csv(const std::filesystem::path& file);

nlohmann::json estimate_to_json(const ContactEstimate& e);
ContactEstimate estimate_from_json(const nlohmann::json& doc);

nlohmann::json window_to_json(const WindowRecord& w);
WindowRecord window_from_json(const nlohmann::json& doc);
std::vector<WindowRecord> load_windows_jsonl(const std::filesystem::path& file);

nlohmann::json bump_to_json(const BumpRecord& b);
// {"samples": [...], "bumps": [...]}; readable by load_path.
nlohmann::json deformed_path_to_json(const RunTrace& trace);

// Downsampled series for external plotting.
nlohmann::json plot_data(const RunTrace& trace, const Scenario& scenario, int max_points = 2000);

// Writes ticks.csv, windows.jsonl, deformed_path.json, metrics.json and plot_data.json.
void export_trace(const RunTrace& trace, const Scenario& scenario, const MetricsReport& metrics,
                  const std::filesystem::path& directory);

// Offline windowed estimation over a recorded trace.
struct OfflineWindow {
  int index = 0;
  double t_end = 0.0;
  double contact_fraction = 0.0;
  bool gated = false;
  std::optional<ContactEstimate> estimate;
};

nlohmann::json offline_window_to_json(const OfflineWindow& w);

// Replays the detection pipeline over the trace. With `forced_link`, every
// window is estimated on that link over its last window_n ticks regardless of
// the detector.
std::vector<OfflineWindow> estimate_trace(const std::vector<TickRecord>& ticks, const RobotModel& model,
                                          const DetectionConfig& detection,
                                          const EstimationConfig& estimation,
                                          const PlannerConfig& planner,
                                          std::optional<int> forced_link = std::nullopt);

}  // namespace contactplan
