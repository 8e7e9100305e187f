#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "contactplan/errors.hpp"
#include "contactplan/metrics.hpp"
#include "contactplan/scenario.hpp"
#include "contactplan/service.hpp"
#include "contactplan/simulation.hpp"
#include "contactplan/trace_io.hpp"

using namespace contactplan;
using nlohmann::json;

namespace {

constexpr int kExitScenario = 2;
constexpr int kExitAbort = 3;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("contactplan");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("CONTACTPLAN_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only honour real names.
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
    else spdlog::warn("CONTACTPLAN_LOG: unknown level '{}'", env);
  }
}

struct ScenarioArgs {
  std::string file;
  std::optional<std::uint64_t> seed;
  std::optional<double> rate;
  std::vector<std::string> overrides;
};

Scenario load_with_overrides(const ScenarioArgs& a) {
  json doc = load_json_file(a.file);
  if (a.seed) doc["seed"] = *a.seed;
  if (a.rate) doc["sample_rate"] = *a.rate;
  for (const std::string& o : a.overrides) apply_override(doc, o);
  Scenario sc = parse_scenario(doc, std::filesystem::path(a.file).parent_path());
  sc.source = a.file;
  return sc;
}

void print_summary(const MetricsReport& m) {
  std::printf("ticks            %ld\n", m.ticks);
  std::printf("episodes         %zu\n", m.episodes.size());
  std::printf("false positives  %d\n", m.false_positives);
  std::printf("bumps            %d\n", m.bumps);
  if (m.torque_mae) std::printf("torque MAE       %.4f N*m\n", *m.torque_mae);
  std::printf("goal error       %.6f m\n", m.goal_error);
  for (const ContactMetrics& c : m.contacts) {
    std::printf("contact %d: ", c.contact);
    if (c.detection_latency) {
      std::printf("latency %ld ticks", *c.detection_latency);
    } else {
      std::printf("not detected");
    }
    if (c.clear_latency) std::printf(", cleared after %ld ticks", *c.clear_latency);
    if (c.estimates > 0) {
      std::printf(", %d estimates, force error %.3f N (max %.3f)", c.estimates, c.force_error, c.force_error_max);
    }
    if (c.location_error) std::printf(", location error %.4f", *c.location_error);
    std::printf("\n");
  }
  if (m.aborted) std::printf("RUN ABORTED\n");
}

int cmd_run(const ScenarioArgs& a, const std::string& out_dir) {
  const Scenario sc = load_with_overrides(a);
  spdlog::info("running {} ({} ticks, seed {})", a.file, sc.tick_count(), sc.seed);
  const RunTrace trace = run(sc);
  const MetricsReport metrics = compute_metrics(trace, sc);
  export_trace(trace, sc, metrics, out_dir);
  print_summary(metrics);
  if (trace.aborted) {
    spdlog::error("{}", trace.abort_reason);
    return kExitAbort;
  }
  return 0;
}

int cmd_estimate(const std::string& trace_file, const std::string& chain, const std::string& scenario_file,
                 const std::vector<std::string>& overrides, std::optional<int> link, const std::string& out) {
  DetectionConfig det;
  EstimationConfig est;
  PlannerConfig plan;
  std::optional<RobotModel> model;
  if (!scenario_file.empty()) {
    const Scenario sc = load_scenario(scenario_file);
    det = sc.detection;
    est = sc.estimation;
    plan = sc.planner;
    model = sc.model;
  }
  if (!chain.empty()) model = load_chain(chain);
  if (!model) throw ArgumentError("estimate needs --chain or --scenario");
  json cfg = {{"detection", detection_to_json(det)},
              {"estimation", estimation_to_json(est)},
              {"planner", planner_to_json(plan)}};
  for (const std::string& o : overrides) apply_override(cfg, o);
  for (const auto& [key, _] : cfg.items()) {
    if (key != "detection" && key != "estimation" && key != "planner") {
      throw LoadError("override '" + key + "' is not a detection, estimation or planner key");
    }
  }
  apply_detection_patch(det, cfg["detection"]);
  apply_estimation_patch(est, cfg["estimation"]);
  apply_planner_patch(plan, cfg["planner"]);
  det.validate(model->dof());
  est.validate();
  plan.validate();

  const std::vector<TickRecord> ticks = load_ticks_csv(trace_file);
  const auto windows = estimate_trace(ticks, *model, det, est, plan, link);
  std::ofstream file;
  if (!out.empty()) {
    file.open(out, std::ios::binary);
    if (!file) throw IoError("cannot write " + out);
  }
  std::ostream& os = out.empty() ? std::cout : file;
  for (const OfflineWindow& w : windows) {
    if (!link && !w.gated) continue;
    os << offline_window_to_json(w).dump() << '\n';
  }
  return 0;
}

int cmd_serve(const ScenarioArgs& a, unsigned short port, double speed, const std::string& address) {
  const Scenario sc = load_with_overrides(a);
  ServeOptions opt;
  opt.port = port;
  opt.speed = speed;
  opt.address = address;
  Service service(sc, opt);
  std::printf("listening on ws://%s:%u\n", address.c_str(), static_cast<unsigned>(service.port()));
  std::fflush(stdout);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  service.run(g_stop);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Contact-informed adaptive path planning simulator"};
  app.require_subcommand(1);

  ScenarioArgs run_args;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "Run a scenario and export its trace");
  run->add_option("scenario", run_args.file, "Scenario JSON file")->required();
  run->add_option("-o,--out", out_dir, "Output directory")->required();
  run->add_option("--seed", run_args.seed, "Override the scenario seed");
  run->add_option("--rate", run_args.rate, "Override the sample rate (Hz)");
  run->add_option("--config", run_args.overrides, "KEY=VALUE scenario override, e.g. detection.theta_tau=1.5");

  std::string trace_file, chain, est_scenario, est_out;
  std::vector<std::string> est_overrides;
  std::optional<int> link;
  auto* est = app.add_subcommand("estimate", "Estimate contacts offline from a ticks.csv trace");
  est->add_option("trace", trace_file, "ticks.csv from a run")->required();
  est->add_option("--chain", chain, "Robot chain file");
  est->add_option("--scenario", est_scenario, "Take model and configs from a scenario file");
  est->add_option("--link", link, "Estimate every window on this link");
  est->add_option("--config", est_overrides, "KEY=VALUE config override");
  est->add_option("-o,--out", est_out, "Write JSON lines here instead of stdout");

  ScenarioArgs serve_args;
  unsigned short port = 8765;
  double speed = 1.0;
  std::string address = "127.0.0.1";
  auto* serve = app.add_subcommand("serve", "Serve a live simulation over WebSocket");
  serve->add_option("scenario", serve_args.file, "Scenario JSON file")->required();
  serve->add_option("--port", port, "TCP port, 0 for any free port");
  serve->add_option("--address", address, "Listen address");
  serve->add_option("--speed", speed, "Simulated seconds per wall-clock second");
  serve->add_option("--seed", serve_args.seed, "Override the scenario seed");
  serve->add_option("--rate", serve_args.rate, "Override the sample rate (Hz)");
  serve->add_option("--config", serve_args.overrides, "KEY=VALUE scenario override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help lands here too, with code 0
    return app.exit(e) == 0 ? 0 : kExitScenario;
  }

  try {
    if (*run) return cmd_run(run_args, out_dir);
    if (*est) return cmd_estimate(trace_file, chain, est_scenario, est_overrides, link, est_out);
    if (*serve) return cmd_serve(serve_args, port, speed, address);
  } catch (const LoadError& e) {
    spdlog::error("{}", e.what());
    return kExitScenario;
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return kExitScenario;
  } catch (const ConfigurationError& e) {
    spdlog::error("{}", e.what());
    return kExitScenario;
  } catch (const ArgumentError& e) {
    spdlog::error("{}", e.what());
    return kExitScenario;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
