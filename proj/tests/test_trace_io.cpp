#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "contactplan/errors.hpp"
#include "contactplan/trace_io.hpp"

using namespace contactplan;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = CONTACTPLAN_FIXTURE_DIR;

Scenario fixture(const std::string& name, const std::vector<std::string>& overrides = {}) {
  json doc = load_json_file(kFixtures / name);
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_scenario(doc, kFixtures);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("contactplan_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("empty trace gives a headers-only CSV") {
  std::ostringstream out;
  write_ticks_csv(out, {}, 7);
  const std::string text = out.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
  CHECK(text.rfind("k,t,s_path,q1,", 0) == 0);
  std::istringstream in(text);
  CHECK(read_ticks_csv(in, "empty.csv").empty());
  CHECK(tick_columns(7).size() == 3 + 6 * 7 + 10);
}

TEST_CASE("fixture export round trip and determinism") {
  const Scenario sc = fixture("push_link4.json", {"duration=6"});
  const RunTrace trace = run(sc);
  const MetricsReport metrics = compute_metrics(trace, sc);
  const fs::path a = scratch("export_a"), b = scratch("export_b"), c = scratch("export_c");
  export_trace(trace, sc, metrics, a);
  export_trace(trace, sc, metrics, b);
  for (const char* f : {"ticks.csv", "windows.jsonl", "deformed_path.json", "metrics.json", "plot_data.json"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  // A second run with the same seed exports identical bytes.
  const RunTrace again = run(sc);
  export_trace(again, sc, compute_metrics(again, sc), c);
  CHECK(slurp(a / "ticks.csv") == slurp(c / "ticks.csv"));
  CHECK(slurp(a / "windows.jsonl") == slurp(c / "windows.jsonl"));

  const auto ticks = load_ticks_csv(a / "ticks.csv");
  REQUIRE(ticks.size() == trace.ticks.size());
  for (std::size_t k = 0; k < ticks.size(); k += 37) {
    CHECK(ticks[k].k == trace.ticks[k].k);
    CHECK(ticks[k].t == trace.ticks[k].t);
    CHECK(ticks[k].q == trace.ticks[k].q);
    CHECK(ticks[k].tau_hat == trace.ticks[k].tau_hat);
    CHECK(ticks[k].eta_bar == trace.ticks[k].eta_bar);
    CHECK(ticks[k].contact == trace.ticks[k].contact);
    CHECK(ticks[k].link == trace.ticks[k].link);
    CHECK(ticks[k].tip == trace.ticks[k].tip);
  }

  const auto windows = load_windows_jsonl(a / "windows.jsonl");
  REQUIRE(windows.size() == trace.windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    CHECK(windows[i].index == trace.windows[i].index);
    CHECK(windows[i].gated == trace.windows[i].gated);
    CHECK(windows[i].outcome == trace.windows[i].outcome);
    CHECK(windows[i].increment == trace.windows[i].increment);
    CHECK(windows[i].estimate.has_value() == trace.windows[i].estimate.has_value());
    if (windows[i].estimate) {
      CHECK(windows[i].estimate->force == trace.windows[i].estimate->force);
      CHECK(windows[i].estimate->s_hat == trace.windows[i].estimate->s_hat);
      CHECK(windows[i].estimate->link == trace.windows[i].estimate->link);
    }
  }

  const ReferencePath deformed = load_path(a / "deformed_path.json");
  REQUIRE(deformed.samples().size() == trace.deformed_path.size());
  for (std::size_t i = 0; i < deformed.samples().size(); ++i) {
    CHECK(deformed.samples()[i].position == trace.deformed_path[i].position);
  }
  const json dp = load_json_file(a / "deformed_path.json");
  CHECK(dp["bumps"].size() == trace.deformation.bumps().size());

  const MetricsReport back = metrics_from_json(load_json_file(a / "metrics.json"));
  CHECK(back.episodes.size() == metrics.episodes.size());
  CHECK(back.bumps == metrics.bumps);
  CHECK(back.goal_error == metrics.goal_error);
  CHECK(metrics_to_json(back) == metrics_to_json(metrics));

  const json plot = load_json_file(a / "plot_data.json");
  CHECK(plot["series"]["t"].size() == plot["series"]["eta_bar"].size());
  CHECK(plot["deformed_path"].size() == trace.deformed_path.size());
}

TEST_CASE("offline estimation reproduces the online estimates") {
  const Scenario sc = fixture("push_link4.json", {"noise.sigma=0", "duration=6"});
  const RunTrace trace = run(sc);
  std::ostringstream csv;
  write_ticks_csv(csv, trace.ticks, 7);
  std::istringstream in(csv.str());
  const auto ticks = read_ticks_csv(in, "ticks.csv");
  const auto offline = estimate_trace(ticks, sc.model, sc.detection, sc.estimation, sc.planner);
  REQUIRE(offline.size() == trace.windows.size());
  int gated = 0;
  for (std::size_t i = 0; i < offline.size(); ++i) {
    CHECK(offline[i].gated == trace.windows[i].gated);
    if (!offline[i].gated) continue;
    ++gated;
    CHECK(offline[i].estimate->force == trace.windows[i].estimate->force);
    CHECK(offline[i].estimate->s_hat == trace.windows[i].estimate->s_hat);
    CHECK(offline[i].estimate->cost == trace.windows[i].estimate->cost);
  }
  CHECK(gated > 0);
}

TEST_CASE("all-zero residual trace is unidentifiable") {
  const Scenario sc = fixture("contact_free.json", {"noise.sigma=0", "duration=1"});
  RunTrace trace = run(sc);
  for (TickRecord& t : trace.ticks) t.tau_hat.setZero();
  const auto windows = estimate_trace(trace.ticks, sc.model, sc.detection, sc.estimation, sc.planner, 4);
  REQUIRE_FALSE(windows.empty());
  for (const OfflineWindow& w : windows) {
    REQUIRE(w.estimate);
    CHECK(w.estimate->force.norm() == 0.0);
    CHECK(w.estimate->unidentifiable);
    CHECK_FALSE(w.gated);
  }
  CHECK_THROWS_AS(estimate_trace(trace.ticks, sc.model, sc.detection, sc.estimation, sc.planner, 9),
                  ArgumentError);
}

TEST_CASE("malformed CSV is reported with its line") {
  const Scenario sc = fixture("contact_free.json", {"duration=0.01"});
  const RunTrace trace = run(sc);
  std::ostringstream csv;
  write_ticks_csv(csv, trace.ticks, 7);
  const std::string text = csv.str();

  auto error_of = [](const std::string& body) -> std::string {
    std::istringstream in(body);
    try {
      read_ticks_csv(in, "trace.csv");
    } catch (const LoadError& e) {
      return e.what();
    }
    return "";
  };

  SUBCASE("truncated mid-row") {
    const std::string cut = text.substr(0, text.size() - 40);
    const long lines = std::count(cut.begin(), cut.end(), '\n') + 1;
    const std::string err = error_of(cut);
    CHECK(err.find("trace.csv:" + std::to_string(lines) + ":") != std::string::npos);
  }
  SUBCASE("bad number") {
    std::string bad = text;
    const auto pos = bad.find('\n', bad.find('\n') + 1) + 3;
    bad.insert(pos, "x");
    CHECK(error_of(bad).find("trace.csv:3:") != std::string::npos);
  }
  SUBCASE("bad header") {
    CHECK(error_of("a,b,c\n1,2,3\n").find("trace.csv:1:") != std::string::npos);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_ticks_csv("/nonexistent/ticks.csv"), LoadError); }
}

TEST_CASE("estimate JSON round trip") {
  ContactEstimate e;
  e.link = 5;
  e.s_hat = 0.123456789012345;
  e.force = Vec3(1.0 / 3, -2.5, 7.25);
  e.cost = 0.01;
  e.clamped = true;
  e.low_observability = true;
  e.samples = 50;
  const ContactEstimate back = estimate_from_json(estimate_to_json(e));
  CHECK(back.link == 5);
  CHECK(back.s_hat == e.s_hat);
  CHECK(back.force == e.force);
  CHECK(back.clamped);
  CHECK(back.low_observability);
  CHECK(back.samples == 50);
}

TEST_CASE("export into an unwritable location") {
  const Scenario sc = fixture("contact_free.json", {"duration=0.01"});
  const RunTrace trace = run(sc);
  const fs::path file = scratch("blocker") / "file";
  std::ofstream(file) << "x";
  CHECK_THROWS_AS(export_trace(trace, sc, compute_metrics(trace, sc), file / "sub"), IoError);
}

TEST_CASE("subnormal and overflowing values in the CSV") {
  const Scenario sc = fixture("contact_free.json", {"duration=0.003"});
  RunTrace trace = run(sc);
  trace.ticks[1].eta_bar = 2.0854034378442916e-308;
  std::ostringstream csv;
  write_ticks_csv(csv, trace.ticks, 7);
  std::istringstream in(csv.str());
  CHECK(read_ticks_csv(in, "trace.csv")[1].eta_bar == 2.0854034378442916e-308);

  std::string text = csv.str();
  const std::string needle = "2.0854034378442916e-308";
  text.replace(text.find(needle), needle.size(), "1e999");
  std::istringstream bad(text);
  CHECK_THROWS_AS(read_ticks_csv(bad, "trace.csv"), LoadError);
}

TEST_CASE("bare residual trace gives the same offline estimates") {
  const Scenario sc = fixture("push_link4.json", {"duration=5"});
  const RunTrace trace = run(sc);
  std::string csv = "t";
  for (int j = 1; j <= 7; ++j) csv += ",q" + std::to_string(j);
  for (int j = 1; j <= 7; ++j) csv += ",tau_hat" + std::to_string(j);
  csv += '\n';
  char buf[32];
  for (const TickRecord& r : trace.ticks) {
    std::snprintf(buf, sizeof buf, "%.17g", r.t);
    csv += buf;
    for (const VecX* v : {&r.q, &r.tau_hat}) {
      for (int j = 0; j < 7; ++j) {
        std::snprintf(buf, sizeof buf, ",%.17g", (*v)[j]);
        csv += buf;
      }
    }
    csv += '\n';
  }
  std::istringstream in(csv);
  const auto bare = read_ticks_csv(in, "bare.csv");
  REQUIRE(bare.size() == trace.ticks.size());
  CHECK(bare[17].k == 17);
  CHECK(bare[17].qd.isZero());

  const auto a = estimate_trace(bare, sc.model, sc.detection, sc.estimation, sc.planner);
  const auto b = estimate_trace(trace.ticks, sc.model, sc.detection, sc.estimation, sc.planner);
  REQUIRE(a.size() == b.size());
  int gated = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].gated == b[i].gated);
    if (!a[i].gated) continue;
    ++gated;
    CHECK(a[i].estimate->force == b[i].estimate->force);
    CHECK(a[i].estimate->s_hat == b[i].estimate->s_hat);
  }
  CHECK(gated > 0);
}
