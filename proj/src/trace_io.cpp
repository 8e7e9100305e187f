#include "contactplan/trace_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "contactplan/errors.hpp"

namespace contactplan {

using nlohmann::json;

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& v) { return {v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>()}; }

void put(std::string& line, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  if (!line.empty()) line += ',';
  line += buf;
}

void put(std::string& line, const VecX& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put(line, v[i]);
}

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  return out;
}

void close_out(std::ofstream& out, const std::filesystem::path& file) {
  out.flush();
  if (!out) throw IoError("write failed for " + file.string());
}

}  // namespace

std::vector<std::string> tick_columns(int dof) {
  std::vector<std::string> cols = {"k", "t", "s_path"};
  for (const char* group : {"q", "qd", "qdd", "tau_meas", "tau_model", "tau_hat"}) {
    for (int j = 1; j <= dof; ++j) cols.push_back(std::string(group) + std::to_string(j));
  }
  for (const char* c : {"eta", "eta_bar", "contact", "link", "tip_x", "tip_y", "tip_z", "target_x",
                        "target_y", "target_z"}) {
    cols.emplace_back(c);
  }
  return cols;
}

std::vector<std::string> residual_columns(int dof) {
  std::vector<std::string> cols = {"t"};
  for (const char* group : {"q", "tau_hat"}) {
    for (int j = 1; j <= dof; ++j) cols.push_back(std::string(group) + std::to_string(j));
  }
  return cols;
}

void write_ticks_csv(std::ostream& out, const std::vector<TickRecord>& ticks, int dof) {
  const auto cols = tick_columns(dof);
  std::string header;
  for (std::size_t i = 0; i < cols.size(); ++i) header += (i ? "," : "") + cols[i];
  out << header << '\n';
  for (const TickRecord& r : ticks) {
    std::string line = std::to_string(r.k);
    put(line, r.t);
    put(line, r.s_path);
    for (const VecX* v : {&r.q, &r.qd, &r.qdd, &r.tau_meas, &r.tau_model, &r.tau_hat}) put(line, *v);
    put(line, r.eta);
    put(line, r.eta_bar);
    line += r.contact ? ",1" : ",0";
    line += "," + std::to_string(r.link);
    put(line, r.tip);
    put(line, r.target);
    out << line << '\n';
  }
}

std::vector<TickRecord> read_ticks_csv(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw LoadError(name + ":1: missing header");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  int dof = 0;
  while (std::find(header.begin(), header.end(), "q" + std::to_string(dof + 1)) != header.end()) ++dof;
  const bool residual_only = dof > 0 && header == residual_columns(dof);
  if (dof == 0 || (!residual_only && header != tick_columns(dof))) {
    throw LoadError(name + ":1: unexpected header");
  }

  std::vector<TickRecord> out;
  const std::size_t ncols = header.size();
  std::vector<double> vals(ncols);
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(line_no) + ": ";
    std::size_t count = 0, pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      if (count >= ncols) throw LoadError(where + "too many fields");
      const std::string cell = line.substr(pos, comma - pos);
      char* end = nullptr;
      errno = 0;
      vals[count] = std::strtod(cell.c_str(), &end);
      // subnormals set ERANGE too but parse exactly
      if (cell.empty() || *end != '\0' || (errno == ERANGE && std::isinf(vals[count]))) {
        throw LoadError(where + "bad value '" + cell + "' in column " + header[count]);
      }
      ++count;
      pos = comma + 1;
    }
    if (count != ncols) {
      throw LoadError(where + "expected " + std::to_string(ncols) + " fields, found " + std::to_string(count));
    }
    TickRecord r;
    std::size_t c = 0;
    if (residual_only) {
      r.k = static_cast<long>(out.size());
      r.t = vals[c++];
      r.q.resize(dof);
      r.tau_hat.resize(dof);
      for (int j = 0; j < dof; ++j) r.q[j] = vals[c++];
      for (int j = 0; j < dof; ++j) r.tau_hat[j] = vals[c++];
      r.qd = r.qdd = r.tau_meas = r.tau_model = VecX::Zero(dof);
      out.push_back(std::move(r));
      continue;
    }
    r.k = static_cast<long>(vals[c++]);
    r.t = vals[c++];
    r.s_path = vals[c++];
    for (VecX* v : {&r.q, &r.qd, &r.qdd, &r.tau_meas, &r.tau_model, &r.tau_hat}) {
      v->resize(dof);
      for (int j = 0; j < dof; ++j) (*v)[j] = vals[c++];
    }
    r.eta = vals[c++];
    r.eta_bar = vals[c++];
    r.contact = vals[c++] != 0.0;
    r.link = static_cast<int>(vals[c++]);
    for (int i = 0; i < 3; ++i) r.tip[i] = vals[c++];
    for (int i = 0; i < 3; ++i) r.target[i] = vals[c++];
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<TickRecord> load_ticks_csv(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw LoadError("cannot open " + file.string());
  return read_ticks_csv(in, file.string());
}

json estimate_to_json(const ContactEstimate& e) {
  return {{"link", e.link},
          {"s_hat", e.s_hat},
          {"force", vec_json(e.force)},
          {"cost", e.cost},
          {"clamped", e.clamped},
          {"point", vec_json(e.point)},
          {"unidentifiable", e.unidentifiable},
          {"low_observability", e.low_observability},
          {"singular_ratio", e.singular_ratio},
          {"torque_mae", e.torque_mae},
          {"samples", e.samples},
          {"t_first", e.t_first},
          {"t_last", e.t_last}};
}

ContactEstimate estimate_from_json(const json& d) {
  ContactEstimate e;
  e.link = d.at("link").get<int>();
  e.s_hat = d.at("s_hat").get<double>();
  e.force = vec_from(d.at("force"));
  e.cost = d.at("cost").get<double>();
  e.clamped = d.at("clamped").get<bool>();
  e.point = vec_from(d.at("point"));
  e.unidentifiable = d.at("unidentifiable").get<bool>();
  e.low_observability = d.at("low_observability").get<bool>();
  e.singular_ratio = d.at("singular_ratio").get<double>();
  e.torque_mae = d.at("torque_mae").get<double>();
  e.samples = d.at("samples").get<int>();
  e.t_first = d.at("t_first").get<double>();
  e.t_last = d.at("t_last").get<double>();
  return e;
}

json window_to_json(const WindowRecord& w) {
  return {{"window", w.index},
          {"tick_end", w.tick_end},
          {"t_end", w.t_end},
          {"contact_fraction", w.contact_fraction},
          {"gated", w.gated},
          {"estimate", w.estimate ? estimate_to_json(*w.estimate) : json(nullptr)},
          {"f_bar", vec_json(w.summary.f_bar)},
          {"s_next", w.summary.s_next},
          {"outcome", w.outcome ? json(to_string(*w.outcome)) : json(nullptr)},
          {"deviation", vec_json(w.deviation)},
          {"increment", vec_json(w.increment)},
          {"horizon", w.horizon},
          {"episode_reset", w.episode_reset}};
}

WindowRecord window_from_json(const json& d) {
  WindowRecord w;
  w.index = d.at("window").get<int>();
  w.tick_end = d.at("tick_end").get<long>();
  w.t_end = d.at("t_end").get<double>();
  w.contact_fraction = d.at("contact_fraction").get<double>();
  w.gated = d.at("gated").get<bool>();
  if (!d.at("estimate").is_null()) w.estimate = estimate_from_json(d["estimate"]);
  w.summary.index = w.index;
  w.summary.f_bar = vec_from(d.at("f_bar"));
  if (w.gated) w.summary.f_hat = w.summary.f_bar;
  w.summary.s_next = d.at("s_next").get<double>();
  w.summary.contact_fraction = w.contact_fraction;
  if (!d.at("outcome").is_null()) {
    const std::string name = d["outcome"].get<std::string>();
    for (CommitOutcome o : {CommitOutcome::kCommitted, CommitOutcome::kSkippedLowContact,
                            CommitOutcome::kNoIncrement, CommitOutcome::kSkippedZeroHorizon}) {
      if (name == to_string(o)) w.outcome = o;
    }
    if (!w.outcome) throw LoadError("unknown window outcome '" + name + "'");
  }
  w.deviation = vec_from(d.at("deviation"));
  w.increment = vec_from(d.at("increment"));
  w.horizon = d.at("horizon").get<double>();
  w.episode_reset = d.at("episode_reset").get<bool>();
  return w;
}

std::vector<WindowRecord> load_windows_jsonl(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw LoadError("cannot open " + file.string());
  std::vector<WindowRecord> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(window_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw LoadError(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

json bump_to_json(const BumpRecord& b) {
  return {{"window", b.window}, {"start", b.start}, {"horizon", b.horizon}, {"increment", vec_json(b.increment)}};
}

json deformed_path_to_json(const RunTrace& trace) {
  json bumps = json::array();
  for (const BumpRecord& b : trace.deformation.bumps()) bumps.push_back(bump_to_json(b));
  return {{"samples", path_samples_to_json(trace.deformed_path)}, {"bumps", bumps}};
}

json plot_data(const RunTrace& trace, const Scenario& scenario, int max_points) {
  const std::size_t n = trace.ticks.size();
  const std::size_t stride = std::max<std::size_t>(1, (n + max_points - 1) / std::max(1, max_points));
  json t = json::array(), s = json::array(), eta_bar = json::array(), contact = json::array(),
       tip = json::array(), target = json::array(), tau_hat = json::array();
  for (std::size_t i = 0; i < n; i += stride) {
    const TickRecord& r = trace.ticks[i];
    t.push_back(r.t);
    s.push_back(r.s_path);
    eta_bar.push_back(r.eta_bar);
    contact.push_back(r.contact ? 1 : 0);
    tip.push_back(vec_json(r.tip));
    target.push_back(vec_json(r.target));
    json row = json::array();
    for (Eigen::Index j = 0; j < r.tau_hat.size(); ++j) row.push_back(r.tau_hat[j]);
    tau_hat.push_back(row);
  }
  json estimates = json::array();
  for (const WindowRecord& w : trace.windows) {
    if (!w.estimate) continue;
    estimates.push_back({{"t", w.t_end},
                         {"gated", w.gated},
                         {"link", w.estimate->link},
                         {"s_hat", w.estimate->s_hat},
                         {"force", vec_json(w.estimate->force)},
                         {"point", vec_json(w.estimate->point)}});
  }
  json truth = json::array();
  for (const GroundTruthContact& c : trace.contacts) truth.push_back(contact_to_json(c));
  json reference = json::array();
  for (const PathSample& p : trace.deformed_path) reference.push_back(vec_json(scenario.path.at(p.s).position));
  json deformed = json::array();
  for (const PathSample& p : trace.deformed_path) deformed.push_back(vec_json(p.position));
  return {{"stride", stride},
          {"theta_tau", scenario.detection.theta_tau},
          {"series", {{"t", t}, {"s_path", s}, {"eta_bar", eta_bar}, {"contact", contact},
                      {"tip", tip}, {"target", target}, {"tau_hat", tau_hat}}},
          {"estimates", estimates},
          {"contacts", truth},
          {"reference_path", reference},
          {"deformed_path", deformed}};
}

void export_trace(const RunTrace& trace, const Scenario& scenario, const MetricsReport& metrics,
                  const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  {
    const auto file = dir / "ticks.csv";
    auto out = open_out(file);
    write_ticks_csv(out, trace.ticks, scenario.model.dof());
    close_out(out, file);
  }
  {
    const auto file = dir / "windows.jsonl";
    auto out = open_out(file);
    for (const WindowRecord& w : trace.windows) out << window_to_json(w).dump() << '\n';
    close_out(out, file);
  }
  const std::pair<const char*, json> docs[] = {
      {"deformed_path.json", deformed_path_to_json(trace)},
      {"metrics.json", metrics_to_json(metrics)},
      {"plot_data.json", plot_data(trace, scenario)},
  };
  for (const auto& [name, doc] : docs) {
    const auto file = dir / name;
    auto out = open_out(file);
    out << doc.dump(1) << '\n';
    close_out(out, file);
  }
}

json offline_window_to_json(const OfflineWindow& w) {
  return {{"window", w.index},
          {"t_end", w.t_end},
          {"contact_fraction", w.contact_fraction},
          {"gated", w.gated},
          {"estimate", w.estimate ? estimate_to_json(*w.estimate) : json(nullptr)}};
}

std::vector<OfflineWindow> estimate_trace(const std::vector<TickRecord>& ticks, const RobotModel& model,
                                          const DetectionConfig& detection,
                                          const EstimationConfig& estimation,
                                          const PlannerConfig& planner,
                                          std::optional<int> forced_link) {
  if (forced_link && (*forced_link < 1 || *forced_link > model.dof())) {
    throw ArgumentError("link " + std::to_string(*forced_link) + " is outside the chain");
  }
  ContactPipeline pipeline(model, detection, estimation, planner.window_n_d);
  std::vector<OfflineWindow> out;
  std::vector<ResidualSample> window;
  for (const TickRecord& r : ticks) {
    model.check_dimension(r.q, "trace joint vector");
    ResidualSample sample{r.t, r.q, r.qd, r.qdd, r.tau_hat};
    const ContactPipeline::Step step = pipeline.add_sample(sample);
    if (forced_link) {
      window.push_back(std::move(sample));
      if (static_cast<int>(window.size()) > estimation.window_n) window.erase(window.begin());
    }
    if (!step.window) continue;
    OfflineWindow w;
    w.index = step.window->index;
    w.t_end = step.window->t_end;
    w.contact_fraction = step.window->contact_fraction;
    w.estimate = step.window->estimate;
    w.gated = w.estimate.has_value() && w.contact_fraction >= planner.min_contact_fraction;
    if (forced_link) w.estimate = estimate_contact(window, *forced_link, model, estimation);
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace contactplan
