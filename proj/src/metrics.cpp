#include "contactplan/metrics.hpp"

#include <cmath>

namespace contactplan {

using nlohmann::json;

namespace {

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> opt_get(const json& doc, const char* key) {
  if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
  return doc[key].get<T>();
}

// Mean scripted force over the ticks an estimate was fitted on.
Vec3 mean_true_force(const GroundTruthContact& c, const ContactEstimate& e, double dt) {
  const long k0 = std::lround(e.t_first / dt);
  const long k1 = std::lround(e.t_last / dt);
  Vec3 sum = Vec3::Zero();
  long n = 0;
  for (long k = k0; k <= k1; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (!c.active(t)) continue;
    sum += c.force_at(t);
    ++n;
  }
  return n > 0 ? Vec3(sum / static_cast<double>(n)) : Vec3::Zero();
}

}  // namespace

std::vector<Episode> find_episodes(const std::vector<TickRecord>& ticks) {
  std::vector<Episode> out;
  bool on = false;
  for (const TickRecord& r : ticks) {
    if (r.contact && !on) {
      out.push_back({r.k, std::nullopt, r.t, std::nullopt});
    } else if (!r.contact && on) {
      out.back().k_off = r.k;
      out.back().t_off = r.t;
    }
    on = r.contact;
  }
  return out;
}

MetricsReport compute_metrics(const RunTrace& trace, const Scenario& scenario) {
  MetricsReport rep;
  rep.ticks = static_cast<long>(trace.ticks.size());
  rep.aborted = trace.aborted;
  rep.episodes = find_episodes(trace.ticks);
  rep.bumps = static_cast<int>(trace.deformation.bumps().size());
  const double dt = scenario.dt();
  const int n_off = scenario.detection.n_off;

  std::vector<bool> matched(rep.episodes.size(), false);
  for (std::size_t ci = 0; ci < trace.contacts.size(); ++ci) {
    const GroundTruthContact& c = trace.contacts[ci];
    ContactMetrics m;
    m.contact = static_cast<int>(ci);
    m.k_start = static_cast<long>(std::ceil(c.t_start / dt - 1e-9));
    while (!c.active(static_cast<double>(m.k_start) * dt)) ++m.k_start;
    long k_end = m.k_start;
    while (c.active(static_cast<double>(k_end) * dt)) ++k_end;
    if (k_end < rep.ticks || trace.ticks.empty()) m.k_end = k_end;

    for (std::size_t ei = 0; ei < rep.episodes.size(); ++ei) {
      const Episode& ep = rep.episodes[ei];
      if (matched[ei] || ep.k_on < m.k_start || ep.k_on > k_end + n_off) continue;
      matched[ei] = true;
      m.episode = static_cast<int>(ei);
      m.detection_latency = ep.k_on - m.k_start + 1;
      if (ep.k_off && m.k_end) m.clear_latency = *ep.k_off - *m.k_end + 1;
      break;
    }

    double loc_sum = 0.0;
    for (const WindowRecord& w : trace.windows) {
      if (!w.gated) continue;
      const ContactEstimate& e = *w.estimate;
      if (e.t_last < c.t_start || e.t_first >= c.t_end) continue;
      ++m.estimates;
      const double err = (e.force - mean_true_force(c, e, dt)).norm();
      m.force_error += err;
      m.force_error_max = std::max(m.force_error_max, err);
      m.torque_mae += e.torque_mae;
      if (e.link == c.link) {
        ++m.link_hits;
        loc_sum += std::abs(e.s_hat - c.s);
      }
    }
    if (m.estimates > 0) {
      m.force_error /= m.estimates;
      m.torque_mae /= m.estimates;
    }
    if (m.link_hits > 0) m.location_error = loc_sum / m.link_hits;
    rep.contacts.push_back(m);
  }
  for (bool b : matched) rep.false_positives += b ? 0 : 1;

  double mae = 0.0;
  for (const WindowRecord& w : trace.windows) {
    if (!w.gated) continue;
    ++rep.gated_windows;
    mae += w.estimate->torque_mae;
  }
  if (rep.gated_windows > 0) rep.torque_mae = mae / rep.gated_windows;
  if (!trace.ticks.empty()) {
    rep.goal_error = (trace.ticks.back().tip - scenario.path.at(1.0).position).norm();
  }
  return rep;
}

json metrics_to_json(const MetricsReport& r) {
  json episodes = json::array();
  for (const Episode& e : r.episodes) {
    episodes.push_back({{"k_on", e.k_on}, {"k_off", opt(e.k_off)}, {"t_on", e.t_on}, {"t_off", opt(e.t_off)}});
  }
  json contacts = json::array();
  for (const ContactMetrics& m : r.contacts) {
    contacts.push_back({{"contact", m.contact},
                        {"k_start", m.k_start},
                        {"k_end", opt(m.k_end)},
                        {"episode", opt(m.episode)},
                        {"detection_latency", opt(m.detection_latency)},
                        {"clear_latency", opt(m.clear_latency)},
                        {"estimates", m.estimates},
                        {"link_hits", m.link_hits},
                        {"torque_mae", m.torque_mae},
                        {"force_error", m.force_error},
                        {"force_error_max", m.force_error_max},
                        {"location_error", opt(m.location_error)}});
  }
  return {{"ticks", r.ticks},
          {"aborted", r.aborted},
          {"episodes", episodes},
          {"contacts", contacts},
          {"false_positives", r.false_positives},
          {"bumps", r.bumps},
          {"gated_windows", r.gated_windows},
          {"torque_mae", opt(r.torque_mae)},
          {"goal_error", r.goal_error}};
}

MetricsReport metrics_from_json(const json& doc) {
  MetricsReport r;
  r.ticks = doc.at("ticks").get<long>();
  r.aborted = doc.at("aborted").get<bool>();
  for (const json& e : doc.at("episodes")) {
    r.episodes.push_back({e.at("k_on").get<long>(), opt_get<long>(e, "k_off"), e.at("t_on").get<double>(),
                          opt_get<double>(e, "t_off")});
  }
  for (const json& c : doc.at("contacts")) {
    ContactMetrics m;
    m.contact = c.at("contact").get<int>();
    m.k_start = c.at("k_start").get<long>();
    m.k_end = opt_get<long>(c, "k_end");
    m.episode = opt_get<int>(c, "episode");
    m.detection_latency = opt_get<long>(c, "detection_latency");
    m.clear_latency = opt_get<long>(c, "clear_latency");
    m.estimates = c.at("estimates").get<int>();
    m.link_hits = c.at("link_hits").get<int>();
    m.torque_mae = c.at("torque_mae").get<double>();
    m.force_error = c.at("force_error").get<double>();
    m.force_error_max = c.at("force_error_max").get<double>();
    m.location_error = opt_get<double>(c, "location_error");
    r.contacts.push_back(m);
  }
  r.false_positives = doc.at("false_positives").get<int>();
  r.bumps = doc.at("bumps").get<int>();
  r.gated_windows = doc.at("gated_windows").get<int>();
  r.torque_mae = opt_get<double>(doc, "torque_mae");
  r.goal_error = doc.at("goal_error").get<double>();
  return r;
}

}  // namespace contactplan
