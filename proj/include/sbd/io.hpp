#ifndef SBD_IO_HPP
#define SBD_IO_HPP

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "sbd/error.hpp"
#include "sbd/network_state.hpp"
#include "sbd/simulator.hpp"

namespace sbd::io {

inline constexpr const char* kSnapshotHeader = "link_id,rx_x,rx_y,tx_x,tx_y,residual_bits,birth_time";
inline constexpr const char* kEventHeader = "kind,time,link_id,rx_x,rx_y,tx_x,tx_y";

/// Shortest round-trip decimal form (17 significant digits).
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_snapshot(std::ostream& out, const LinkConfiguration& cfg) {
  out << kSnapshotHeader << '\n';
  for (const auto& l : cfg.links()) {
    out << l.id << ',' << num(l.rx.x) << ',' << num(l.rx.y) << ',' << num(l.tx.x) << ','
        << num(l.tx.y) << ',' << num(l.residual_bits) << ',' << num(l.birth_time) << '\n';
  }
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) parts.push_back(cell);
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

inline double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + s + "'");
  }
  if (used != s.size()) throw ConfigError("trailing characters in number '" + s + "'");
  return v;
}

/// Reads the snapshot CSV. Lines starting with '#' are skipped.
inline LinkConfiguration read_snapshot(std::istream& in, const TorusDomain& domain,
                                       double link_length) {
  LinkConfiguration cfg(domain, link_length);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kSnapshotHeader) throw ConfigError("unexpected snapshot header: " + line);
      header = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 7) throw ConfigError("snapshot row needs 7 fields: " + line);
    Link l;
    l.id = std::stoull(f[0]);
    l.rx = {parse_double(f[1]), parse_double(f[2])};
    l.tx = {parse_double(f[3]), parse_double(f[4])};
    l.residual_bits = parse_double(f[5]);
    l.birth_time = parse_double(f[6]);
    cfg.add(l);
  }
  if (!header) throw ConfigError("snapshot file has no header");
  cfg.validate();
  return cfg;
}

inline void write_events(std::ostream& out, const std::vector<EventRecord>& events) {
  out << kEventHeader << '\n';
  for (const auto& e : events) {
    out << static_cast<char>(e.kind) << ',' << num(e.time) << ',' << e.link_id << ','
        << num(e.rx.x) << ',' << num(e.rx.y) << ',' << num(e.tx.x) << ',' << num(e.tx.y) << '\n';
  }
}

inline nlohmann::ordered_json metrics_json(const RunMetrics& m) {
  nlohmann::ordered_json j;
  j["beta_hat"] = m.beta_hat;
  j["beta_hat_se"] = m.beta_hat_se;
  j["w_hat"] = m.W_hat;
  j["births"] = m.births;
  j["deaths"] = m.deaths;
  j["lambda"] = m.lambda;
  j["horizon"] = m.horizon;
  j["warmup"] = m.warmup;
  j["seed"] = m.seed;
  j["end_time"] = m.end_time;
  j["capped"] = m.capped;
  j["max_workload_mismatch"] = m.max_workload_mismatch;
  j["delay_samples"] = m.delay_samples;
  auto traj = nlohmann::ordered_json::array();
  for (const auto& [t, n] : m.n_trajectory) traj.push_back({t, n});
  j["n_trajectory"] = std::move(traj);
  return j;
}

/// Opens a file for writing or throws ConfigError.
inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out.precision(17);
  return out;
}

}  // namespace sbd::io

#endif  // SBD_IO_HPP
