#ifndef SBD_EXPERIMENT_CONFIG_HPP
#define SBD_EXPERIMENT_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sbd/engine.hpp"
#include "sbd/error.hpp"
#include "sbd/io.hpp"
#include "sbd/network_state.hpp"
#include "sbd/simulator.hpp"

namespace sbd {

/// Sectioned key=value experiment description.
///
///     # comment
///     [simulation]
///     lambda_fraction = 0.5
///
/// Keys outside a section belong to "simulation". Unknown sections or keys
/// are rejected.
class ExperimentConfig {
 public:
  using Section = std::map<std::string, std::string>;

  static const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"channel", {"C", "N0", "L", "pathloss", "k", "alpha", "table_radii", "table_values"}},
        {"simulation",
         {"lambda", "lambda_fraction", "Q", "T", "file_dist", "pareto_shape", "horizon", "warmup",
          "seed", "stream", "snapshot_times", "snapshot_interval", "trajectory_interval",
          "max_links", "record_events", "replications"}},
        {"heuristics", {"lambda_fractions", "lambdas", "tol"}},
        {"stats", {"radii", "s_grid", "probes", "kernel_radius", "lambda", "surrogate_seed"}},
        {"chain", {"mode", "epsilon", "lambda_fraction", "horizon", "x0", "step_tol", "record_every"}},
        {"figures", {"scale"}},
    };
    return s;
  }

  static ExperimentConfig parse(std::istream& in) {
    ExperimentConfig cfg;
    std::string line;
    std::string section = "simulation";
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw error(line_no, "unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        if (!schema().contains(section)) throw error(line_no, "unknown section [" + section + "]");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw error(line_no, "expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (!schema().at(section).contains(key)) {
        throw error(line_no, "unknown key '" + key + "' in [" + section + "]");
      }
      if (cfg.sections_[section].contains(key)) throw error(line_no, "duplicate key '" + key + "'");
      cfg.sections_[section][key] = value;
    }
    return cfg;
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    return parse(in);
  }

  static ExperimentConfig from_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  bool has(const std::string& section, const std::string& key) const {
    const auto it = sections_.find(section);
    return it != sections_.end() && it->second.contains(key);
  }

  void set(const std::string& section, const std::string& key, const std::string& value) {
    if (!schema().contains(section) || !schema().at(section).contains(key)) {
      throw ConfigError("unknown key " + section + "." + key);
    }
    sections_[section][key] = value;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    return has(section, key) ? sections_.at(section).at(key) : fallback;
  }

  double get_double(const std::string& section, const std::string& key, double fallback) const {
    return has(section, key) ? io::parse_double(sections_.at(section).at(key)) : fallback;
  }

  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& v = sections_.at(section).at(key);
    std::size_t used = 0;
    std::uint64_t out = 0;
    try {
      out = std::stoull(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size() || v.front() == '-') {
      throw ConfigError(section + "." + key + " must be a non-negative integer");
    }
    return out;
  }

  bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& v = sections_.at(section).at(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(section + "." + key + " must be true or false");
  }

  std::vector<double> get_list(const std::string& section, const std::string& key,
                               const std::vector<double>& fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<double> out;
    for (const auto& part : io::split(sections_.at(section).at(key), ',')) {
      out.push_back(io::parse_double(trim(part)));
    }
    return out;
  }

  /// FNV-1a over the sorted "section.key=value" lines.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [section, keys] : sections_) {
      for (const auto& [key, value] : keys) {
        for (char c : section + "." + key + "=" + value + "\n") {
          h ^= static_cast<unsigned char>(c);
          h *= 0x100000001b3ULL;
        }
      }
    }
    return h;
  }

  std::string hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
  }

  ChannelParams channel() const {
    ChannelParams p;
    p.C = get_double("channel", "C", 1.0);
    p.N0 = get_double("channel", "N0", 1.0);
    p.L = get_double("channel", "L", 1.0);
    const std::string kind = get_string("channel", "pathloss", "bounded");
    if (kind == "bounded") {
      p.pathloss = PathLossModel::bounded(get_double("channel", "k", 1.0),
                                          get_double("channel", "alpha", 4.0));
    } else if (kind == "power_law") {
      p.pathloss = PathLossModel::power_law(get_double("channel", "alpha", 4.0));
    } else if (kind == "tabulated") {
      p.pathloss = PathLossModel::tabulated(get_list("channel", "table_radii", {}),
                                            get_list("channel", "table_values", {}));
    } else {
      throw ConfigError("unknown path loss '" + kind + "'");
    }
    p.validate();
    return p;
  }

  /// Simulation settings; an arrival rate given as lambda_fraction is scaled by lambda_c.
  SimulationConfig simulation() const {
    SimulationConfig s;
    s.channel = channel();
    s.domain = TorusDomain(get_double("simulation", "Q", 5.0));
    s.link_length = get_double("simulation", "T", 0.0);
    const std::string files = get_string("simulation", "file_dist", "exponential");
    if (files == "exponential") {
      s.file_dist = FileSizeDistribution::exponential(s.channel.L);
    } else if (files == "pareto") {
      s.file_dist = FileSizeDistribution::pareto(get_double("simulation", "pareto_shape", 2.5),
                                                 s.channel.L);
    } else {
      throw ConfigError("unknown file_dist '" + files + "'");
    }
    s.horizon = get_double("simulation", "horizon", 200.0);
    s.warmup = get_double("simulation", "warmup", 0.1 * s.horizon);
    s.seed = get_u64("simulation", "seed", 1);
    s.stream = get_u64("simulation", "stream", 0);
    s.trajectory_interval = get_double("simulation", "trajectory_interval", 0.0);
    s.max_links = get_u64("simulation", "max_links", 100000);
    s.record_events = get_bool("simulation", "record_events", true);
    s.snapshot_times = get_list("simulation", "snapshot_times", {});
    const double interval = get_double("simulation", "snapshot_interval", 0.0);
    if (interval > 0.0) {
      for (double t = s.warmup; t <= s.horizon; t += interval) s.snapshot_times.push_back(t);
    }
    if (has("simulation", "lambda") && has("simulation", "lambda_fraction")) {
      throw ConfigError("give either lambda or lambda_fraction, not both");
    }
    if (has("simulation", "lambda_fraction")) {
      if (!s.channel.pathloss.is_bounded()) s.validate();  // reports the divergence
      s.lambda = get_double("simulation", "lambda_fraction", 0.5) * critical_lambda_for(s);
    } else {
      s.lambda = get_double("simulation", "lambda", 0.5);
    }
    return s;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static ConfigError error(int line, const std::string& what) {
    return ConfigError("config line " + std::to_string(line) + ": " + what);
  }

  std::map<std::string, Section> sections_;
};

}  // namespace sbd

#endif  // SBD_EXPERIMENT_CONFIG_HPP
