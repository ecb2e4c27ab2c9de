#ifndef SBD_SIMULATOR_HPP
#define SBD_SIMULATOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sbd/engine.hpp"
#include "sbd/error.hpp"
#include "sbd/heuristics.hpp"
#include "sbd/network_state.hpp"
#include "sbd/random.hpp"
#include "sbd/statistics.hpp"
#include "sbd/torus.hpp"

namespace sbd {

/// Full parameterization of one run of the birth-death dynamics.
struct SimulationConfig {
  double lambda = 0.5;
  ChannelParams channel;
  TorusDomain domain{5.0};
  double link_length = 0.0;
  FileSizeDistribution file_dist = FileSizeDistribution::exponential(1.0);
  double horizon = 100.0;
  double warmup = 0.0;
  std::uint64_t seed = 1;
  /// Stream index of the arrival generator; replications use distinct streams.
  std::uint64_t stream = 0;
  std::vector<double> snapshot_times;
  /// Spacing of the (t, N_t) samples; 0 means horizon / 1000.
  double trajectory_interval = 0.0;
  /// Supercritical runs stop once this many links are alive.
  std::size_t max_links = 100000;
  bool record_events = false;
  std::optional<LinkConfiguration> initial;
  /// Batches used for the standard error of beta_hat.
  std::size_t beta_batches = 20;

  void validate() const {
    channel.validate();
    if (!channel.pathloss.is_bounded()) {
      throw ConfigError(
          "power-law path loss is unbounded at the origin: the integral of l over the torus "
          "diverges and the dynamics admit no stationary regime for any arrival rate; "
          "use a bounded model for simulation");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw ParameterError("arrival intensity must be finite and non-negative");
    }
    if (!(horizon > 0.0)) throw ParameterError("horizon must be positive");
    if (!(warmup >= 0.0) || !(warmup < horizon)) {
      throw ParameterError("warmup must lie in [0, horizon)");
    }
    if (!(link_length >= 0.0) || link_length > domain.half_side()) {
      throw ParameterError("link length must lie in [0, Q]");
    }
    if (std::abs(file_dist.mean() - channel.L) > 1e-12 * channel.L) {
      throw ParameterError("file size distribution mean must equal the channel's L");
    }
    if (trajectory_interval < 0.0) throw ParameterError("trajectory interval must be >= 0");
    if (beta_batches < 2) throw ParameterError("need at least two batches for beta_hat");
    if (max_links < 1) throw ParameterError("max_links must be positive");
    if (initial) {
      if (!(initial->domain() == domain) || initial->link_length() != link_length) {
        throw ParameterError("initial configuration does not match the domain or link length");
      }
      initial->validate();
    }
  }
};

struct EventRecord {
  enum class Kind : char { kBirth = 'B', kDeath = 'D' };
  Kind kind = Kind::kBirth;
  double time = 0.0;
  std::uint64_t link_id = 0;
  Point rx;
  Point tx;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

/// Measured outputs of a run.
struct RunMetrics {
  double lambda = 0.0;
  double horizon = 0.0;
  double warmup = 0.0;
  std::uint64_t seed = 0;
  double end_time = 0.0;  // horizon unless the run hit max_links
  bool capped = false;

  /// Time average of N_t / |S| over [warmup, end_time].
  double beta_hat = 0.0;
  /// Batch-means standard error of beta_hat.
  double beta_hat_se = 0.0;
  /// Mean sojourn of links born after warmup that died before the end.
  double W_hat = 0.0;
  std::vector<double> delay_samples;
  std::vector<std::pair<double, std::size_t>> n_trajectory;
  std::uint64_t births = 0;
  std::uint64_t deaths = 0;
  std::uint64_t deaths_after_warmup = 0;
  /// Bits delivered during [warmup, end_time].
  double work_served_after_warmup = 0.0;
  /// Largest |served - file| / file over all deaths.
  double max_workload_mismatch = 0.0;
  std::vector<LinkConfiguration> snapshots;
  std::vector<double> snapshot_times;
  std::vector<EventRecord> events;
};

/// Stateful event loop over one realization of the dynamics.
///
/// A Simulation is a value: copying it forks the realization, and
/// replace_arrivals() then decouples the copy's future arrivals.
class Simulation {
 public:
  explicit Simulation(const SimulationConfig& cfg, bool collect_samples = true)
      : cfg_(cfg),
        engine_(DistanceGain{cfg.channel.pathloss, cfg.domain},
                cfg.channel.pathloss(cfg.link_length), cfg.channel),
        arrivals_(cfg.lambda, cfg.domain, cfg.link_length, cfg.file_dist,
                  Rng(cfg.seed, cfg.stream)),
        collect_(collect_samples) {
    cfg_.validate();
    sample_dt_ = cfg_.trajectory_interval > 0.0 ? cfg_.trajectory_interval : cfg_.horizon / 1000.0;
    batch_area_.assign(cfg_.beta_batches, 0.0);
    snapshot_order_ = cfg_.snapshot_times;
    std::sort(snapshot_order_.begin(), snapshot_order_.end());
    if (cfg_.initial) {
      for (const auto& link : cfg_.initial->links()) {
        engine_.insert(link, link.residual_bits);
        next_id_ = std::max(next_id_, link.id + 1);
      }
    }
  }

  double now() const noexcept { return engine_.now(); }
  bool capped() const noexcept { return capped_; }
  std::size_t size() const noexcept { return engine_.size(); }
  const LinkEngine<DistanceGain>& engine() const noexcept { return engine_; }

  /// Processes every event with time <= t_end, then moves the clock to t_end.
  void run_until(double t_end) {
    while (!capped_ && step(t_end)) {
    }
    if (capped_) return;
    close_interval(t_end);
  }

  /// Runs until every listed link has died or t_limit passes. Returns true when all died.
  bool run_until_departed(std::span<const std::uint64_t> ids, double t_limit) {
    const auto all_gone = [&] {
      return std::all_of(ids.begin(), ids.end(),
                         [&](std::uint64_t id) { return departed_.contains(id); });
    };
    while (!all_gone()) {
      if (capped_ || !step(t_limit)) return all_gone();
    }
    return true;
  }

  /// Adds a link at the current time; returns its id. The link is tracked so that
  /// its death time can be read back with death_time().
  std::uint64_t inject(const Point& rx, const Point& tx, double file_bits) {
    if (!(file_bits > 0.0)) throw ParameterError("injected file must be non-empty");
    Link link{next_id_++, rx, tx, file_bits, now()};
    engine_.insert(link, file_bits);
    ++births_;
    watched_.emplace(link.id, std::numeric_limits<double>::quiet_NaN());
    return link.id;
  }

  std::optional<double> death_time(std::uint64_t id) const {
    const auto it = departed_.find(id);
    if (it == departed_.end()) return std::nullopt;
    return it->second;
  }

  /// Restarts the arrival process from the current time on a fresh generator.
  void replace_arrivals(Rng rng) {
    arrivals_ = ArrivalStream(cfg_.lambda, cfg_.domain, cfg_.link_length, cfg_.file_dist, rng,
                              now());
  }

  /// Current configuration with residual workloads.
  LinkConfiguration configuration() const { return snapshot_at(now()); }

  /// Finalizes and returns the measurements collected so far.
  RunMetrics metrics() const {
    RunMetrics m;
    m.lambda = cfg_.lambda;
    m.horizon = cfg_.horizon;
    m.warmup = cfg_.warmup;
    m.seed = cfg_.seed;
    m.end_time = measured_until_;
    m.capped = capped_;
    const double window = measured_until_ - cfg_.warmup;
    const double area = cfg_.domain.area();
    if (window > 0.0) {
      m.beta_hat = n_area_ / (area * window);
      const double batch_len = (cfg_.horizon - cfg_.warmup) / static_cast<double>(cfg_.beta_batches);
      std::vector<double> batch_beta;
      for (std::size_t b = 0; b < batch_area_.size(); ++b) {
        const double b_start = cfg_.warmup + batch_len * static_cast<double>(b);
        const double covered = std::min(measured_until_, b_start + batch_len) - b_start;
        if (covered >= 0.5 * batch_len) batch_beta.push_back(batch_area_[b] / (area * covered));
      }
      m.beta_hat_se = stats::mean_and_se(batch_beta).std_error;
    }
    m.delay_samples = delays_;
    if (!delays_.empty()) m.W_hat = stats::mean_and_se(delays_).mean;
    m.n_trajectory = trajectory_;
    m.births = births_;
    m.deaths = deaths_;
    m.deaths_after_warmup = deaths_after_warmup_;
    m.work_served_after_warmup = work_after_warmup_;
    m.max_workload_mismatch = max_mismatch_;
    m.snapshots = snapshots_;
    m.snapshot_times = snapshot_taken_at_;
    m.events = events_;
    return m;
  }

 private:
  /// Applies the next event if it happens no later than t_end.
  bool step(double t_end) {
    const double t_birth = arrivals_.peek().time;
    const double t_death = engine_.next_death_time();
    const double t_next = std::min(t_birth, t_death);
    if (!(t_next <= t_end)) return false;
    emit_samples(t_next, /*inclusive=*/false);
    accumulate(engine_.now(), t_next);
    engine_.advance_to(t_next);
    if (t_death <= t_birth) {
      on_death(engine_.kill_next());
    } else {
      on_birth(arrivals_.pop());
    }
    return true;
  }

  void on_birth(const Arrival& a) {
    Link link{next_id_++, a.rx, a.tx, a.file_bits, a.time};
    engine_.insert(link, a.file_bits);
    ++births_;
    if (cfg_.record_events) {
      events_.push_back({EventRecord::Kind::kBirth, a.time, link.id, link.rx, link.tx});
    }
    if (engine_.size() >= cfg_.max_links) {
      capped_ = true;
      measured_until_ = std::max(measured_until_, engine_.now());
    }
  }

  void on_death(const Departure& d) {
    ++deaths_;
    max_mismatch_ = std::max(max_mismatch_, std::abs(d.served_bits - d.file_bits) / d.file_bits);
    if (d.link.birth_time >= cfg_.warmup && collect_) {
      delays_.push_back(d.death_time - d.link.birth_time);
    }
    if (d.death_time >= cfg_.warmup) ++deaths_after_warmup_;
    if (watched_.contains(d.link.id)) departed_[d.link.id] = d.death_time;
    if (cfg_.record_events) {
      events_.push_back({EventRecord::Kind::kDeath, d.death_time, d.link.id, d.link.rx, d.link.tx});
    }
  }

  void close_interval(double t_end) {
    emit_samples(t_end, /*inclusive=*/true);
    accumulate(engine_.now(), t_end);
    engine_.advance_to(t_end);
  }

  /// Integrates N_t and the total rate over [t0, t1), during which both are constant.
  void accumulate(double t0, double t1) {
    const double lo = std::max(t0, cfg_.warmup);
    const double hi = std::min(t1, cfg_.horizon);
    if (hi > lo) {
      const double n = static_cast<double>(engine_.size());
      n_area_ += n * (hi - lo);
      work_after_warmup_ += engine_.total_rate() * (hi - lo);
      const double batch_len =
          (cfg_.horizon - cfg_.warmup) / static_cast<double>(cfg_.beta_batches);
      auto b = static_cast<std::size_t>((lo - cfg_.warmup) / batch_len);
      double cursor = lo;
      while (cursor < hi && b < batch_area_.size()) {
        const double b_end = cfg_.warmup + batch_len * static_cast<double>(b + 1);
        const double seg_end = (b + 1 == batch_area_.size()) ? hi : std::min(hi, b_end);
        if (seg_end > cursor) batch_area_[b] += n * (seg_end - cursor);
        cursor = seg_end;
        ++b;
      }
    }
    measured_until_ = std::max(measured_until_, std::min(t1, cfg_.horizon));
  }

  void emit_samples(double t, bool inclusive) {
    if (!collect_) return;
    const auto before = [&](double g) { return inclusive ? g <= t : g < t; };
    while (next_sample_index_ * sample_dt_ <= cfg_.horizon &&
           before(static_cast<double>(next_sample_index_) * sample_dt_)) {
      trajectory_.emplace_back(static_cast<double>(next_sample_index_) * sample_dt_, engine_.size());
      ++next_sample_index_;
    }
    while (next_snapshot_ < snapshot_order_.size() && before(snapshot_order_[next_snapshot_])) {
      const double s = snapshot_order_[next_snapshot_++];
      if (s < engine_.now() || s > cfg_.horizon) continue;
      snapshots_.push_back(snapshot_at(s));
      snapshot_taken_at_.push_back(s);
    }
  }

  LinkConfiguration snapshot_at(double s) const {
    LinkConfiguration snap(cfg_.domain, cfg_.link_length);
    const double dt = s - engine_.now();
    const auto& links = engine_.links();
    const auto& rates = engine_.rates();
    for (std::size_t i = 0; i < links.size(); ++i) {
      Link l = links[i];
      l.residual_bits = std::max(l.residual_bits - dt * rates[i], std::numeric_limits<double>::min());
      snap.add(l);
    }
    return snap;
  }

  SimulationConfig cfg_;
  LinkEngine<DistanceGain> engine_;
  ArrivalStream arrivals_;
  bool collect_ = true;
  std::uint64_t next_id_ = 0;
  bool capped_ = false;
  double sample_dt_ = 1.0;
  std::uint64_t next_sample_index_ = 0;
  std::vector<double> snapshot_order_;
  std::size_t next_snapshot_ = 0;

  double n_area_ = 0.0;
  double work_after_warmup_ = 0.0;
  std::vector<double> batch_area_;
  double measured_until_ = 0.0;
  std::uint64_t births_ = 0;
  std::uint64_t deaths_ = 0;
  std::uint64_t deaths_after_warmup_ = 0;
  double max_mismatch_ = 0.0;
  std::vector<double> delays_;
  std::vector<std::pair<double, std::size_t>> trajectory_;
  std::vector<LinkConfiguration> snapshots_;
  std::vector<double> snapshot_taken_at_;
  std::vector<EventRecord> events_;
  std::unordered_map<std::uint64_t, double> watched_;
  std::unordered_map<std::uint64_t, double> departed_;
};

/// Simulates the dynamics on [0, horizon]. Deterministic given the config.
inline RunMetrics run(const SimulationConfig& cfg) {
  Simulation sim(cfg);
  sim.run_until(cfg.horizon);
  return sim.metrics();
}

/// Critical arrival intensity for the configuration's channel, domain and link length.
inline double critical_lambda_for(const SimulationConfig& cfg, double rel_tol = 1e-9) {
  const auto a = pathloss_integral_a(cfg.channel.pathloss, cfg.domain, rel_tol);
  return critical_lambda(cfg.channel, cfg.link_length, a).lambda_c;
}

// --- stability probe ------------------------------------------------------------

struct PhaseProbeOptions {
  /// The matched sub-critical reference runs at this fraction of lambda_c.
  double reference_fraction = 0.5;
  /// The growth window is cut into this many batches before the trend fit.
  std::size_t batches = 20;
};

struct PhaseVerdict {
  double lambda = 0.0;
  double slope = 0.0;     // links per unit time over the window
  double slope_se = 0.0;
  double end_n = 0.0;
  double window_mean = 0.0;
  double reference_mean = 0.0;
  bool capped = false;
  bool growing = false;
};

namespace detail {

struct WindowTrend {
  stats::LinearFit fit;
  double mean = 0.0;
};

inline WindowTrend window_trend(const RunMetrics& m, double window, std::size_t batches) {
  const double start = m.end_time - window;
  std::vector<double> sums(batches, 0.0);
  std::vector<double> counts(batches, 0.0);
  double total = 0.0;
  double total_count = 0.0;
  for (const auto& [t, n] : m.n_trajectory) {
    if (t < start || t > m.end_time) continue;
    auto b = static_cast<std::size_t>((t - start) / window * static_cast<double>(batches));
    b = std::min(b, batches - 1);
    sums[b] += static_cast<double>(n);
    counts[b] += 1.0;
    total += static_cast<double>(n);
    total_count += 1.0;
  }
  std::vector<double> x, y;
  for (std::size_t b = 0; b < batches; ++b) {
    if (counts[b] == 0.0) continue;
    x.push_back(start + (static_cast<double>(b) + 0.5) * window / static_cast<double>(batches));
    y.push_back(sums[b] / counts[b]);
  }
  WindowTrend out;
  out.mean = total_count > 0.0 ? total / total_count : 0.0;
  if (x.size() >= 3) {
    out.fit = stats::linear_fit(x, y);
  }
  return out;
}

}  // namespace detail

/// Classifies each arrival rate as stable-looking or growing from the trend of N_t
/// over the final `growth_window` of the horizon.
///
/// A rate is growing when the batch-means slope exceeds three standard errors and
/// the final N_t exceeds twice the window mean of a reference run at
/// reference_fraction * lambda_c with the same seed. A run that hits max_links is
/// growing.
inline std::vector<PhaseVerdict> phase_transition_probe(const SimulationConfig& base,
                                                        std::span<const double> lambdas,
                                                        double growth_window,
                                                        const PhaseProbeOptions& opt = {}) {
  if (!(growth_window > 0.0) || growth_window > base.horizon) {
    throw ParameterError("growth window must be positive and no longer than the horizon");
  }
  if (opt.batches < 3) throw ParameterError("trend fit needs at least three batches");
  const double lambda_c = critical_lambda_for(base);

  SimulationConfig ref_cfg = base;
  ref_cfg.lambda = opt.reference_fraction * lambda_c;
  const RunMetrics ref = run(ref_cfg);
  const double ref_mean = detail::window_trend(ref, growth_window, opt.batches).mean;

  std::vector<PhaseVerdict> out;
  for (double lambda : lambdas) {
    SimulationConfig cfg = base;
    cfg.lambda = lambda;
    const RunMetrics m = run(cfg);
    PhaseVerdict v;
    v.lambda = lambda;
    v.capped = m.capped;
    v.reference_mean = ref_mean;
    v.end_n = m.n_trajectory.empty() ? 0.0 : static_cast<double>(m.n_trajectory.back().second);
    if (m.capped) {
      v.growing = true;
    } else {
      const auto trend = detail::window_trend(m, growth_window, opt.batches);
      v.slope = trend.fit.slope;
      v.slope_se = trend.fit.slope_se;
      v.window_mean = trend.mean;
      v.growing = v.slope > 3.0 * v.slope_se && v.end_n > 2.0 * ref_mean;
    }
    out.push_back(v);
  }
  return out;
}

// --- delay statistics -----------------------------------------------------------

/// Empirical P(delay > t) on the grid.
inline std::vector<std::pair<double, double>> delay_ccdf(const RunMetrics& m,
                                                         std::span<const double> grid) {
  if (m.delay_samples.empty()) throw StateError("no delay samples recorded");
  return stats::empirical_ccdf(m.delay_samples, grid);
}

/// Least-squares slope of log P(delay >= t) against t over the top `fraction` of samples.
inline stats::LinearFit delay_tail_slope(std::vector<double> samples, double fraction = 0.1) {
  if (samples.size() < 30) throw StateError("tail fit needs at least 30 samples");
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  const auto first = static_cast<std::size_t>(std::floor((1.0 - fraction) * static_cast<double>(n)));
  std::vector<double> t, logc;
  for (std::size_t i = first; i < n; ++i) {
    t.push_back(samples[i]);
    logc.push_back(std::log(static_cast<double>(n - i) / static_cast<double>(n)));
  }
  return stats::linear_fit(t, logc);
}

struct DelayCorrelationOptions {
  std::size_t replications = 200;
  /// Simulated time between successive steady-state base samples.
  double spacing = 2.0;
  /// Generator streams of the two injected file sizes; must differ.
  std::uint64_t file_stream_a = 1;
  std::uint64_t file_stream_b = 2;
  /// Give up on a replication after this much simulated time.
  double max_wait = 1e5;
};

struct DelayCorrelationPoint {
  double distance = 0.0;
  stats::Correlation correlation;
  std::vector<std::pair<double, double>> delay_pairs;
};

/// Correlation of the delays of two links born at the same instant at distance d.
///
/// Base states are taken from one long run (after cfg.warmup, every
/// opt.spacing time units). For replication r every distance reuses the same
/// base state, arrival stream and file sizes, so that the curve over d is
/// compared under common random numbers.
inline std::vector<DelayCorrelationPoint> delay_correlation(const SimulationConfig& cfg,
                                                            std::span<const double> distances,
                                                            const DelayCorrelationOptions& opt = {}) {
  cfg.validate();
  if (cfg.link_length != 0.0) throw ParameterError("delay correlation is defined for T = 0");
  if (opt.replications < 100) throw StateError("delay correlation needs >= 100 replications");
  if (opt.file_stream_a == opt.file_stream_b) {
    throw ParameterError("the two injected links need independent file-size streams");
  }
  const double lambda_c = critical_lambda_for(cfg);
  if (cfg.lambda >= lambda_c) {
    throw ConfigError("arrival rate is at or above lambda_c; no steady state to sample from");
  }
  for (double d : distances) {
    if (!(d >= 0.0) || d > cfg.domain.half_side()) {
      throw ParameterError("pair distance must lie in [0, Q]");
    }
  }

  SimulationConfig base_cfg = cfg;
  base_cfg.horizon = cfg.warmup + opt.spacing * static_cast<double>(opt.replications) + 1.0;
  base_cfg.snapshot_times.clear();
  base_cfg.record_events = false;
  Simulation base(base_cfg, /*collect_samples=*/false);
  base.run_until(cfg.warmup);

  std::vector<DelayCorrelationPoint> out(distances.size());
  std::vector<std::vector<double>> da(distances.size()), db(distances.size());
  const double q = cfg.domain.half_side();
  for (std::size_t r = 0; r < opt.replications; ++r) {
    base.run_until(cfg.warmup + opt.spacing * static_cast<double>(r));
    Rng geometry(cfg.seed, (std::uint64_t{0x9e37} << 32) | r);
    Rng files_a(cfg.seed, (opt.file_stream_a << 40) | r);
    Rng files_b(cfg.seed, (opt.file_stream_b << 40) | r);
    const Point x = cfg.domain.wrap({geometry.uniform(-q, q), geometry.uniform(-q, q)});
    const double angle = geometry.uniform(0.0, 2.0 * std::numbers::pi);
    const double file_a = cfg.file_dist.sample(files_a);
    const double file_b = cfg.file_dist.sample(files_b);
    for (std::size_t k = 0; k < distances.size(); ++k) {
      Simulation fork = base;
      fork.replace_arrivals(Rng(cfg.seed, (std::uint64_t{0xa11} << 40) | r));
      const Point y = place_transmitter(x, distances[k], angle, cfg.domain);
      const std::uint64_t ids[2] = {fork.inject(x, x, file_a), fork.inject(y, y, file_b)};
      if (!fork.run_until_departed(ids, fork.now() + opt.max_wait)) {
        throw NumericalError("injected links did not finish within max_wait");
      }
      const double born = base.now();
      da[k].push_back(*fork.death_time(ids[0]) - born);
      db[k].push_back(*fork.death_time(ids[1]) - born);
    }
  }
  for (std::size_t k = 0; k < distances.size(); ++k) {
    out[k].distance = distances[k];
    out[k].correlation = stats::pearson(da[k], db[k]);
    for (std::size_t i = 0; i < da[k].size(); ++i) out[k].delay_pairs.emplace_back(da[k][i], db[k][i]);
  }
  return out;
}

}  // namespace sbd

#endif  // SBD_SIMULATOR_HPP
