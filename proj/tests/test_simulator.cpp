#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sbd/queues.hpp"
#include "sbd/simulator.hpp"

namespace sbd {
namespace {

SimulationConfig small_config(double fraction, double horizon) {
  SimulationConfig cfg;
  cfg.lambda = fraction * critical_lambda_for(cfg);
  cfg.horizon = horizon;
  cfg.seed = 99;
  return cfg;
}

TEST(Simulation, LoneLinkDiesAtFileOverRate) {
  SimulationConfig cfg;
  cfg.lambda = 0.0;
  cfg.horizon = 10.0;
  cfg.record_events = true;
  LinkConfiguration init(cfg.domain, 0.0);
  init.add({0, {1, 2}, {1, 2}, 2.5, 0.0});
  cfg.initial = init;
  const RunMetrics m = run(cfg);
  ASSERT_EQ(m.deaths, 1u);
  ASSERT_EQ(m.events.size(), 1u);
  EXPECT_EQ(m.events[0].kind, EventRecord::Kind::kDeath);
  EXPECT_DOUBLE_EQ(m.events[0].time, 2.5);
}

TEST(Simulation, TwoLinksShareTheChannelExactly) {
  // Two coincident links at T = 0 each see interference 1: rate log2(1.5).
  SimulationConfig cfg;
  cfg.lambda = 0.0;
  cfg.horizon = 100.0;
  cfg.record_events = true;
  LinkConfiguration init(cfg.domain, 0.0);
  init.add({0, {0, 0}, {0, 0}, 1.0, 0.0});
  init.add({1, {0, 0}, {0, 0}, 3.0, 0.0});
  cfg.initial = init;
  const RunMetrics m = run(cfg);
  ASSERT_EQ(m.events.size(), 2u);
  const double shared = std::log2(1.5);
  const double t1 = 1.0 / shared;
  EXPECT_NEAR(m.events[0].time, t1, 1e-12);
  EXPECT_NEAR(m.events[1].time, t1 + (3.0 - 1.0) / 1.0, 1e-12);
  EXPECT_LT(m.max_workload_mismatch, 1e-12);
}

TEST(Simulation, RejectsPowerLaw) {
  SimulationConfig cfg;
  cfg.channel.pathloss = PathLossModel::power_law(4.0);
  try {
    run(cfg);
    FAIL() << "power law accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("diverges"), std::string::npos);
    EXPECT_EQ(e.exit_code(), ExitCode::kConfig);
  }
}

TEST(Simulation, ValidatesParameters) {
  SimulationConfig cfg;
  cfg.horizon = 0.0;
  EXPECT_THROW(run(cfg), ParameterError);
  cfg = SimulationConfig{};
  cfg.lambda = -1.0;
  EXPECT_THROW(run(cfg), ParameterError);
  cfg = SimulationConfig{};
  cfg.warmup = cfg.horizon;
  EXPECT_THROW(run(cfg), ParameterError);
  cfg = SimulationConfig{};
  cfg.file_dist = FileSizeDistribution::exponential(2.0);
  EXPECT_THROW(run(cfg), ParameterError);
}

TEST(Simulation, DeterministicEventLog) {
  SimulationConfig cfg = small_config(0.6, 30.0);
  cfg.record_events = true;
  const RunMetrics a = run(cfg);
  const RunMetrics b = run(cfg);
  ASSERT_GT(a.events.size(), 500u);
  EXPECT_EQ(a.events, b.events);
  EXPECT_EQ(a.beta_hat, b.beta_hat);
  cfg.seed += 1;
  EXPECT_NE(run(cfg).events, a.events);
}

TEST(Simulation, WorkloadBalanceAndEngineInterference) {
  SimulationConfig cfg = small_config(0.8, 60.0);
  const RunMetrics m = run(cfg);
  EXPECT_GT(m.deaths, 1000u);
  EXPECT_LT(m.max_workload_mismatch, 1e-9);

  Simulation sim(cfg);
  for (double t : {5.0, 20.0, 45.0}) {
    sim.run_until(t);
    const auto snap = sim.configuration();
    for (std::size_t i = 0; i < snap.size(); ++i) {
      const double brute = interference(snap[i], snap, cfg.channel);
      ASSERT_NEAR(sim.engine().interference()[i], brute, 1e-12 * std::max(brute, 1.0));
    }
  }
}

TEST(Simulation, SnapshotsAreTakenAtRequestedTimes) {
  SimulationConfig cfg = small_config(0.5, 20.0);
  cfg.snapshot_times = {15.0, 5.0, 10.0};
  const RunMetrics m = run(cfg);
  ASSERT_EQ(m.snapshots.size(), 3u);
  EXPECT_EQ(m.snapshot_times, (std::vector<double>{5.0, 10.0, 15.0}));
  for (const auto& s : m.snapshots) {
    for (const auto& l : s.links()) EXPECT_GT(l.residual_bits, 0.0);
  }
}

TEST(Simulation, TrajectoryIsRegular) {
  SimulationConfig cfg = small_config(0.5, 20.0);
  cfg.trajectory_interval = 0.5;
  const RunMetrics m = run(cfg);
  ASSERT_EQ(m.n_trajectory.size(), 41u);
  for (std::size_t i = 0; i < m.n_trajectory.size(); ++i) {
    EXPECT_NEAR(m.n_trajectory[i].first, 0.5 * static_cast<double>(i), 1e-12);
  }
}

TEST(Simulation, CopyForksTheRealization) {
  SimulationConfig cfg = small_config(0.5, 50.0);
  Simulation a(cfg);
  a.run_until(10.0);
  Simulation b = a;
  a.run_until(30.0);
  b.run_until(30.0);
  EXPECT_EQ(a.metrics().beta_hat, b.metrics().beta_hat);
  Simulation c(cfg);
  c.run_until(10.0);
  c.replace_arrivals(Rng(1234, 5));
  c.run_until(30.0);
  EXPECT_NE(a.metrics().beta_hat, c.metrics().beta_hat);
}

TEST(Simulation, LightTrafficLittleAndSoloDelay) {
  SimulationConfig cfg = small_config(0.05, 4000.0);
  cfg.warmup = 20.0;
  const RunMetrics m = run(cfg);
  EXPECT_LT(std::abs(m.beta_hat - m.lambda * m.W_hat) / m.beta_hat, 0.05);
  // Interference can only lengthen delays relative to running alone.
  const auto solo = stats::mean_and_se(m.delay_samples);
  EXPECT_GT(solo.mean + 3.0 * solo.std_error, cfg.channel.L / solo_rate(cfg.channel, 0.0));
  EXPECT_LT(std::abs(solo.mean - 1.0), 0.1);
}

TEST(PhaseProbe, ZeroArrivalsIsStableAndDrains) {
  SimulationConfig cfg;
  cfg.horizon = 50.0;
  cfg.trajectory_interval = 1.0;
  LinkConfiguration init(cfg.domain, 0.0);
  for (std::uint64_t i = 0; i < 5; ++i) init.add({i, {0.5 * i, 0}, {0.5 * i, 0}, 1.0, 0.0});
  cfg.initial = init;
  const std::vector<double> lambdas{0.0};
  const auto v = phase_transition_probe(cfg, lambdas, 20.0);
  EXPECT_FALSE(v[0].growing);
  EXPECT_EQ(v[0].end_n, 0.0);
}

TEST(PhaseProbe, RejectsLongWindow) {
  SimulationConfig cfg;
  cfg.horizon = 10.0;
  const std::vector<double> lambdas{0.1};
  EXPECT_THROW(phase_transition_probe(cfg, lambdas, 11.0), ParameterError);
}

TEST(PhaseProbe, SupercriticalGrows) {
  SimulationConfig cfg;
  cfg.horizon = 300.0;
  cfg.trajectory_interval = 1.0;
  cfg.seed = 3;
  const double lc = critical_lambda_for(cfg);
  const std::vector<double> lambdas{0.6 * lc, 1.5 * lc};
  const auto v = phase_transition_probe(cfg, lambdas, 150.0);
  EXPECT_FALSE(v[0].growing);
  EXPECT_TRUE(v[1].growing);
}

TEST(DelayCcdf, CountsExactly) {
  RunMetrics m;
  m.delay_samples = {1.0, 2.0, 3.0};
  const std::vector<double> grid{0.0, 1.5, 2.5};
  const auto c = delay_ccdf(m, grid);
  EXPECT_DOUBLE_EQ(c[0].second, 1.0);
  EXPECT_DOUBLE_EQ(c[1].second, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(c[2].second, 1.0 / 3.0);
  m.delay_samples.clear();
  EXPECT_THROW(delay_ccdf(m, grid), StateError);
}

TEST(DelayCcdf, TailSlopeIsNegativeAndFinite) {
  SimulationConfig cfg = small_config(0.5, 300.0);
  cfg.warmup = 30.0;
  const RunMetrics m = run(cfg);
  const auto fit = delay_tail_slope(m.delay_samples);
  EXPECT_LT(fit.slope, 0.0);
  EXPECT_TRUE(std::isfinite(fit.slope));
  std::vector<double> grid;
  for (double t = 0.0; t < 10.0; t += 0.5) grid.push_back(t);
  const auto c = delay_ccdf(m, grid);
  EXPECT_DOUBLE_EQ(c.front().second, 1.0);
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_LE(c[i].second, c[i - 1].second);
}

TEST(DelayCorrelation, Preconditions) {
  SimulationConfig cfg = small_config(0.5, 10.0);
  cfg.warmup = 5.0;
  const std::vector<double> d{0.0, 1.0};
  DelayCorrelationOptions opt;
  opt.file_stream_b = opt.file_stream_a;
  EXPECT_THROW(delay_correlation(cfg, d, opt), ParameterError);
  opt = DelayCorrelationOptions{};
  opt.replications = 50;
  EXPECT_THROW(delay_correlation(cfg, d, opt), StateError);
  SimulationConfig hot = cfg;
  hot.lambda = 1.1 * critical_lambda_for(cfg);
  EXPECT_THROW(delay_correlation(hot, d, {}), ConfigError);
  SimulationConfig linked = cfg;
  linked.link_length = 1.0;
  EXPECT_THROW(delay_correlation(linked, d, {}), ParameterError);
}

TEST(DelayCorrelation, LightTrafficCoincidentVersusFar) {
  // Nearly empty network: coincident links share the channel, far links barely interact.
  SimulationConfig cfg = small_config(0.01, 30.0);
  cfg.warmup = 20.0;
  const std::vector<double> d{0.0, 5.0};
  DelayCorrelationOptions opt;
  opt.replications = 150;
  const auto pts = delay_correlation(cfg, d, opt);
  EXPECT_GT(pts[0].correlation.ci.lo, 0.0);
  EXPECT_TRUE(pts[1].correlation.ci.contains(0.0));
  EXPECT_EQ(pts[0].delay_pairs.size(), 150u);
}

TEST(Comparators, PsMeanSojourn) {
  const double lc = 1.4702043874;
  const auto s = ps_comparator(0.5 * lc, lc, FileSizeDistribution::exponential(1.0), 200000, 1);
  const double mean = stats::mean_and_se(s).mean;
  EXPECT_LT(std::abs(mean - 2.0 / lc) / (2.0 / lc), 0.03);
  const auto light = ps_comparator(1e-3 * lc, lc, FileSizeDistribution::exponential(1.0), 50000, 2);
  EXPECT_LT(std::abs(stats::mean_and_se(light).mean - 1.0 / lc) / (1.0 / lc), 0.03);
  EXPECT_THROW(ps_comparator(lc, lc, FileSizeDistribution::exponential(1.0), 10, 1), ConfigError);
}

TEST(Comparators, InfiniteServerLowerBound) {
  const auto d = infinite_server_delays(1.0, FileSizeDistribution::exponential(1.0), 100000, 3);
  const auto e = stats::mean_and_se(d);
  EXPECT_LT(std::abs(e.mean - 1.0), 3.0 * e.std_error);

  SimulationConfig cfg = small_config(0.5, 200.0);
  cfg.warmup = 20.0;
  const RunMetrics m = run(cfg);
  const auto w = stats::mean_and_se(m.delay_samples);
  EXPECT_GT(w.mean - 3.0 * w.std_error, e.mean);
}

TEST(FileSizes, ParetoMeanAndTail) {
  const auto f = FileSizeDistribution::pareto(2.5, 1.0);
  EXPECT_DOUBLE_EQ(f.pareto_scale(), 0.6);
  EXPECT_DOUBLE_EQ(f.ccdf(1.2), std::pow(0.5, 2.5));
  Rng rng(4, 0);
  double sum = 0.0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) sum += f.sample(rng);
  EXPECT_NEAR(sum / n, 1.0, 0.02);
  EXPECT_THROW(FileSizeDistribution::pareto(1.0, 1.0), ParameterError);
}

}  // namespace
}  // namespace sbd
