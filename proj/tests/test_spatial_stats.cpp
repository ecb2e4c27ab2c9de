#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "sbd/simulator.hpp"
#include "sbd/spatial_stats.hpp"

namespace sbd {
namespace {

std::vector<LinkConfiguration> binomial(std::size_t snapshots, std::size_t n, double q, double t,
                                        std::uint64_t seed) {
  const TorusDomain d(q);
  std::vector<LinkConfiguration> out;
  for (std::size_t s = 0; s < snapshots; ++s) {
    LinkConfiguration cfg(d, t);
    for (std::size_t i = 0; i < n; ++i) {
      cfg.add({i, {0, 0}, place_transmitter({0, 0}, t, 0.0, d), 1.0, 0.0});
    }
    out.push_back(binomial_surrogate(std::vector<LinkConfiguration>{cfg}, seed + s).front());
  }
  return out;
}

const std::vector<LinkConfiguration>& steady_snapshots() {
  static const std::vector<LinkConfiguration> snaps = [] {
    SimulationConfig cfg;
    cfg.lambda = 0.7 * critical_lambda_for(cfg);
    cfg.horizon = 400.0;
    cfg.warmup = 50.0;
    cfg.seed = 17;
    for (int k = 1; k <= 70; ++k) cfg.snapshot_times.push_back(50.0 + 5.0 * k);
    return run(cfg).snapshots;
  }();
  return snaps;
}

TEST(RipleyK, TwoPointsStepFunction) {
  const TorusDomain d(5.0);
  LinkConfiguration cfg(d, 0.0);
  cfg.add({0, {0, 0}, {0, 0}, 1.0, 0.0});
  cfg.add({1, {1.5, 0}, {1.5, 0}, 1.0, 0.0});
  const std::vector<LinkConfiguration> snaps{cfg};
  const std::vector<double> radii{1.0, 1.4999, 1.5, 3.0};
  const auto k = ripley_k(snaps, radii);
  EXPECT_EQ(k[0].k_hat, 0.0);
  EXPECT_EQ(k[1].k_hat, 0.0);
  EXPECT_DOUBLE_EQ(k[2].k_hat, d.area());
  EXPECT_DOUBLE_EQ(k[3].k_hat, d.area());
}

TEST(RipleyK, BinomialCoversCsr) {
  const auto snaps = binomial(50, 500, 5.0, 0.0, 100);
  const std::vector<double> radii{0.25, 0.5, 1.0, 2.0};
  const auto k = ripley_k(snaps, radii);
  for (const auto& pt : k) {
    EXPECT_TRUE(pt.ci.contains(pt.k_csr())) << "r=" << pt.r << " K=" << pt.k_hat;
  }
}

TEST(RipleyK, NonDecreasingAndUnorderedRadii) {
  const auto& snaps = steady_snapshots();
  const std::vector<double> radii{2.0, 0.1, 1.0, 0.5, 0.0};
  const auto k = ripley_k(snaps, radii);
  EXPECT_EQ(k[4].k_hat, 0.0);
  EXPECT_LE(k[1].k_hat, k[3].k_hat);
  EXPECT_LE(k[3].k_hat, k[2].k_hat);
  EXPECT_LE(k[2].k_hat, k[0].k_hat);
}

TEST(RipleyK, Errors) {
  const auto snaps = binomial(2, 10, 5.0, 0.0, 1);
  const std::vector<double> bad{5.0};
  EXPECT_THROW(ripley_k(snaps, bad), ParameterError);
  LinkConfiguration lone(TorusDomain(5.0), 0.0);
  lone.add({0, {0, 0}, {0, 0}, 1.0, 0.0});
  const std::vector<LinkConfiguration> one{lone};
  const std::vector<double> ok{1.0};
  EXPECT_THROW(ripley_k(one, ok), StateError);
}

TEST(RipleyK, SteadyStateClustersAtShortRange) {
  const std::vector<double> radii{0.1, 0.2, 0.3};
  for (const auto& pt : ripley_k(steady_snapshots(), radii)) {
    EXPECT_GT(pt.ci.lo, pt.k_csr()) << "r=" << pt.r;
  }
}

TEST(Estimators, TranslationAndPermutationInvariant) {
  const auto& snaps = steady_snapshots();
  std::vector<LinkConfiguration> moved, reversed;
  for (const auto& s : snaps) {
    moved.push_back(s.translated({1.37, -2.9}));
    LinkConfiguration r(s.domain(), s.link_length());
    for (auto it = s.links().rbegin(); it != s.links().rend(); ++it) r.add(*it);
    reversed.push_back(r);
  }
  const std::vector<double> radii{0.3, 1.0};
  const auto k0 = ripley_k(snaps, radii);
  const auto k1 = ripley_k(moved, radii);
  const auto k2 = ripley_k(reversed, radii);
  for (std::size_t i = 0; i < radii.size(); ++i) {
    EXPECT_NEAR(k0[i].k_hat, k1[i].k_hat, 1e-9 * k0[i].k_hat);
    EXPECT_EQ(k0[i].k_hat, k2[i].k_hat);
  }
  const std::vector<double> s{1.0};
  EXPECT_NEAR(palm_laplace_interference(snaps, s, ChannelParams{})[0].estimate.value,
              palm_laplace_interference(moved, s, ChannelParams{})[0].estimate.value, 1e-9);
}

TEST(ShotNoise, ConstantKernelCounts) {
  const auto snaps = binomial(3, 40, 5.0, 0.5, 7);
  const ShotNoiseKernel c([](double) { return 2.0; }, 10.0);
  const auto r = palm_shot_noise(snaps, c, 10, 1);
  EXPECT_DOUBLE_EQ(r.palm.value, 2.0 * 39.0);
  EXPECT_DOUBLE_EQ(r.volume.value, 2.0 * 40.0);
}

TEST(ShotNoise, PathLossKernelEqualsInterference) {
  const auto& snaps = steady_snapshots();
  const ChannelParams p;
  const ShotNoiseKernel kernel([&](double r) { return p.pathloss(r); }, 10.0);
  const auto r = palm_shot_noise(snaps, kernel, 1, 1);
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& s : snaps) {
    for (const auto& own : s.links()) {
      total += interference(own, s, p);
      ++n;
    }
  }
  EXPECT_NEAR(r.palm.value, total / static_cast<double>(n), 1e-12 * r.palm.value);
}

TEST(ShotNoise, IndicatorMatchesRipley) {
  const auto& snaps = steady_snapshots();
  const double r0 = 0.8;
  for (std::size_t s = 0; s < 5; ++s) {
    const std::vector<LinkConfiguration> one{snaps[s]};
    const auto sn = palm_shot_noise(one, ShotNoiseKernel::indicator(r0, 10.0), 1, 1);
    const std::vector<double> radii{r0};
    const double k = ripley_k(one, radii)[0].k_hat;
    const double n = static_cast<double>(snaps[s].size());
    EXPECT_NEAR(sn.palm.value, k * (n - 1.0) / snaps[s].domain().area(), 1e-9);
  }
}

TEST(ShotNoise, PalmExceedsVolumeInSteadyState) {
  const ShotNoiseKernel kernel = ShotNoiseKernel::indicator(0.3, 10.0);
  const auto r = palm_shot_noise(steady_snapshots(), kernel, 400, 5);
  EXPECT_GT(r.palm.ci95().lo, r.volume.ci95().hi);
}

TEST(ShotNoise, SkipsEmptySnapshotsAndValidatesKernel) {
  std::vector<LinkConfiguration> snaps = binomial(2, 5, 5.0, 0.0, 3);
  snaps.emplace_back(TorusDomain(5.0), 0.0);
  const auto r = palm_shot_noise(snaps, ShotNoiseKernel::indicator(1.0, 5.0), 3, 1);
  EXPECT_EQ(r.skipped_snapshots, 1u);
  EXPECT_THROW(ShotNoiseKernel([](double r) { return r; }, 1.0), InvariantError);
  EXPECT_THROW(ShotNoiseKernel([](double) { return -1.0; }, 1.0), InvariantError);
}

TEST(Laplace, ZeroAndLargeArguments) {
  const auto snaps = binomial(5, 30, 5.0, 0.0, 9);
  const std::vector<double> s{0.0, 1e6};
  const auto l = palm_laplace_interference(snaps, s, ChannelParams{});
  EXPECT_EQ(l[0].estimate.value, 1.0);
  EXPECT_LT(l[1].estimate.value, 1e-12);
  const std::vector<double> bad{-1.0};
  EXPECT_THROW(palm_laplace_interference(snaps, bad, ChannelParams{}), ParameterError);
}

TEST(Laplace, SurrogateKeepsCounts) {
  const auto& snaps = steady_snapshots();
  const auto sur = binomial_surrogate(snaps, 1);
  ASSERT_EQ(sur.size(), snaps.size());
  for (std::size_t i = 0; i < snaps.size(); ++i) EXPECT_EQ(sur[i].size(), snaps[i].size());
}

TEST(Laplace, SteadyStateBelowSurrogateAtSmallS) {
  const auto& snaps = steady_snapshots();
  const auto sur = binomial_surrogate(snaps, 2);
  const std::vector<double> s{0.25, 0.5};
  const auto a = palm_laplace_interference(snaps, s, ChannelParams{});
  const auto b = palm_laplace_interference(sur, s, ChannelParams{});
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::vector<double> diff;
    for (std::size_t k = 0; k < snaps.size(); ++k) {
      diff.push_back(b[i].estimate.per_snapshot[k] - a[i].estimate.per_snapshot[k]);
    }
    const auto d = stats::mean_and_se(diff);
    EXPECT_GT(d.ci95().lo, 0.0) << "s=" << s[i];
  }
}

TEST(RateConservation, LightTraffic) {
  SimulationConfig cfg;
  cfg.lambda = 0.02 * critical_lambda_for(cfg);
  cfg.horizon = 20100.0;
  cfg.warmup = 20.0;
  for (int k = 0; k < 2000; ++k) cfg.snapshot_times.push_back(20.0 + 10.0 * k);
  const RunMetrics m = run(cfg);
  const auto rc = rate_conservation_check(m.snapshots, cfg.channel, cfg.lambda);
  EXPECT_LT(rc.relative_gap, 0.05);
  EXPECT_NEAR(rc.mean_rate.value, 1.0, 0.05);
}

TEST(RateConservation, TransientIsReportedOnly) {
  SimulationConfig cfg;
  cfg.lambda = 0.5 * critical_lambda_for(cfg);
  cfg.horizon = 3.0;
  cfg.snapshot_times = {0.5, 1.0, 2.0};
  const RunMetrics m = run(cfg);
  const auto rc = rate_conservation_check(m.snapshots, cfg.channel, cfg.lambda);
  EXPECT_TRUE(std::isfinite(rc.relative_gap));
  EXPECT_THROW(rate_conservation_check(std::vector<LinkConfiguration>{}, cfg.channel, 1.0),
               StateError);
}

}  // namespace
}  // namespace sbd
