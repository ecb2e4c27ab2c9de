#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sbd/network_state.hpp"
#include "sbd/quadrature.hpp"
#include "sbd/random.hpp"

namespace sbd {
namespace {

LinkConfiguration random_config(std::size_t n, double q, double t, Rng& rng,
                                std::uint64_t first_id = 0) {
  const TorusDomain d(q);
  LinkConfiguration cfg(d, t);
  for (std::size_t i = 0; i < n; ++i) {
    const Point rx = d.wrap({rng.uniform(-q, q), rng.uniform(-q, q)});
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    cfg.add({first_id + i, rx, place_transmitter(rx, t, angle, d), 1.0, 0.0});
  }
  return cfg;
}

TEST(Interference, LoneLinkIsZero) {
  const TorusDomain d(5.0);
  LinkConfiguration cfg(d, 0.0);
  cfg.add({0, {1, 1}, {1, 1}, 1.0, 0.0});
  EXPECT_EQ(interference(cfg[0], cfg, ChannelParams{}), 0.0);
}

TEST(Interference, TwoLinksSeeEachOther) {
  const TorusDomain d(5.0);
  LinkConfiguration cfg(d, 0.0);
  cfg.add({0, {4.5, 0}, {4.5, 0}, 1.0, 0.0});
  cfg.add({1, {-4.5, 0}, {-4.5, 0}, 1.0, 0.0});
  const ChannelParams p;
  const double expect = p.pathloss(1.0);
  EXPECT_DOUBLE_EQ(interference(cfg[0], cfg, p), expect);
  EXPECT_DOUBLE_EQ(interference(cfg[1], cfg, p), expect);
}

TEST(Interference, ExclusionIsByIdentity) {
  const TorusDomain d(5.0);
  LinkConfiguration cfg(d, 0.0);
  cfg.add({0, {0, 0}, {0, 0}, 1.0, 0.0});
  cfg.add({1, {0, 0}, {0, 0}, 1.0, 0.0});
  EXPECT_DOUBLE_EQ(interference(cfg[0], cfg, ChannelParams{}), 1.0);
}

TEST(Interference, FiveLinkBruteForceOracle) {
  const TorusDomain d(5.0);
  LinkConfiguration cfg(d, 1.0);
  const double pts[5][4] = {{0.0, 0.0, 1.0, 0.0},   {2.0, 3.0, 2.0, 4.0},  {-4.5, 4.5, -4.5, -4.5},
                            {3.0, -2.0, 3.6, -2.8}, {-1.0, -1.0, -1.0, -2.0}};
  for (std::uint64_t i = 0; i < 5; ++i) {
    cfg.add({i, {pts[i][0], pts[i][1]}, {pts[i][2], pts[i][3]}, 1.0, 0.0});
  }
  const ChannelParams p;
  for (std::size_t i = 0; i < 5; ++i) {
    double oracle = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      if (j == i) continue;
      double best = 1e300;
      for (int a = -1; a <= 1; ++a) {
        for (int b = -1; b <= 1; ++b) {
          best = std::min(best, std::hypot(pts[i][0] - pts[j][2] + 10.0 * a,
                                           pts[i][1] - pts[j][3] + 10.0 * b));
        }
      }
      oracle += std::pow(1.0 + best, -4.0);
    }
    EXPECT_NEAR(interference(cfg[i], cfg, p), oracle, 1e-12 * oracle);
  }
}

TEST(Interference, AdditiveOverDisjointSets) {
  Rng rng(3, 0);
  const auto a = random_config(20, 5.0, 0.5, rng, 0);
  const auto b = random_config(15, 5.0, 0.5, rng, 100);
  LinkConfiguration both = a;
  for (const auto& l : b.links()) both.add(l);
  const ChannelParams p;
  for (const auto& own : a.links()) {
    const double sum = interference(own, a, p) + interference_at(own.rx, b, p);
    EXPECT_NEAR(interference(own, both, p), sum, 1e-12 * sum);
  }
}

TEST(LinkConfiguration, RejectsBadLinks) {
  const TorusDomain d(1.0);
  LinkConfiguration cfg(d, 0.5);
  EXPECT_THROW(cfg.add({0, {0, 0}, {0.2, 0}, 1.0, 0.0}), InvariantError);
  EXPECT_THROW(cfg.add({0, {0, 0}, {0.5, 0}, 0.0, 0.0}), InvariantError);
  EXPECT_THROW(cfg.add({0, {2, 0}, {0.5, 0}, 1.0, 0.0}), DomainError);
  cfg.add({0, {0, 0}, {0.5, 0}, 1.0, 0.0});
  cfg.add({0, {0.1, 0}, {0.6, 0}, 1.0, 0.0});
  EXPECT_THROW(cfg.validate(), InvariantError);
  EXPECT_THROW(LinkConfiguration(d, 2.0), ParameterError);
}

TEST(ShannonRate, LoneLinkUnitRate) {
  const TorusDomain d(5.0);
  LinkConfiguration cfg(d, 0.0);
  cfg.add({0, {0, 0}, {0, 0}, 1.0, 0.0});
  EXPECT_DOUBLE_EQ(shannon_rate(cfg[0], cfg, ChannelParams{}), 1.0);
  EXPECT_DOUBLE_EQ(solo_rate(ChannelParams{}, 0.0), 1.0);
}

TEST(ShannonRate, ArithmeticOracle) {
  const ChannelParams p;
  EXPECT_NEAR(rate_from_interference(1.0 / 16.0, 1.0 / 16.0, p), std::log2(18.0 / 17.0), 1e-15);
  EXPECT_NEAR(std::log2(18.0 / 17.0), 0.08246, 1e-5);
}

TEST(ShannonRate, DecreasesToZero) {
  const ChannelParams p;
  double prev = rate_from_interference(1.0, 0.0, p);
  for (double i = 1.0; i < 1e12; i *= 10.0) {
    const double r = rate_from_interference(1.0, i, p);
    EXPECT_GT(r, 0.0);
    EXPECT_LT(r, prev);
    prev = r;
  }
  EXPECT_NEAR(prev, 1e-11 / std::numbers::ln2, 1e-16);
}

TEST(ShannonRate, MonotoneUnderExtension) {
  Rng rng(5, 0);
  const ChannelParams p;
  for (int trial = 0; trial < 50; ++trial) {
    const auto small = random_config(10, 5.0, 1.0, rng, 0);
    LinkConfiguration big = small;
    const auto extra = random_config(5, 5.0, 1.0, rng, 1000);
    for (const auto& l : extra.links()) big.add(l);
    for (const auto& own : small.links()) {
      ASSERT_GE(shannon_rate(own, small, p), shannon_rate(own, big, p));
    }
  }
}

TEST(ShannonRate, RateTimesInterferenceBound) {
  Rng rng(9, 0);
  const ChannelParams p;
  for (int trial = 0; trial < 50; ++trial) {
    const auto cfg = random_config(1 + trial * 4, 5.0, 0.7, rng);
    const double bound = p.C * p.pathloss(0.7) / std::numbers::ln2;
    for (const auto& own : cfg.links()) {
      ASSERT_LE(shannon_rate(own, cfg, p) * interference(own, cfg, p), bound * (1.0 + 1e-12));
    }
  }
}

TEST(WorkloadDerivative, EmptySingleAndSymmetric) {
  const TorusDomain d(5.0);
  const ChannelParams p;
  LinkConfiguration cfg(d, 0.0);
  EXPECT_EQ(workload_derivative(cfg, p), 0.0);
  cfg.add({0, {0, 0}, {0, 0}, 1.0, 0.0});
  EXPECT_DOUBLE_EQ(workload_derivative(cfg, p), solo_rate(p, 0.0));

  const int k = 7;
  LinkConfiguration gon(d, 0.0);
  for (int i = 0; i < k; ++i) {
    const double th = 2.0 * std::numbers::pi * i / k;
    const Point x{2.0 * std::cos(th), 2.0 * std::sin(th)};
    gon.add({static_cast<std::uint64_t>(i), x, x, 1.0, 0.0});
  }
  double direct = 0.0;
  for (int j = 1; j < k; ++j) {
    const double chord = 2.0 * 2.0 * std::sin(std::numbers::pi * j / k);
    direct += p.pathloss(chord);
  }
  const double common = std::log2(1.0 + 1.0 / (1.0 + direct));
  EXPECT_NEAR(shannon_rate(gon[3], gon, p), common, 1e-13);
  EXPECT_NEAR(workload_derivative(gon, p), k * common, 1e-12);
}

TEST(FadedRate, NoFadingEqualsShannon) {
  Rng rng(1, 0);
  const auto cfg = random_config(12, 5.0, 0.5, rng);
  const ChannelParams p;
  Rng mc(2, 0);
  const auto est = faded_rate(cfg[4], cfg, p, FadeDistribution::none(), 50, mc);
  EXPECT_DOUBLE_EQ(est.mean, shannon_rate(cfg[4], cfg, p));
  EXPECT_EQ(est.std_error, 0.0);
  EXPECT_THROW(faded_rate(cfg[4], cfg, p, FadeDistribution::none(), 0, mc), ParameterError);
}

TEST(FadedRate, RayleighLoneLinkMatchesQuadrature) {
  const TorusDomain d(5.0);
  LinkConfiguration cfg(d, 0.0);
  cfg.add({0, {0, 0}, {0, 0}, 1.0, 0.0});
  const ChannelParams p;
  Rng mc(4, 0);
  const auto est = faded_rate(cfg[0], cfg, p, FadeDistribution::rayleigh(), 200000, mc);
  const double oracle = quadrature::integrate_value(
      [](double h) { return std::exp(-h) * std::log2(1.0 + h); }, 0.0,
      std::numeric_limits<double>::infinity(), 1e-10);
  EXPECT_NEAR(oracle, 0.86, 0.01);
  EXPECT_LT(std::abs(est.mean - oracle), 3.0 * est.std_error);
}

TEST(FadedRate, MoreLinksNeverHelp) {
  Rng rng(8, 0);
  const auto small = random_config(5, 5.0, 0.5, rng, 0);
  LinkConfiguration big = small;
  const auto extra = random_config(10, 5.0, 0.5, rng, 100);
  for (const auto& l : extra.links()) big.add(l);
  const ChannelParams p;
  Rng a(6, 0), b(6, 1);
  const auto es = faded_rate(small[0], small, p, FadeDistribution::rayleigh(), 40000, a);
  const auto eb = faded_rate(big[0], big, p, FadeDistribution::rayleigh(), 40000, b);
  EXPECT_LT(eb.mean, es.mean + 3.0 * std::hypot(es.std_error, eb.std_error));
}

TEST(Mimo, ScalarCaseMatchesSignalOnlyFading) {
  const TorusDomain d(5.0);
  LinkConfiguration cfg(d, 0.0);
  cfg.add({0, {0, 0}, {0, 0}, 1.0, 0.0});
  cfg.add({1, {1, 0}, {1, 0}, 1.0, 0.0});
  const ChannelParams p;
  Rng r1(12, 0), r2(12, 1);
  const auto mimo = mimo_indep_rate(cfg[0], cfg, p, MimoConfig{1, 1, 100000}, r1);
  const auto siso = faded_rate(cfg[0], cfg, p, FadeDistribution::rayleigh(), 100000, r2,
                               FadeScope::kSignalOnly);
  EXPECT_LT(std::abs(mimo.mean - siso.mean), 3.0 * std::hypot(mimo.std_error, siso.std_error));
}

TEST(Mimo, MatchesIndependentEigenOracle) {
  const ChannelParams p;
  Rng rng(13, 0);
  const auto draws = draw_mimo_channels(MimoConfig{2, 2, 2000}, rng);
  const auto est = mimo_rate_for_interference(draws, 0.0, p);
  double oracle = 0.0;
  for (const auto& h : draws) {
    // Closed-form eigenvalues of the 2x2 Hermitian Gram matrix.
    const Eigen::Matrix2cd g = h * h.adjoint();
    const double tr = g(0, 0).real() + g(1, 1).real();
    const double det = (g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0)).real();
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    const double s1 = tr / 2.0 + disc, s2 = std::max(0.0, tr / 2.0 - disc);
    oracle += std::log2(1.0 + s1 / 2.0) + std::log2(1.0 + s2 / 2.0);
  }
  oracle /= static_cast<double>(draws.size());
  EXPECT_NEAR(est.mean, oracle, 1e-9);
}

TEST(Mimo, RejectsBadAntennaCounts) {
  Rng rng(1, 0);
  EXPECT_THROW(draw_mimo_channels(MimoConfig{0, 2, 10}, rng), ParameterError);
}

TEST(ChannelParams, Validation) {
  ChannelParams p;
  p.N0 = 0.0;
  EXPECT_THROW(p.validate(), ParameterError);
  p.N0 = 1.0;
  p.C = -1.0;
  EXPECT_THROW(p.validate(), ParameterError);
}

}  // namespace
}  // namespace sbd
