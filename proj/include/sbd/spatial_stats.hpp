#ifndef SBD_SPATIAL_STATS_HPP
#define SBD_SPATIAL_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sbd/error.hpp"
#include "sbd/network_state.hpp"
#include "sbd/random.hpp"
#include "sbd/statistics.hpp"
#include "sbd/torus.hpp"

namespace sbd {

enum class PointSet { kReceivers, kTransmitters };

struct RipleyPoint {
  double r = 0.0;
  double k_hat = 0.0;
  double std_error = 0.0;
  stats::Interval ci;
  /// K for complete spatial randomness, pi r^2.
  double k_csr() const noexcept { return std::numbers::pi * r * r; }
};

namespace detail {

inline const Point& pick(const Link& l, PointSet which) {
  return which == PointSet::kReceivers ? l.rx : l.tx;
}

/// Mean and snapshot-level standard error of per-snapshot values.
inline stats::MeanEstimate snapshot_mean(std::span<const double> per_snapshot) {
  return stats::mean_and_se(per_snapshot);
}

}  // namespace detail

/// |S| / (n (n - 1)) times the number of ordered pairs within distance r,
/// averaged over snapshots.
inline std::vector<RipleyPoint> ripley_k(std::span<const LinkConfiguration> snapshots,
                                         std::span<const double> radii,
                                         PointSet which = PointSet::kReceivers) {
  if (snapshots.empty()) throw StateError("Ripley K needs at least one snapshot");
  std::vector<double> sorted(radii.begin(), radii.end());
  for (double r : sorted) {
    if (!(r >= 0.0) || r >= snapshots.front().domain().half_side()) {
      throw ParameterError("Ripley radius must lie in [0, Q)");
    }
  }
  std::vector<std::size_t> order(radii.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return radii[a] < radii[b]; });
  std::sort(sorted.begin(), sorted.end());
  const double r_max = sorted.empty() ? 0.0 : sorted.back();

  std::vector<std::vector<double>> per_radius(radii.size());
  for (const auto& snap : snapshots) {
    const std::size_t n = snap.size();
    if (n < 2) throw StateError("Ripley K needs snapshots with at least two points");
    const auto& d = snap.domain();
    std::vector<double> counts(sorted.size(), 0.0);
    const auto& links = snap.links();
    for (std::size_t i = 0; i < n; ++i) {
      const Point& a = detail::pick(links[i], which);
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dist = d.distance_unchecked(a, detail::pick(links[j], which));
        if (dist > r_max) continue;
        const auto first = std::lower_bound(sorted.begin(), sorted.end(), dist);
        counts[static_cast<std::size_t>(first - sorted.begin())] += 2.0;
      }
    }
    // Turn bucket counts into cumulative counts.
    for (std::size_t k = 1; k < counts.size(); ++k) counts[k] += counts[k - 1];
    const double scale = d.area() / (static_cast<double>(n) * static_cast<double>(n - 1));
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      per_radius[order[k]].push_back(scale * counts[k]);
    }
  }
  std::vector<RipleyPoint> out;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const auto est = detail::snapshot_mean(per_radius[i]);
    out.push_back({radii[i], est.mean, est.std_error, est.ci95()});
  }
  return out;
}

/// A bounded, non-negative, non-increasing radial kernel.
class ShotNoiseKernel {
 public:
  using Fn = std::function<double(double)>;

  /// Checks the kernel on a grid of `grid_points` radii in [0, max_radius].
  ShotNoiseKernel(Fn f, double max_radius, std::size_t grid_points = 512) : f_(std::move(f)) {
    if (!f_) throw InvariantError("kernel function is empty");
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i <= grid_points; ++i) {
      const double r = max_radius * static_cast<double>(i) / static_cast<double>(grid_points);
      const double v = f_(r);
      if (!std::isfinite(v) || v < 0.0) throw InvariantError("kernel must be finite and non-negative");
      if (v > prev) throw InvariantError("kernel must be non-increasing");
      prev = v;
    }
  }

  static ShotNoiseKernel indicator(double radius, double max_radius) {
    return ShotNoiseKernel([radius](double r) { return r <= radius ? 1.0 : 0.0; }, max_radius);
  }

  double operator()(double r) const { return f_(r); }

 private:
  Fn f_;
};

struct PalmEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_points = 0;
  std::size_t n_snapshots = 0;
  std::vector<double> per_snapshot;

  stats::Interval ci95() const noexcept {
    return {value - stats::kZ95 * std_error, value + stats::kZ95 * std_error};
  }
};

namespace detail {

/// Pooled mean over all points; standard error from the spread of snapshot means
/// (or of the points when only one snapshot exists).
inline PalmEstimate finish_palm(const std::vector<std::vector<double>>& values) {
  PalmEstimate est;
  double total = 0.0;
  std::vector<double> all;
  for (const auto& snap : values) {
    if (snap.empty()) continue;
    double s = 0.0;
    for (double v : snap) s += v;
    total += s;
    est.n_points += snap.size();
    est.per_snapshot.push_back(s / static_cast<double>(snap.size()));
    if (values.size() == 1) all = snap;
  }
  est.n_snapshots = est.per_snapshot.size();
  if (est.n_points == 0) throw StateError("no points to average over");
  est.value = total / static_cast<double>(est.n_points);
  est.std_error = est.n_snapshots > 1 ? stats::mean_and_se(est.per_snapshot).std_error
                                      : stats::mean_and_se(all).std_error;
  return est;
}

}  // namespace detail

struct ShotNoiseComparison {
  PalmEstimate palm;
  PalmEstimate volume;
  std::size_t skipped_snapshots = 0;
};

/// Shot noise seen from the receivers (own transmitter excluded) against the shot
/// noise at `probes` uniform locations per snapshot.
inline ShotNoiseComparison palm_shot_noise(std::span<const LinkConfiguration> snapshots,
                                           const ShotNoiseKernel& kernel, std::size_t probes,
                                           std::uint64_t seed) {
  if (probes < 1) throw ParameterError("need at least one probe location");
  ShotNoiseComparison out;
  std::vector<std::vector<double>> palm, volume;
  for (std::size_t s = 0; s < snapshots.size(); ++s) {
    const auto& snap = snapshots[s];
    if (snap.size() == 0) {
      ++out.skipped_snapshots;
      continue;
    }
    const auto& d = snap.domain();
    const auto& links = snap.links();
    std::vector<double> p;
    p.reserve(links.size());
    for (const auto& own : links) {
      double sum = 0.0;
      for (const auto& other : links) {
        if (other.id == own.id) continue;
        sum += kernel(d.distance_unchecked(own.rx, other.tx));
      }
      p.push_back(sum);
    }
    palm.push_back(std::move(p));
    Rng rng(seed, s);
    const double q = d.half_side();
    std::vector<double> v;
    for (std::size_t m = 0; m < probes; ++m) {
      const Point x = d.wrap({rng.uniform(-q, q), rng.uniform(-q, q)});
      double sum = 0.0;
      for (const auto& other : links) sum += kernel(d.distance_unchecked(x, other.tx));
      v.push_back(sum);
    }
    volume.push_back(std::move(v));
  }
  out.palm = detail::finish_palm(palm);
  out.volume = detail::finish_palm(volume);
  return out;
}

struct LaplacePoint {
  double s = 0.0;
  PalmEstimate estimate;
};

/// Receiver-averaged E[exp(-s I)] for each s.
inline std::vector<LaplacePoint> palm_laplace_interference(
    std::span<const LinkConfiguration> snapshots, std::span<const double> s_grid,
    const ChannelParams& p) {
  for (double s : s_grid) {
    if (!(s >= 0.0)) throw ParameterError("Laplace argument must be non-negative");
  }
  std::vector<std::vector<double>> interferences;
  for (const auto& snap : snapshots) {
    if (snap.size() == 0) continue;
    std::vector<double> is;
    for (const auto& own : snap.links()) is.push_back(interference(own, snap, p));
    interferences.push_back(std::move(is));
  }
  std::vector<LaplacePoint> out;
  for (double s : s_grid) {
    std::vector<std::vector<double>> values;
    for (const auto& is : interferences) {
      std::vector<double> v;
      for (double i : is) v.push_back(s == 0.0 ? 1.0 : std::exp(-s * i));
      values.push_back(std::move(v));
    }
    out.push_back({s, detail::finish_palm(values)});
  }
  return out;
}

/// Binomial stand-in for a marked Poisson process: each snapshot is replaced by the
/// same number of links with uniform receivers and independent uniform angles.
inline std::vector<LinkConfiguration> binomial_surrogate(
    std::span<const LinkConfiguration> snapshots, std::uint64_t seed) {
  std::vector<LinkConfiguration> out;
  for (std::size_t s = 0; s < snapshots.size(); ++s) {
    const auto& snap = snapshots[s];
    const auto& d = snap.domain();
    const double q = d.half_side();
    Rng rng(seed, s);
    LinkConfiguration fresh(d, snap.link_length());
    for (std::size_t i = 0; i < snap.size(); ++i) {
      const Point rx = d.wrap({rng.uniform(-q, q), rng.uniform(-q, q)});
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      fresh.add({i, rx, place_transmitter(rx, snap.link_length(), angle, d), 1.0, 0.0});
    }
    out.push_back(std::move(fresh));
  }
  return out;
}

struct RateConservation {
  double lhs = 0.0;
  PalmEstimate mean_rate;
  double density = 0.0;
  double rhs = 0.0;
  double relative_gap = 0.0;
};

/// Compares lambda L with (mean density) x (receiver-averaged Shannon rate).
inline RateConservation rate_conservation_check(std::span<const LinkConfiguration> snapshots,
                                                const ChannelParams& p, double lambda) {
  if (snapshots.empty()) throw StateError("rate conservation needs snapshots");
  RateConservation out;
  out.lhs = lambda * p.L;
  std::vector<std::vector<double>> rates;
  double density = 0.0;
  for (const auto& snap : snapshots) {
    density += static_cast<double>(snap.size()) / snap.domain().area();
    std::vector<double> r;
    for (const auto& own : snap.links()) r.push_back(shannon_rate(own, snap, p));
    rates.push_back(std::move(r));
  }
  out.density = density / static_cast<double>(snapshots.size());
  out.mean_rate = detail::finish_palm(rates);
  out.rhs = out.density * out.mean_rate.value;
  out.relative_gap = std::abs(out.lhs - out.rhs) / out.lhs;
  return out;
}

}  // namespace sbd

#endif  // SBD_SPATIAL_STATS_HPP
