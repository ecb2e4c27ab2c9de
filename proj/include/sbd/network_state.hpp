#ifndef SBD_NETWORK_STATE_HPP
#define SBD_NETWORK_STATE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <sstream>
#include <unordered_set>
#include <vector>

#include "sbd/error.hpp"
#include "sbd/random.hpp"
#include "sbd/torus.hpp"

namespace sbd {

/// A live transmitter-receiver pair.
struct Link {
  std::uint64_t id = 0;
  Point rx;
  Point tx;
  double residual_bits = 0.0;
  double birth_time = 0.0;
};

/// Transmitter at distance T from rx in direction `angle`, wrapped onto the torus.
inline Point place_transmitter(const Point& rx, double link_length, double angle,
                               const TorusDomain& d) {
  return d.wrap({rx.x + link_length * std::cos(angle), rx.y + link_length * std::sin(angle)});
}

/// The marked point process of live links: receivers carrying transmitter marks.
class LinkConfiguration {
 public:
  LinkConfiguration(TorusDomain domain, double link_length)
      : domain_(domain), link_length_(link_length) {
    if (!(link_length >= 0.0) || link_length > domain.half_side()) {
      throw ParameterError("link length must lie in [0, Q]");
    }
  }

  const TorusDomain& domain() const noexcept { return domain_; }
  double link_length() const noexcept { return link_length_; }
  const std::vector<Link>& links() const noexcept { return links_; }
  std::size_t size() const noexcept { return links_.size(); }
  bool empty() const noexcept { return links_.empty(); }
  const Link& operator[](std::size_t i) const { return links_[i]; }

  /// Appends a link after checking geometry and workload. Id uniqueness is
  /// checked by validate(), which is O(n).
  void add(const Link& link) {
    if (!domain_.contains(link.rx) || !domain_.contains(link.tx)) {
      throw DomainError("link endpoint outside the torus");
    }
    const double t = domain_.distance_unchecked(link.rx, link.tx);
    if (std::abs(t - link_length_) > 1e-9 * std::max(link_length_, 1.0)) {
      std::ostringstream msg;
      msg << "link " << link.id << " has length " << t << ", expected " << link_length_;
      throw InvariantError(msg.str());
    }
    if (!(link.residual_bits > 0.0)) {
      throw InvariantError("live links need a strictly positive residual workload");
    }
    links_.push_back(link);
  }

  void validate() const {
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(links_.size());
    for (const auto& l : links_) {
      if (!seen.insert(l.id).second) {
        throw InvariantError("duplicate link id " + std::to_string(l.id));
      }
    }
  }

  /// Same links shifted by `offset`, wrapped back onto the torus.
  LinkConfiguration translated(const Point& offset) const {
    LinkConfiguration out(domain_, link_length_);
    out.links_.reserve(links_.size());
    for (auto l : links_) {
      l.rx = domain_.wrap({l.rx.x + offset.x, l.rx.y + offset.y});
      l.tx = domain_.wrap({l.tx.x + offset.x, l.tx.y + offset.y});
      out.links_.push_back(l);
    }
    return out;
  }

 private:
  TorusDomain domain_;
  double link_length_;
  std::vector<Link> links_;
};

/// Constants of the rate function R = C log2(1 + l(T) / (N0 + I)).
struct ChannelParams {
  double C = 1.0;
  double N0 = 1.0;
  double L = 1.0;
  PathLossModel pathloss = PathLossModel::bounded(1.0, 4.0);

  void validate() const {
    if (!(C > 0.0)) throw ParameterError("rate constant C must be positive");
    if (!(N0 > 0.0)) throw ParameterError("noise power N0 must be positive");
    if (!(L > 0.0)) throw ParameterError("mean file size L must be positive");
  }
};

/// C log2(1 + signal / (N0 + I)).
inline double rate_from_interference(double signal, double interference, const ChannelParams& p) {
  return p.C * std::log1p(signal / (p.N0 + interference)) / std::numbers::ln2;
}

/// Solo-link rate C log2(1 + l(T)/N0).
inline double solo_rate(const ChannelParams& p, double link_length) {
  return rate_from_interference(p.pathloss(link_length), 0.0, p);
}

/// Interference at `own.rx` from every other link's transmitter. The own link is
/// excluded by id, even if another transmitter sits on top of it.
inline double interference(const Link& own, const LinkConfiguration& cfg, const ChannelParams& p) {
  const auto& d = cfg.domain();
  double sum = 0.0;
  for (const auto& other : cfg.links()) {
    if (other.id == own.id) continue;
    sum += p.pathloss(torus_distance(own.rx, other.tx, d));
  }
  return sum;
}

/// Interference at an arbitrary location from all transmitters.
inline double interference_at(const Point& where, const LinkConfiguration& cfg,
                              const ChannelParams& p) {
  const auto& d = cfg.domain();
  double sum = 0.0;
  for (const auto& other : cfg.links()) sum += p.pathloss(torus_distance(where, other.tx, d));
  return sum;
}

inline double shannon_rate(const Link& own, const LinkConfiguration& cfg, const ChannelParams& p) {
  return rate_from_interference(p.pathloss(cfg.link_length()), interference(own, cfg, p), p);
}

/// Total service rate (bits/time) of the configuration: sum of all link rates.
inline double workload_derivative(const LinkConfiguration& cfg, const ChannelParams& p) {
  double total = 0.0;
  for (const auto& link : cfg.links()) total += shannon_rate(link, cfg, p);
  return total;
}

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// Streaming mean/variance (Welford). A constant stream yields that constant exactly.
class RunningStats {
 public:
  void add(double x) noexcept {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }
  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double std_error() const noexcept {
    return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }
  MonteCarloEstimate estimate() const noexcept { return {mean_, std_error(), n_}; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Unit-mean fading power law.
class FadeDistribution {
 public:
  using Sampler = std::function<double(Rng&)>;

  /// h == 1: no fading.
  static FadeDistribution none() { return FadeDistribution([](Rng&) { return 1.0; }); }
  /// Rayleigh amplitude fading, i.e. unit exponential power.
  static FadeDistribution rayleigh() {
    return FadeDistribution([](Rng& r) { return r.exponential(1.0); });
  }
  static FadeDistribution custom(Sampler s) { return FadeDistribution(std::move(s)); }

  double operator()(Rng& r) const { return sampler_(r); }

 private:
  explicit FadeDistribution(Sampler s) : sampler_(std::move(s)) {}
  Sampler sampler_;
};

enum class FadeScope { kAllTerms, kSignalOnly };

/// Monte Carlo estimate of the ergodic rate under i.i.d. fades on each term.
inline MonteCarloEstimate faded_rate(const Link& own, const LinkConfiguration& cfg,
                                     const ChannelParams& p, const FadeDistribution& fade,
                                     std::size_t mc_samples, Rng& rng,
                                     FadeScope scope = FadeScope::kAllTerms) {
  if (mc_samples < 1) throw ParameterError("faded_rate needs at least one Monte Carlo sample");
  const auto& d = cfg.domain();
  std::vector<double> gains;
  gains.reserve(cfg.size());
  for (const auto& other : cfg.links()) {
    if (other.id != own.id) gains.push_back(p.pathloss(torus_distance(own.rx, other.tx, d)));
  }
  const double signal = p.pathloss(cfg.link_length());
  double unfaded_interference = 0.0;
  for (double g : gains) unfaded_interference += g;

  RunningStats stats;
  for (std::size_t s = 0; s < mc_samples; ++s) {
    const double h_signal = fade(rng);
    double i_sum = unfaded_interference;
    if (scope == FadeScope::kAllTerms) {
      i_sum = 0.0;
      for (double g : gains) i_sum += fade(rng) * g;
    }
    stats.add(rate_from_interference(h_signal * signal, i_sum, p));
  }
  return stats.estimate();
}

/// Antenna counts for the independent-channel, no-CSIT MIMO rate.
struct MimoConfig {
  int xt = 1;
  int xr = 1;
  std::size_t mc_samples = 1000;

  void validate() const {
    if (xt < 1 || xr < 1) throw ParameterError("antenna counts must be at least 1");
    if (mc_samples < 1) throw ParameterError("MIMO estimate needs at least one sample");
  }
};

using ChannelMatrix = Eigen::MatrixXcd;

/// Xr x Xt matrices with i.i.d. standard complex normal entries, E|h|^2 = 1.
inline std::vector<ChannelMatrix> draw_mimo_channels(const MimoConfig& m, Rng& rng) {
  m.validate();
  std::vector<ChannelMatrix> draws;
  draws.reserve(m.mc_samples);
  const double scale = std::numbers::sqrt2 / 2.0;
  for (std::size_t s = 0; s < m.mc_samples; ++s) {
    ChannelMatrix h(m.xr, m.xt);
    for (int c = 0; c < m.xt; ++c) {
      for (int r = 0; r < m.xr; ++r) {
        const double re = rng.normal() * scale;
        const double im = rng.normal() * scale;
        h(r, c) = {re, im};
      }
    }
    draws.push_back(std::move(h));
  }
  return draws;
}

/// Eigenvalues of H H^dagger (Xr of them), ascending.
inline Eigen::VectorXd gram_eigenvalues(const ChannelMatrix& h) {
  const Eigen::MatrixXcd gram = h * h.adjoint();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(gram, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

/// C E[sum_i log2(1 + sigma_i(HH^dag) / (Xt (N0 + I)))] over the supplied draws.
inline MonteCarloEstimate mimo_rate_for_interference(const std::vector<ChannelMatrix>& draws,
                                                     double interference,
                                                     const ChannelParams& p) {
  if (draws.empty()) throw ParameterError("no channel draws supplied");
  const double xt = static_cast<double>(draws.front().cols());
  const double denom = xt * (p.N0 + interference);
  RunningStats stats;
  for (const auto& h : draws) {
    const Eigen::VectorXd sigma = gram_eigenvalues(h);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
      sum += std::log1p(std::max(sigma[i], 0.0) / denom) / std::numbers::ln2;
    }
    stats.add(p.C * sum);
  }
  return stats.estimate();
}

/// MIMO rate of `own` with scalar interference from the rest of the configuration.
inline MonteCarloEstimate mimo_indep_rate(const Link& own, const LinkConfiguration& cfg,
                                          const ChannelParams& p, const MimoConfig& m, Rng& rng) {
  const auto draws = draw_mimo_channels(m, rng);
  return mimo_rate_for_interference(draws, interference(own, cfg, p), p);
}

}  // namespace sbd

#endif  // SBD_NETWORK_STATE_HPP
