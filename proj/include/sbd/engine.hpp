#ifndef SBD_ENGINE_HPP
#define SBD_ENGINE_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "sbd/error.hpp"
#include "sbd/network_state.hpp"
#include "sbd/random.hpp"
#include "sbd/torus.hpp"

namespace sbd {

/// File size law. The mean is always carried explicitly so it can be checked
/// against ChannelParams::L.
class FileSizeDistribution {
 public:
  enum class Kind { kExponential, kPareto };

  static FileSizeDistribution exponential(double mean) {
    if (!(mean > 0.0)) throw ParameterError("file size mean must be positive");
    return FileSizeDistribution(Kind::kExponential, mean, 0.0);
  }

  /// Pareto with the given shape (> 1) and scale chosen so that the mean is `mean`.
  static FileSizeDistribution pareto(double shape, double mean) {
    if (!(shape > 1.0)) throw ParameterError("Pareto shape must exceed 1 for a finite mean");
    if (!(mean > 0.0)) throw ParameterError("file size mean must be positive");
    return FileSizeDistribution(Kind::kPareto, mean, shape);
  }

  Kind kind() const noexcept { return kind_; }
  double mean() const noexcept { return mean_; }
  double shape() const noexcept { return shape_; }
  double pareto_scale() const noexcept { return mean_ * (shape_ - 1.0) / shape_; }

  double sample(Rng& rng) const noexcept {
    if (kind_ == Kind::kExponential) return rng.exponential(mean_);
    return pareto_scale() * std::pow(rng.uniform_open0(), -1.0 / shape_);
  }

  /// P(X > x).
  double ccdf(double x) const noexcept {
    if (kind_ == Kind::kExponential) return x <= 0.0 ? 1.0 : std::exp(-x / mean_);
    const double xm = pareto_scale();
    return x <= xm ? 1.0 : std::pow(xm / x, shape_);
  }

 private:
  FileSizeDistribution(Kind k, double mean, double shape) : kind_(k), mean_(mean), shape_(shape) {}
  Kind kind_;
  double mean_;
  double shape_;
};

struct Arrival {
  double time = std::numeric_limits<double>::infinity();
  Point rx;
  Point tx;
  double file_bits = 0.0;
};

/// Space-time Poisson arrivals on the torus with uniform transmitter angles.
///
/// The stream owns its generator, so two copies built from the same seed hand
/// out identical arrivals regardless of what the consuming dynamics do. This is
/// what couples runs with different path-loss functions.
class ArrivalStream {
 public:
  ArrivalStream(double lambda, TorusDomain domain, double link_length, FileSizeDistribution files,
                Rng rng, double start_time = 0.0)
      : total_rate_(lambda * domain.area()),
        domain_(domain),
        link_length_(link_length),
        files_(files),
        rng_(rng) {
    if (!(lambda >= 0.0)) throw ParameterError("arrival intensity must be non-negative");
    next_.time = start_time;
    draw_next();
  }

  const Arrival& peek() const noexcept { return next_; }

  Arrival pop() {
    Arrival a = next_;
    draw_next();
    return a;
  }

 private:
  void draw_next() {
    if (total_rate_ <= 0.0) {
      next_ = Arrival{};
      return;
    }
    const double q = domain_.half_side();
    next_.time += rng_.exponential(1.0 / total_rate_);
    next_.rx = domain_.wrap({rng_.uniform(-q, q), rng_.uniform(-q, q)});
    const double angle = rng_.uniform(0.0, 2.0 * std::numbers::pi);
    next_.tx = place_transmitter(next_.rx, link_length_, angle, domain_);
    next_.file_bits = files_.sample(rng_);
  }

  double total_rate_;
  TorusDomain domain_;
  double link_length_;
  FileSizeDistribution files_;
  Rng rng_;
  Arrival next_;
};

/// Gain between a receiver and a foreign transmitter: l(torus distance).
struct DistanceGain {
  PathLossModel pathloss;
  TorusDomain domain;

  double operator()(const Point& rx, const Point& tx) const noexcept {
    return pathloss(domain.distance_unchecked(rx, tx));
  }
};

/// A link leaving the system.
struct Departure {
  Link link;  // residual_bits is zero
  double death_time = 0.0;
  double file_bits = 0.0;
  double served_bits = 0.0;  // integral of the rate over the lifetime
};

/// Residual-workload event core of the birth-death dynamics.
///
/// Between events every rate is constant, so each link's death candidate is
/// now + residual / rate. Interference is maintained incrementally (one O(N)
/// pass per event, which also refreshes the rates and the next death) and
/// rebuilt from scratch every `kRefreshInterval` events to stop rounding drift.
template <class Gain>
class LinkEngine {
 public:
  static constexpr std::uint64_t kRefreshInterval = 4096;

  LinkEngine(Gain gain, double signal, const ChannelParams& channel)
      : gain_(std::move(gain)), signal_(signal), c_(channel.C), n0_(channel.N0) {}

  double now() const noexcept { return now_; }
  std::size_t size() const noexcept { return links_.size(); }
  bool empty() const noexcept { return links_.empty(); }
  const std::vector<Link>& links() const noexcept { return links_; }
  const std::vector<double>& rates() const noexcept { return rate_; }
  const std::vector<double>& interference() const noexcept { return interference_; }
  double total_rate() const noexcept { return total_rate_; }
  const Gain& gain() const noexcept { return gain_; }

  double next_death_time() const noexcept { return next_death_time_; }

  /// Moves the clock forward; the caller guarantees no death happens before t.
  void advance_to(double t) noexcept {
    const double dt = t - now_;
    if (dt <= 0.0) return;
    for (std::size_t i = 0; i < links_.size(); ++i) {
      const double work = dt * rate_[i];
      links_[i].residual_bits = std::max(links_[i].residual_bits - work, 0.0);
      served_[i] += work;
    }
    now_ = t;
  }

  /// Adds a link at the current time.
  void insert(const Link& link, double file_bits) {
    double own = 0.0;
    for (std::size_t i = 0; i < links_.size(); ++i) {
      own += gain_(link.rx, links_[i].tx);
      interference_[i] += gain_(links_[i].rx, link.tx);
    }
    links_.push_back(link);
    file_.push_back(file_bits);
    served_.push_back(0.0);
    interference_.push_back(own);
    rate_.push_back(0.0);
    after_event();
  }

  /// Removes the link with the earliest death candidate. The clock must already
  /// sit at next_death_time().
  Departure kill_next() {
    const std::size_t k = next_death_index_;
    Departure dep{links_[k], now_, file_[k], served_[k]};
    dep.link.residual_bits = 0.0;
    const Point tx = links_[k].tx;
    remove_at(k);
    for (std::size_t i = 0; i < links_.size(); ++i) {
      interference_[i] = std::max(interference_[i] - gain_(links_[i].rx, tx), 0.0);
    }
    after_event();
    return dep;
  }

  /// Index of a link by id, or size() if absent.
  std::size_t find(std::uint64_t id) const noexcept {
    for (std::size_t i = 0; i < links_.size(); ++i) {
      if (links_[i].id == id) return i;
    }
    return links_.size();
  }

 private:
  void remove_at(std::size_t k) {
    const std::size_t last = links_.size() - 1;
    if (k != last) {
      links_[k] = links_[last];
      file_[k] = file_[last];
      served_[k] = served_[last];
      interference_[k] = interference_[last];
      rate_[k] = rate_[last];
    }
    links_.pop_back();
    file_.pop_back();
    served_.pop_back();
    interference_.pop_back();
    rate_.pop_back();
  }

  void rebuild_interference() {
    for (std::size_t i = 0; i < links_.size(); ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < links_.size(); ++j) {
        if (j != i) sum += gain_(links_[i].rx, links_[j].tx);
      }
      interference_[i] = sum;
    }
  }

  void after_event() {
    if (++events_since_refresh_ >= kRefreshInterval) {
      events_since_refresh_ = 0;
      rebuild_interference();
    }
    next_death_time_ = std::numeric_limits<double>::infinity();
    next_death_index_ = 0;
    total_rate_ = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < links_.size(); ++i) {
      const double r = c_ * std::log1p(signal_ / (n0_ + interference_[i])) / std::numbers::ln2;
      rate_[i] = r;
      total_rate_ += r;
      const double wait = links_[i].residual_bits / r;
      if (wait < best) {
        best = wait;
        next_death_index_ = i;
      }
    }
    if (!links_.empty()) next_death_time_ = now_ + best;
  }

  Gain gain_;
  double signal_;
  double c_;
  double n0_;
  double now_ = 0.0;
  std::vector<Link> links_;
  std::vector<double> file_;
  std::vector<double> served_;
  std::vector<double> interference_;
  std::vector<double> rate_;
  double total_rate_ = 0.0;
  double next_death_time_ = std::numeric_limits<double>::infinity();
  std::size_t next_death_index_ = 0;
  std::uint64_t events_since_refresh_ = 0;
};

}  // namespace sbd

#endif  // SBD_ENGINE_HPP
