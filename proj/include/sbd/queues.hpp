#ifndef SBD_QUEUES_HPP
#define SBD_QUEUES_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

#include "sbd/engine.hpp"
#include "sbd/error.hpp"
#include "sbd/random.hpp"

namespace sbd {

/// Sojourn times of a single-server processor-sharing queue with Poisson arrivals.
///
/// Uses virtual time: each of the n customers in service attains service at
/// speed / n, so a customer leaves when the attained-service clock reaches its
/// arrival tag plus its size. The first `warmup_customers` are simulated but
/// not reported.
inline std::vector<double> ps_queue_sojourns(double arrival_rate, double speed,
                                             const FileSizeDistribution& sizes,
                                             std::size_t customers, std::size_t warmup_customers,
                                             Rng rng) {
  if (!(arrival_rate > 0.0) || !(speed > 0.0)) {
    throw ParameterError("arrival rate and server speed must be positive");
  }
  if (arrival_rate * sizes.mean() >= speed) {
    throw ConfigError("processor-sharing queue is unstable at this load");
  }
  using Entry = std::pair<double, std::size_t>;  // finish tag, customer index
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> in_service;
  const std::size_t total = customers + warmup_customers;
  std::vector<double> arrival_time(total);
  std::vector<double> sojourn(total, -1.0);
  double now = 0.0;
  double virtual_time = 0.0;
  double next_arrival = rng.exponential(1.0 / arrival_rate);
  std::size_t arrived = 0;
  std::size_t departed = 0;
  while (departed < total) {
    const std::size_t n = in_service.size();
    double next_departure = std::numeric_limits<double>::infinity();
    if (n > 0) {
      next_departure = now + (in_service.top().first - virtual_time) * static_cast<double>(n) / speed;
    }
    if (arrived < total && next_arrival < next_departure) {
      if (n > 0) virtual_time += (next_arrival - now) * speed / static_cast<double>(n);
      now = next_arrival;
      arrival_time[arrived] = now;
      in_service.emplace(virtual_time + sizes.sample(rng), arrived);
      ++arrived;
      next_arrival = now + rng.exponential(1.0 / arrival_rate);
    } else {
      virtual_time = in_service.top().first;
      now = next_departure;
      const std::size_t k = in_service.top().second;
      in_service.pop();
      sojourn[k] = now - arrival_time[k];
      ++departed;
    }
  }
  return {sojourn.begin() + static_cast<std::ptrdiff_t>(warmup_customers), sojourn.end()};
}

/// Non-spatial comparator: arrivals at rate lambda / L, sizes from `sizes` (mean L),
/// server speed `capacity`. With exponential sizes the mean sojourn is
/// L / (capacity - lambda).
inline std::vector<double> ps_comparator(double lambda, double capacity,
                                         const FileSizeDistribution& sizes, std::size_t customers,
                                         std::uint64_t seed) {
  if (!(lambda < capacity)) throw ConfigError("comparator needs lambda below its capacity");
  return ps_queue_sojourns(lambda / sizes.mean(), capacity, sizes, customers, customers / 10,
                           Rng(seed, 0x5051));
}

/// Light-traffic comparator: every link runs alone, so a delay is file / solo_rate.
inline std::vector<double> infinite_server_delays(double solo_rate, const FileSizeDistribution& sizes,
                                                  std::size_t n, std::uint64_t seed) {
  if (!(solo_rate > 0.0)) throw ParameterError("solo rate must be positive");
  Rng rng(seed, 0x3131);
  std::vector<double> out(n);
  for (auto& d : out) d = sizes.sample(rng) / solo_rate;
  return out;
}

}  // namespace sbd

#endif  // SBD_QUEUES_HPP
