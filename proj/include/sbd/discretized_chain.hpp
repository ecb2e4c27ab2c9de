#ifndef SBD_DISCRETIZED_CHAIN_HPP
#define SBD_DISCRETIZED_CHAIN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <vector>

#include "sbd/engine.hpp"
#include "sbd/error.hpp"
#include "sbd/network_state.hpp"
#include "sbd/random.hpp"
#include "sbd/torus.hpp"

namespace sbd {

namespace detail {

inline std::size_t cells_per_axis(const TorusDomain& d, double epsilon) {
  if (!(epsilon > 0.0)) throw ParameterError("cell side must be positive");
  const double ratio = d.side() / epsilon;
  const double m = std::round(ratio);
  if (m < 1.0 || std::abs(ratio - m) > 1e-9 * ratio) {
    throw ParameterError("cell side must divide the torus side 2Q evenly");
  }
  return static_cast<std::size_t>(m);
}

/// Upper-bounded gain between cells whose centers are dx, dy cells apart (torus-reduced).
/// Each endpoint may move by up to one cell side per axis, and a transmitter sits
/// up to T from its receiver.
inline double cell_gain(const PathLossModel& l, double epsilon, double link_length, std::size_t dx,
                        std::size_t dy) {
  const double gx = std::max(0.0, static_cast<double>(dx) - 2.0) * epsilon;
  const double gy = std::max(0.0, static_cast<double>(dy) - 2.0) * epsilon;
  return l(std::max(0.0, std::hypot(gx, gy) - link_length));
}

}  // namespace detail

/// Square grid of cells of side epsilon on the torus, with cell 0 centered at the origin.
///
/// The dominating gain l_eps depends only on the torus offset between cells, so it
/// is stored as an (m/2 + 1)^2 table rather than an n x n matrix.
class Tessellation {
 public:
  Tessellation(const TorusDomain& domain, const PathLossModel& pathloss, double epsilon,
               double link_length = 0.0)
      : domain_(domain), pathloss_(pathloss), epsilon_(epsilon), link_length_(link_length) {
    if (!pathloss.is_bounded()) throw ConfigError("tessellated chain needs a bounded path loss");
    if (!(link_length >= 0.0) || link_length > domain.half_side()) {
      throw ParameterError("link length must lie in [0, Q]");
    }
    m_ = detail::cells_per_axis(domain, epsilon);
    half_ = m_ / 2;
    kernel_.resize((half_ + 1) * (half_ + 1));
    for (std::size_t dx = 0; dx <= half_; ++dx) {
      for (std::size_t dy = 0; dy <= half_; ++dy) {
        kernel_[dx * (half_ + 1) + dy] = detail::cell_gain(pathloss, epsilon, link_length, dx, dy);
      }
    }
  }

  double epsilon() const noexcept { return epsilon_; }
  std::size_t cells_per_axis() const noexcept { return m_; }
  std::size_t n_cells() const noexcept { return m_ * m_; }
  const TorusDomain& domain() const noexcept { return domain_; }
  const PathLossModel& pathloss() const noexcept { return pathloss_; }
  double link_length() const noexcept { return link_length_; }

  Point center(std::size_t i) const {
    check(i);
    const auto ix = static_cast<double>(i % m_);
    const auto iy = static_cast<double>(i / m_);
    return domain_.wrap({ix * epsilon_, iy * epsilon_});
  }

  std::size_t cell_of(const Point& p) const noexcept {
    const auto axis = [&](double v) {
      auto k = static_cast<long long>(std::llround(v / epsilon_)) % static_cast<long long>(m_);
      if (k < 0) k += static_cast<long long>(m_);
      return static_cast<std::size_t>(k);
    };
    return axis(p.x) + m_ * axis(p.y);
  }

  double l_eps(std::size_t i, std::size_t j) const noexcept {
    const auto off = [&](std::size_t a, std::size_t b) {
      const std::size_t d = a > b ? a - b : b - a;
      return std::min(d, m_ - d);
    };
    return kernel_[off(i % m_, j % m_) * (half_ + 1) + off(i / m_, j / m_)];
  }

  /// Sum over j of l_eps(i, j), accumulated in ascending order of the terms.
  double row_sum(std::size_t i) const {
    check(i);
    std::vector<double> row(n_cells());
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = l_eps(i, j);
    std::sort(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += v;
    return s;
  }

 private:
  void check(std::size_t i) const {
    if (i >= n_cells()) throw ParameterError("cell index out of range");
  }

  TorusDomain domain_;
  PathLossModel pathloss_;
  double epsilon_;
  double link_length_;
  std::size_t m_ = 0;
  std::size_t half_ = 0;
  std::vector<double> kernel_;
};

/// epsilon^2 times the row sum of l_eps, computed from offset multiplicities
/// without building the gain table. Converges to a as epsilon shrinks.
inline double tessellated_integral(const TorusDomain& domain, const PathLossModel& pathloss,
                                   double epsilon, double link_length = 0.0) {
  if (!pathloss.is_bounded()) throw ConfigError("tessellated chain needs a bounded path loss");
  const std::size_t m = detail::cells_per_axis(domain, epsilon);
  const std::size_t half = m / 2;
  // Offset d occurs twice per axis except d = 0 and, for even m, d = m/2.
  const auto mult = [&](std::size_t d) {
    if (d == 0) return 1.0;
    if (m % 2 == 0 && d == half) return 1.0;
    return 2.0;
  };
  double total = 0.0;
  for (std::size_t dx = 0; dx <= half; ++dx) {
    double col = 0.0;
    for (std::size_t dy = 0; dy <= half; ++dy) {
      col += mult(dy) * detail::cell_gain(pathloss, epsilon, link_length, dx, dy);
    }
    total += mult(dx) * col;
  }
  return total * epsilon * epsilon;
}

/// Arrival-rate bound under which the tessellated chain is ergodic:
/// C / (L ln 2 epsilon^2 sum_k l_eps(k, 0)).
inline double chain_stability_bound(const Tessellation& t, const ChannelParams& p) {
  return p.C / (p.L * std::numbers::ln2 * t.epsilon() * t.epsilon() * t.row_sum(0));
}

/// Drain time of the fluid model from sup-norm 1: (C / (L ln 2 S) - lambda eps^2)^-1.
inline double fluid_drain_time(const Tessellation& t, double lambda, const ChannelParams& p) {
  const double drift = p.C / (p.L * std::numbers::ln2 * t.row_sum(0)) -
                       lambda * t.epsilon() * t.epsilon();
  if (!(drift > 0.0)) throw ConfigError("arrival rate is above the chain's stability bound");
  return 1.0 / drift;
}

using CellCounts = std::vector<std::uint32_t>;

struct ChainTrajectory {
  std::vector<double> times;
  std::vector<CellCounts> states;
  std::uint64_t events = 0;
  double end_time = 0.0;
  /// Time at which the chain first became empty, if it did.
  std::optional<double> emptied_at;
};

struct CellChainOptions {
  /// Keep every k-th state; 0 keeps only the initial and final states.
  std::uint64_t record_every = 1;
  bool stop_when_empty = false;
  std::uint64_t max_events = std::numeric_limits<std::uint64_t>::max();
};

/// Exact jump simulation of the tessellated upper-bound chain.
///
/// Births arrive in every cell at rate lambda eps^2; cell i loses a link at rate
/// X_i (C/L) log2(1 + l(T) / (N0 + sum_j (X_j - 1{j=i}) l_eps(i, j))).
inline ChainTrajectory simulate_cell_chain(const Tessellation& t, double lambda,
                                           const ChannelParams& p, CellCounts x0, double horizon,
                                           std::uint64_t seed, const CellChainOptions& opt = {}) {
  p.validate();
  const std::size_t n = t.n_cells();
  if (x0.empty()) x0.assign(n, 0);
  if (x0.size() != n) throw ParameterError("initial counts must have one entry per cell");
  if (!(lambda >= 0.0)) throw ParameterError("arrival intensity must be non-negative");
  if (!(horizon > 0.0)) throw ParameterError("horizon must be positive");

  Rng rng(seed, 0);
  const double signal = p.pathloss(t.link_length());
  const double birth_per_cell = lambda * t.epsilon() * t.epsilon();
  CellCounts x = std::move(x0);
  std::vector<double> interf(n, 0.0);  // sum_j X_j l_eps(i, j)
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) interf[i] += x[j] * t.l_eps(i, j);
  }
  std::vector<double> death(n, 0.0);
  const auto refresh = [&](std::size_t i) {
    if (x[i] == 0) {
      death[i] = 0.0;
      return;
    }
    const double others = std::max(0.0, interf[i] - t.l_eps(i, i));
    death[i] = x[i] * p.C / p.L * std::log1p(signal / (p.N0 + others)) / std::numbers::ln2;
  };
  for (std::size_t i = 0; i < n; ++i) refresh(i);

  ChainTrajectory out;
  double now = 0.0;
  std::uint64_t total_count = 0;
  for (auto c : x) total_count += c;
  out.times.push_back(0.0);
  out.states.push_back(x);
  if (total_count == 0) out.emptied_at = 0.0;

  while (out.events < opt.max_events) {
    double death_total = 0.0;
    for (double d : death) death_total += d;
    const double total = birth_per_cell * static_cast<double>(n) + death_total;
    if (!(total > 0.0)) break;
    const double dt = rng.exponential(1.0 / total);
    if (now + dt > horizon) break;
    now += dt;
    double pick = rng.uniform() * total;
    std::size_t cell = 0;
    int delta = 0;
    if (pick < death_total) {
      delta = -1;
      cell = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (pick < death[i]) {
          cell = i;
          break;
        }
        pick -= death[i];
      }
      if (x[cell] == 0) continue;  // rounding at the last bucket
    } else {
      delta = 1;
      cell = std::min(n - 1, static_cast<std::size_t>((pick - death_total) / birth_per_cell));
    }
    x[cell] = static_cast<std::uint32_t>(static_cast<long long>(x[cell]) + delta);
    total_count = static_cast<std::uint64_t>(static_cast<long long>(total_count) + delta);
    for (std::size_t i = 0; i < n; ++i) {
      interf[i] += delta * t.l_eps(i, cell);
      refresh(i);
    }
    ++out.events;
    if (opt.record_every > 0 && out.events % opt.record_every == 0) {
      out.times.push_back(now);
      out.states.push_back(x);
    }
    if (total_count == 0 && !out.emptied_at) {
      out.emptied_at = now;
      if (opt.stop_when_empty) break;
    }
  }
  out.end_time = opt.stop_when_empty && out.emptied_at ? *out.emptied_at : horizon;
  if (out.times.back() != now || out.states.back() != x) {
    out.times.push_back(now);
    out.states.push_back(x);
  }
  return out;
}

/// Gain l_eps between the cells of a receiver and a transmitter.
struct CellGain {
  std::shared_ptr<const Tessellation> tess;

  double operator()(const Point& rx, const Point& tx) const noexcept {
    return tess->l_eps(tess->cell_of(rx), tess->cell_of(tx));
  }
};

struct DominanceReport {
  std::uint64_t events = 0;
  std::uint64_t checks = 0;
  std::uint64_t violations = 0;
  std::size_t max_true_links = 0;
  std::size_t max_chain_links = 0;
};

/// Runs the true dynamics and the tessellated dynamics on one shared arrival
/// stream (same points and file sizes) and checks, after every event, that each
/// cell holds at least as many links in the tessellated system as in the true one.
inline DominanceReport dominance_coupling(const Tessellation& t, double lambda,
                                          const ChannelParams& p, std::uint64_t events,
                                          std::uint64_t seed) {
  p.validate();
  const auto tess = std::make_shared<const Tessellation>(t);
  const double signal = p.pathloss(t.link_length());
  LinkEngine<DistanceGain> real(DistanceGain{p.pathloss, t.domain()}, signal, p);
  LinkEngine<CellGain> upper(CellGain{tess}, signal, p);
  ArrivalStream arrivals(lambda, t.domain(), t.link_length(), FileSizeDistribution::exponential(p.L),
                         Rng(seed, 0));
  DominanceReport rep;
  std::uint64_t next_id = 0;
  const std::size_t n = t.n_cells();
  const auto counts = [&](const auto& engine) {
    std::vector<std::uint32_t> c(n, 0);
    for (const auto& l : engine.links()) ++c[t.cell_of(l.rx)];
    return c;
  };
  while (rep.events < events) {
    const double tb = arrivals.peek().time;
    const double tr = real.next_death_time();
    const double tu = upper.next_death_time();
    const double next = std::min({tb, tr, tu});
    if (!std::isfinite(next)) break;
    real.advance_to(next);
    upper.advance_to(next);
    if (tr == next) {
      real.kill_next();
    } else if (tu == next) {
      upper.kill_next();
    } else {
      const Arrival a = arrivals.pop();
      const Link link{next_id++, a.rx, a.tx, a.file_bits, a.time};
      real.insert(link, a.file_bits);
      upper.insert(link, a.file_bits);
    }
    ++rep.events;
    // Simultaneous deaths in the two systems are processed one after the other;
    // only settled states are compared.
    const double following = std::min({arrivals.peek().time, real.next_death_time(),
                                       upper.next_death_time()});
    if (following - next <= 1e-9 * std::max(1.0, next)) continue;
    ++rep.checks;
    const auto cr = counts(real);
    const auto cu = counts(upper);
    for (std::size_t i = 0; i < n; ++i) {
      if (cr[i] > cu[i]) {
        ++rep.violations;
        break;
      }
    }
    rep.max_true_links = std::max(rep.max_true_links, real.size());
    rep.max_chain_links = std::max(rep.max_chain_links, upper.size());
  }
  return rep;
}

struct FluidTrajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  /// First time the sup norm fell below the absorption tolerance.
  std::optional<double> hit_time;
  std::uint64_t rejected_steps = 0;
};

struct FluidOptions {
  double step_tol = 1e-9;
  /// States with sup norm below this are treated as the absorbing zero state.
  double absorb_tol = 1e-10;
  double initial_step = 1e-3;
  double min_step = 1e-14;
};

/// Vector field of the fluid model: lambda eps^2 - C x_i / (L ln 2 sum_k x_k l_eps(i, k)).
inline std::vector<double> fluid_field(const Tessellation& t, double lambda, const ChannelParams& p,
                                       const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> dx(n, 0.0);
  double sup = 0.0;
  for (double v : x) sup = std::max(sup, std::abs(v));
  if (sup == 0.0) return dx;
  const double birth = lambda * t.epsilon() * t.epsilon();
  const double k = p.C / (p.L * std::numbers::ln2);
  for (std::size_t i = 0; i < n; ++i) {
    double load = 0.0;
    for (std::size_t j = 0; j < n; ++j) load += x[j] * t.l_eps(i, j);
    dx[i] = birth - (x[i] > 0.0 && load > 0.0 ? k * x[i] / load : 0.0);
  }
  return dx;
}

/// Adaptive Dormand-Prince 5(4) integration of the fluid model up to t_end, or
/// until the state is absorbed at zero. Steps that would leave the non-negative
/// orthant are rejected and retried with a smaller step.
inline FluidTrajectory fluid_ode(const Tessellation& t, double lambda, const ChannelParams& p,
                                 std::vector<double> x0, double t_end, const FluidOptions& opt = {}) {
  p.validate();
  if (x0.size() != t.n_cells()) throw ParameterError("initial state must have one entry per cell");
  for (double v : x0) {
    if (!(v >= 0.0)) throw ParameterError("fluid initial state must be non-negative");
  }
  if (!(t_end > 0.0)) throw ParameterError("end time must be positive");
  const auto sup = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double e : v) s = std::max(s, std::abs(e));
    return s;
  };
  FluidTrajectory out;
  double now = 0.0;
  std::vector<double> x = std::move(x0);
  out.times.push_back(now);
  out.states.push_back(x);
  if (sup(x) <= opt.absorb_tol) {
    out.hit_time = 0.0;
    return out;
  }

  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  (void)c2;
  (void)c3;
  (void)c4;
  (void)c5;

  const std::size_t n = x.size();
  const auto axpy = [n](const std::vector<double>& base, double h,
                        std::initializer_list<std::pair<double, const std::vector<double>*>> terms) {
    std::vector<double> r = base;
    for (const auto& [c, v] : terms) {
      for (std::size_t i = 0; i < n; ++i) r[i] += h * c * (*v)[i];
    }
    return r;
  };

  double h = opt.initial_step;
  auto k1 = fluid_field(t, lambda, p, x);
  while (now < t_end) {
    h = std::min(h, t_end - now);
    if (h < opt.min_step) throw NumericalError("fluid integration step underflow");
    const auto k2 = fluid_field(t, lambda, p, axpy(x, h, {{a21, &k1}}));
    const auto k3 = fluid_field(t, lambda, p, axpy(x, h, {{a31, &k1}, {a32, &k2}}));
    const auto k4 = fluid_field(t, lambda, p, axpy(x, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
    const auto k5 = fluid_field(t, lambda, p,
                               axpy(x, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
    const auto k6 = fluid_field(
        t, lambda, p, axpy(x, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
    auto y = axpy(x, h, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
    const auto k7 = fluid_field(t, lambda, p, y);
    double err = 0.0;
    bool negative = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double scale = opt.step_tol * (1.0 + std::max(std::abs(x[i]), std::abs(y[i])));
      err = std::max(err, std::abs(e) / scale);
      if (y[i] < -opt.absorb_tol) negative = true;
    }
    if (err > 1.0 || negative) {
      ++out.rejected_steps;
      // Absorbed when the largest coordinate, extrapolated linearly, reaches zero within the step.
      if (negative) {
        std::size_t top = 0;
        for (std::size_t i = 1; i < n; ++i) {
          if (x[i] > x[top]) top = i;
        }
        if (k1[top] < 0.0 && x[top] / -k1[top] <= h) {
          out.hit_time = now + x[top] / -k1[top];
          now = *out.hit_time;
          std::fill(x.begin(), x.end(), 0.0);
          out.times.push_back(now);
          out.states.push_back(x);
          return out;
        }
      }
      h *= negative ? 0.5 : std::max(0.2, 0.9 * std::pow(err, -0.2));
      continue;
    }
    for (auto& v : y) v = std::max(v, 0.0);
    now += h;
    x = std::move(y);
    k1 = k7;
    out.times.push_back(now);
    out.states.push_back(x);
    if (sup(x) <= opt.absorb_tol) {
      out.hit_time = now;
      std::fill(x.begin(), x.end(), 0.0);
      return out;
    }
    h *= std::min(5.0, 0.9 * std::pow(std::max(err, 1e-10), -0.2));
  }
  return out;
}

}  // namespace sbd

#endif  // SBD_DISCRETIZED_CHAIN_HPP
