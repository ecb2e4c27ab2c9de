#ifndef SBD_HEURISTICS_HPP
#define SBD_HEURISTICS_HPP

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "sbd/error.hpp"
#include "sbd/network_state.hpp"
#include "sbd/quadrature.hpp"
#include "sbd/torus.hpp"

namespace sbd {

struct CriticalLambda {
  double lambda_c = 0.0;
  /// Set when the path-loss integral diverges: no arrival rate is stable.
  bool always_unstable = false;
};

/// C l(T) / (ln 2 L a).
inline CriticalLambda critical_lambda(const ChannelParams& p, double link_length,
                                      const PathLossIntegral& a) {
  p.validate();
  if (a.is_divergent()) return {0.0, true};
  if (!(a.value() > 0.0)) throw ParameterError("path loss integral must be positive");
  return {p.C * p.pathloss(link_length) / (std::numbers::ln2 * p.L * a.value()), false};
}

/// Multi-antenna threshold C Xr / (L a ln 2). Carries no l(T) factor.
inline CriticalLambda mimo_critical_lambda(const ChannelParams& p, const PathLossIntegral& a,
                                           unsigned xr) {
  p.validate();
  if (xr < 1) throw ParameterError("receive antenna count must be >= 1");
  if (a.is_divergent()) return {0.0, true};
  if (!(a.value() > 0.0)) throw ParameterError("path loss integral must be positive");
  return {static_cast<double>(xr) * (p.C / (p.L * a.value() * std::numbers::ln2)), false};
}

/// Mean number of links per unit area if every link ran at its solo rate.
inline double light_traffic_beta(double lambda, const ChannelParams& p, double link_length) {
  return lambda * p.L / solo_rate(p, link_length);
}

/// E[ln(1 + X / (Y + noise))] for deterministic X = signal and Y with the given
/// Laplace transform, as a single integral over z in (0, inf).
inline double expected_log_ratio(double signal, double noise_const,
                                const std::function<double(double)>& interference_laplace,
                                double tol) {
  if (!(tol > 0.0)) throw ParameterError("tolerance must be positive");
  if (!(signal >= 0.0) || !(noise_const >= 0.0)) {
    throw ParameterError("signal and noise must be non-negative");
  }
  if (signal == 0.0) return 0.0;
  const auto integrand = [&](double z) {
    if (z == 0.0) return signal * interference_laplace(0.0);
    return std::exp(-noise_const * z) * (-std::expm1(-z * signal)) / z * interference_laplace(z);
  };
  return quadrature::integrate_value(integrand, 0.0, std::numeric_limits<double>::infinity(), tol);
}

enum class SolverStatus { kConverged, kDiverged, kNoSolution };

inline std::string to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::kConverged: return "Converged";
    case SolverStatus::kDiverged: return "Diverged";
    case SolverStatus::kNoSolution: return "NoSolution";
  }
  return "?";
}

struct HeuristicSolution {
  double beta = 0.0;
  /// Relative fixed-point defect.
  double residual = 0.0;
  SolverStatus status = SolverStatus::kNoSolution;
  /// Sign changes seen on the scan grid (Poisson heuristic only).
  int crossings = 0;
  /// Mean interference fixed point (second-order heuristic only).
  double I_s = 0.0;
};

/// Poisson-heuristic solver for one channel, link length and torus.
///
/// The spatial factor G(z) = integral over the torus of (1 - exp(-z l)) is
/// tabulated once on fixed Gauss-Legendre nodes in u = ln z, so that every
/// evaluation of the right-hand side for a new beta is a weighted sum.
class PoissonHeuristic {
 public:
  PoissonHeuristic(const ChannelParams& p, double link_length, const TorusDomain& domain,
                   double tol = 1e-8)
      : p_(p), link_length_(link_length), domain_(domain), tol_(tol) {
    p_.validate();
    if (!(tol > 0.0)) throw ParameterError("tolerance must be positive");
    if (!p_.pathloss.is_bounded()) {
      lambda_c_ = 0.0;
      return;
    }
    signal_ = p_.pathloss(link_length_);
    lambda_c_ = critical_lambda(p_, link_length_, pathloss_integral_a(p_.pathloss, domain_, tol_))
                    .lambda_c;
    build_nodes();
  }

  double lambda_c() const noexcept { return lambda_c_; }

  /// (C / ln 2) beta E[ln(1 + l(T)/(N0 + I))] with I a Poisson shot noise of intensity beta.
  double rhs(double beta) const {
    double sum = z_min_ * signal_;
    for (std::size_t k = 0; k < z_.size(); ++k) {
      sum += w_[k] * std::exp(-beta * g_[k]) * h_[k];
    }
    return p_.C / std::numbers::ln2 * beta * sum;
  }

  HeuristicSolution solve(double lambda) const {
    if (!(lambda > 0.0)) throw ParameterError("arrival rate must be positive");
    HeuristicSolution out;
    if (lambda >= lambda_c_) {
      out.status = SolverStatus::kDiverged;
      out.beta = std::numeric_limits<double>::infinity();
      return out;
    }
    const double target = lambda * p_.L;
    const auto h = [&](double beta) { return rhs(beta) - target; };
    const double beta_l = light_traffic_beta(lambda, p_, link_length_);

    double upper = 1e3 * beta_l;
    while (h(upper) <= 0.0) {
      upper *= 4.0;
      if (upper > 1e12 * beta_l) return out;
    }
    constexpr double kRatio = 1.02;
    const double lower = 1e-3 * beta_l;
    double hi = upper;
    double h_hi = h(hi);
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    for (double b = hi / kRatio; b >= lower; b /= kRatio) {
      const double hb = h(b);
      if ((hb > 0.0) != (h_hi > 0.0)) {
        ++out.crossings;
        if (out.crossings == 1) {
          bracket_lo = b;
          bracket_hi = hi;
        }
      }
      hi = b;
      h_hi = hb;
    }
    if (out.crossings == 0) return out;
    for (int it = 0; it < 200 && bracket_hi - bracket_lo > 1e-13 * bracket_hi; ++it) {
      const double mid = 0.5 * (bracket_lo + bracket_hi);
      if (h(mid) > 0.0) {
        bracket_hi = mid;
      } else {
        bracket_lo = mid;
      }
    }
    out.beta = 0.5 * (bracket_lo + bracket_hi);
    out.residual = h(out.beta) / target;
    out.status = SolverStatus::kConverged;
    return out;
  }

 private:
  void build_nodes() {
    using Rule = boost::math::quadrature::gauss<double, 20>;
    z_min_ = 1e-14 / std::max(1.0, signal_);
    const double u_lo = std::log(z_min_);
    const double u_hi = std::log(60.0 / p_.N0);
    const auto& xs = Rule::abscissa();
    const auto& ws = Rule::weights();
    for (double u0 = u_lo; u0 < u_hi; u0 += 0.5) {
      const double u1 = std::min(u0 + 0.5, u_hi);
      const double half = 0.5 * (u1 - u0);
      const double mid = 0.5 * (u1 + u0);
      for (std::size_t i = 0; i < xs.size(); ++i) {
        add_node(mid + half * xs[i], half * ws[i]);
        if (xs[i] != 0.0) add_node(mid - half * xs[i], half * ws[i]);
      }
    }
  }

  // In u = ln z the integrand e^{-N0 z} (1 - e^{-z l(T)}) e^{-beta G(z)} dz / z loses the 1/z.
  void add_node(double u, double weight) {
    const double z = std::exp(u);
    z_.push_back(z);
    w_.push_back(weight);
    h_.push_back(std::exp(-p_.N0 * z) * (-std::expm1(-z * signal_)));
    const auto& l = p_.pathloss;
    g_.push_back(torus_radial_integral([&](double r) { return -std::expm1(-z * l(r)); }, domain_,
                                       tol_ * 0.1));
  }

  ChannelParams p_;
  double link_length_;
  TorusDomain domain_;
  double tol_;
  double signal_ = 0.0;
  double lambda_c_ = 0.0;
  double z_min_ = 0.0;
  std::vector<double> z_, w_, h_, g_;
};

inline HeuristicSolution poisson_heuristic_beta(double lambda, const ChannelParams& p,
                                                double link_length, const TorusDomain& domain,
                                                double tol = 1e-8) {
  return PoissonHeuristic(p, link_length, domain, tol).solve(lambda);
}

/// Right-hand side of the mean-interference fixed point
/// lambda L * integral of l(|x|) / R(N0 + I + l(|x|)) over the torus.
inline double second_order_rhs(double I, double lambda, const ChannelParams& p,
                               double link_length, const TorusDomain& domain, double tol) {
  const double signal = p.pathloss(link_length);
  const auto& l = p.pathloss;
  const auto f = [&](double r) {
    const double lr = l(r);
    return lr / rate_from_interference(signal, I + lr, p);
  };
  return lambda * p.L * torus_radial_integral(f, domain, tol);
}

inline HeuristicSolution second_order_beta(double lambda, const ChannelParams& p,
                                           double link_length, const TorusDomain& domain,
                                           double tol = 1e-8) {
  p.validate();
  if (!(lambda > 0.0)) throw ParameterError("arrival rate must be positive");
  if (!p.pathloss.is_bounded()) {
    throw ConfigError("second-order heuristic needs a bounded path loss");
  }
  const auto g = [&](double I) {
    return second_order_rhs(I, lambda, p, link_length, domain, tol * 0.1) - I;
  };
  HeuristicSolution out;
  const double g0 = g(0.0);
  double prev = 0.0;
  double found = -1.0;
  for (double I = std::max(1e-9, 1e-6 * g0); I < 1e9; I *= 1.25) {
    if (g(I) <= 0.0) {
      found = I;
      break;
    }
    prev = I;
  }
  if (found < 0.0) return out;
  double lo = prev;
  double hi = found;
  for (int it = 0; it < 200 && hi - lo > 1e-10 * std::max(hi, 1e-300); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.I_s = 0.5 * (lo + hi);
  out.residual = g(out.I_s) / std::max(out.I_s, 1e-300);
  out.beta = lambda * p.L / rate_from_interference(p.pathloss(link_length), out.I_s, p);
  out.status = SolverStatus::kConverged;
  return out;
}

/// Cavity approximation of the pair density at separation |x - y|.
inline double second_moment_approx(const Point& x, const Point& y, const TorusDomain& domain,
                                   double beta, double lambda, double I_s, const ChannelParams& p,
                                   double link_length) {
  const double d = torus_distance(x, y, domain);
  return beta * lambda * p.L /
         rate_from_interference(p.pathloss(link_length), I_s + p.pathloss(d), p);
}

}  // namespace sbd

#endif  // SBD_HEURISTICS_HPP
