#ifndef SBD_STATISTICS_HPP
#define SBD_STATISTICS_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "sbd/error.hpp"

namespace sbd::stats {

/// Two-sided 95% normal quantile.
inline constexpr double kZ95 = 1.959963984540054;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const noexcept { return lo <= v && v <= hi; }
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 3 || y.size() != n) throw StateError("linear fit needs at least three paired points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw StateError("linear fit needs distinct abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - fit.intercept - fit.slope * x[i];
    ssr += e * e;
  }
  fit.slope_se = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
  return fit;
}

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;

  Interval ci95() const noexcept { return {mean - kZ95 * std_error, mean + kZ95 * std_error}; }
};

inline MeanEstimate mean_and_se(std::span<const double> v) {
  MeanEstimate out;
  out.n = v.size();
  if (v.empty()) return out;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  out.mean = m;
  if (v.size() > 1) {
    out.std_error = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return out;
}

struct Correlation {
  double rho = 0.0;
  Interval ci;
  std::size_t n = 0;
};

/// Pearson correlation with a Fisher-z normal-approximation 95% interval.
inline Correlation pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  if (n < 4 || b.size() != n) throw StateError("correlation needs at least four pairs");
  const double ma = mean_and_se(a).mean;
  const double mb = mean_and_se(b).mean;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  Correlation c;
  c.n = n;
  c.rho = (saa > 0.0 && sbb > 0.0) ? sab / std::sqrt(saa * sbb) : 0.0;
  const double z = std::atanh(std::clamp(c.rho, -0.999999999, 0.999999999));
  const double se = 1.0 / std::sqrt(static_cast<double>(n) - 3.0);
  c.ci = {std::tanh(z - kZ95 * se), std::tanh(z + kZ95 * se)};
  return c;
}

/// Asymptotic Kolmogorov p-value with Stephens' small-sample correction.
inline double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lam = (sn + 0.12 + 0.11 / sn) * d;
  if (lam < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = sign * std::exp(-2.0 * j * j * lam * lam);
    sum += term;
    if (std::abs(term) < 1e-14 * std::abs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// One-sample Kolmogorov-Smirnov test against a continuous cdf.
template <class Cdf>
KsResult ks_test(std::vector<double> samples, Cdf&& cdf) {
  if (samples.empty()) throw StateError("KS test on an empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, ks_pvalue(d, samples.size()), samples.size()};
}

/// Empirical P(X > t) for each t of the grid.
inline std::vector<std::pair<double, double>> empirical_ccdf(std::vector<double> samples,
                                                             std::span<const double> grid) {
  if (samples.empty()) throw StateError("CCDF of an empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  std::vector<std::pair<double, double>> out;
  out.reserve(grid.size());
  for (double t : grid) {
    const auto above = samples.end() - std::upper_bound(samples.begin(), samples.end(), t);
    out.emplace_back(t, static_cast<double>(above) / n);
  }
  return out;
}

/// q-quantile by linear interpolation of the order statistics.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw StateError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace sbd::stats

#endif  // SBD_STATISTICS_HPP
