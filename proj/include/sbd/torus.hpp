#ifndef SBD_TORUS_HPP
#define SBD_TORUS_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "sbd/error.hpp"
#include "sbd/quadrature.hpp"

namespace sbd {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// The square [-Q, Q]^2 with opposite edges identified.
class TorusDomain {
 public:
  explicit TorusDomain(double half_side) : half_side_(half_side) {
    if (!(half_side > 0.0) || !std::isfinite(half_side)) {
      throw ParameterError("torus half side must be positive and finite");
    }
  }

  double half_side() const noexcept { return half_side_; }
  double side() const noexcept { return 2.0 * half_side_; }
  double area() const noexcept { return 4.0 * half_side_ * half_side_; }
  double max_distance() const noexcept { return half_side_ * std::numbers::sqrt2; }

  bool contains(const Point& p) const noexcept {
    return std::abs(p.x) <= half_side_ && std::abs(p.y) <= half_side_;
  }

  /// Maps any planar point onto its representative in [-Q, Q)^2.
  Point wrap(const Point& p) const noexcept { return {wrap_coord(p.x), wrap_coord(p.y)}; }

  /// Shortest per-axis separation, each component in [0, Q].
  double axis_separation(double a, double b) const noexcept {
    const double d = std::abs(a - b);
    return std::min(d, side() - d);
  }

  /// Distance without the domain check; callers guarantee wrapped coordinates.
  double distance_unchecked(const Point& a, const Point& b) const noexcept {
    return std::hypot(axis_separation(a.x, b.x), axis_separation(a.y, b.y));
  }

  friend bool operator==(const TorusDomain&, const TorusDomain&) = default;

 private:
  double wrap_coord(double v) const noexcept {
    const double s = side();
    double w = std::fmod(v + half_side_, s);
    if (w < 0.0) w += s;
    w -= half_side_;
    // fmod can round up to exactly Q.
    if (w >= half_side_) w -= s;
    return w;
  }

  double half_side_;
};

/// Geodesic distance on the torus: the minimum over the nine lattice translates.
inline double torus_distance(const Point& x, const Point& y, const TorusDomain& d) {
  if (!d.contains(x) || !d.contains(y)) {
    std::ostringstream msg;
    msg << "point (" << x.x << ", " << x.y << ") or (" << y.x << ", " << y.y
        << ") lies outside [-" << d.half_side() << ", " << d.half_side() << "]^2";
    throw DomainError(msg.str());
  }
  return d.distance_unchecked(x, y);
}

/// l(r) = r^-alpha. Infinite at the origin; only usable for divergence checks.
struct PowerLaw {
  double alpha = 4.0;
};

/// l(r) = (r + k)^-alpha with k >= 1, so that l(0) <= 1.
struct Bounded {
  double k = 1.0;
  double alpha = 4.0;
};

/// Piecewise linear through (r_i, v_i); constant outside the sampled range.
struct Tabulated {
  std::vector<double> radii;
  std::vector<double> values;
};

/// Distance dependent power attenuation l(r) for unit transmit power.
class PathLossModel {
 public:
  using Variant = std::variant<PowerLaw, Bounded, Tabulated>;

  static PathLossModel power_law(double alpha) { return PathLossModel(PowerLaw{alpha}); }
  static PathLossModel bounded(double k, double alpha) { return PathLossModel(Bounded{k, alpha}); }
  static PathLossModel tabulated(std::vector<double> radii, std::vector<double> values) {
    return PathLossModel(Tabulated{std::move(radii), std::move(values)});
  }
  static PathLossModel constant(double value) { return tabulated({0.0}, {value}); }

  explicit PathLossModel(Variant v) : model_(std::move(v)) {
    validate();
    if (const auto* b = std::get_if<Bounded>(&model_)) {
      const double rounded = std::round(b->alpha);
      if (rounded == b->alpha && rounded >= 1.0 && rounded <= 8.0) {
        integer_alpha_ = static_cast<int>(rounded);
      }
    }
  }

  const Variant& variant() const noexcept { return model_; }

  /// False only for the power law, which blows up at r = 0.
  bool is_bounded() const noexcept { return !std::holds_alternative<PowerLaw>(model_); }

  double operator()(double r) const noexcept { return evaluate(r); }

  double evaluate(double r) const noexcept {
    switch (model_.index()) {
      case 0:
        return std::pow(r, -std::get<PowerLaw>(model_).alpha);
      case 1: {
        const auto& b = std::get<Bounded>(model_);
        const double base = r + b.k;
        if (integer_alpha_ > 0) {
          double p = base;
          for (int i = 1; i < integer_alpha_; ++i) p *= base;
          return 1.0 / p;
        }
        return std::pow(base, -b.alpha);
      }
      default:
        return evaluate_table(std::get<Tabulated>(model_), r);
    }
  }

  std::string describe() const {
    std::ostringstream out;
    std::visit(
        [&out](const auto& m) {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, PowerLaw>) {
            out << "power_law(alpha=" << m.alpha << ")";
          } else if constexpr (std::is_same_v<M, Bounded>) {
            out << "bounded(k=" << m.k << ", alpha=" << m.alpha << ")";
          } else {
            out << "tabulated(" << m.radii.size() << " samples)";
          }
        },
        model_);
    return out.str();
  }

 private:
  static double evaluate_table(const Tabulated& t, double r) noexcept {
    if (r <= t.radii.front()) return t.values.front();
    if (r >= t.radii.back()) return t.values.back();
    const auto it = std::upper_bound(t.radii.begin(), t.radii.end(), r);
    const auto hi = static_cast<std::size_t>(it - t.radii.begin());
    const std::size_t lo = hi - 1;
    const double w = (r - t.radii[lo]) / (t.radii[hi] - t.radii[lo]);
    return t.values[lo] + w * (t.values[hi] - t.values[lo]);
  }

  void validate() const {
    if (const auto* p = std::get_if<PowerLaw>(&model_)) {
      if (!(p->alpha > 0.0)) throw InvariantError("power law exponent must be positive");
    } else if (const auto* b = std::get_if<Bounded>(&model_)) {
      if (!(b->alpha > 0.0)) throw InvariantError("bounded path loss exponent must be positive");
      if (!(b->k >= 1.0)) throw InvariantError("bounded path loss needs k >= 1 so that l(0) <= 1");
    } else {
      const auto& t = std::get<Tabulated>(model_);
      if (t.radii.empty() || t.radii.size() != t.values.size()) {
        throw InvariantError("tabulated path loss needs equally many radii and values");
      }
      if (t.radii.front() < 0.0) throw InvariantError("tabulated radii must be non-negative");
      for (std::size_t i = 1; i < t.radii.size(); ++i) {
        if (!(t.radii[i] > t.radii[i - 1])) {
          throw InvariantError("tabulated radii must be strictly increasing");
        }
        if (t.values[i] > t.values[i - 1]) {
          throw InvariantError("tabulated path loss is not non-increasing");
        }
      }
      if (!(t.values.front() <= 1.0) || !std::isfinite(t.values.front())) {
        throw InvariantError("tabulated path loss must satisfy l(0) <= 1");
      }
      if (t.values.back() < 0.0) throw InvariantError("tabulated path loss must be non-negative");
    }
  }

  Variant model_;
  int integer_alpha_ = 0;
};

/// Integral over the part of the torus square outside the disk of radius Q.
template <class F>
double torus_corner_integral(F&& f, const TorusDomain& d, double rel_tol) {
  const double q = d.half_side();
  const auto shell = [&f](double r) { return r * f(r); };
  const auto wedge = [&](double theta) {
    const double outer = q / std::cos(theta);
    const double width = outer - q;
    if (width <= 0.0) return 0.0;
    if (width < 1e-3 * q) return quadrature::gauss_legendre(shell, q, outer);
    return quadrature::integrate_value(shell, q, outer, rel_tol * 0.1,
                                       1e-15 * width * std::abs(shell(q)));
  };
  return 8.0 * quadrature::integrate_value(wedge, 0.0, std::numbers::pi / 4.0, rel_tol);
}

/// Integral of an isotropic function f(|x|) over the torus.
///
/// The disk r < Q is integrated in radial shells; the four corners outside it
/// are folded onto one octant and integrated in polar coordinates.
template <class F>
double torus_radial_integral(F&& f, const TorusDomain& d, double rel_tol) {
  const double q = d.half_side();
  const auto shell = [&f](double r) { return r * f(r); };
  const double disk =
      2.0 * std::numbers::pi * quadrature::integrate_value(shell, 0.0, q, rel_tol);
  return disk + torus_corner_integral(f, d, rel_tol);
}

/// The constant a = integral of l(|x|) over the torus, or a divergence verdict.
class PathLossIntegral {
 public:
  static PathLossIntegral finite(double value) { return PathLossIntegral(value); }
  static PathLossIntegral divergent() { return PathLossIntegral(std::nullopt); }

  bool is_divergent() const noexcept { return !value_.has_value(); }
  bool is_finite() const noexcept { return value_.has_value(); }

  double value() const {
    if (!value_) throw ConfigError("path loss integral diverges at the origin");
    return *value_;
  }

 private:
  explicit PathLossIntegral(std::optional<double> v) : value_(v) {}
  std::optional<double> value_;
};

/// Computes a for the given torus. Divergence is decided from the model family
/// (power law with alpha >= 2), never from quadrature output.
inline PathLossIntegral pathloss_integral_a(const PathLossModel& m, const TorusDomain& d,
                                           double rel_tol) {
  if (!(rel_tol > 0.0)) throw ParameterError("quadrature tolerance must be positive");
  if (const auto* p = std::get_if<PowerLaw>(&m.variant())) {
    if (p->alpha >= 2.0) return PathLossIntegral::divergent();
    const double q = d.half_side();
    const double disk = 2.0 * std::numbers::pi * std::pow(q, 2.0 - p->alpha) / (2.0 - p->alpha);
    return PathLossIntegral::finite(disk + torus_corner_integral(m, d, rel_tol));
  }
  return PathLossIntegral::finite(torus_radial_integral(m, d, rel_tol));
}

}  // namespace sbd

#endif  // SBD_TORUS_HPP
