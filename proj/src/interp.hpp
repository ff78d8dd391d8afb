#pragma once

// Internal numerics helpers: monotone cubic (PCHIP) interpolation with
// analytic segment integrals, and adaptive Gauss-Kronrod quadrature.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace pmfront::detail {

// Fritsch-Carlson monotone cubic Hermite interpolant on strictly
// increasing nodes. Evaluation clamps to the node range.
class Pchip {
 public:
  Pchip() = default;

  Pchip(std::vector<double> x, std::vector<double> y)
      : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n)
      throw std::invalid_argument("Pchip: need >= 2 nodes");
    for (std::size_t i = 1; i < n; ++i)
      if (!(x_[i] > x_[i - 1]))
        throw std::invalid_argument("Pchip: abscissas must increase");
    d_.resize(n);
    if (n == 2) {
      d_[0] = d_[1] = secant(0);
      return;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double s0 = secant(i - 1), s1 = secant(i);
      if (s0 * s1 <= 0.0) {
        d_[i] = 0.0;
      } else {
        const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
        const double w0 = 2.0 * h1 + h0, w1 = h1 + 2.0 * h0;
        d_[i] = (w0 + w1) / (w0 / s0 + w1 / s1);
      }
    }
    d_[0] = end_slope(x_[1] - x_[0], x_[2] - x_[1], secant(0), secant(1));
    d_[n - 1] = end_slope(x_[n - 1] - x_[n - 2], x_[n - 2] - x_[n - 3],
                          secant(n - 2), secant(n - 3));
  }

  double operator()(double x) const {
    const auto [i, t, h] = locate(x);
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * d_[i] +
           (-2 * t3 + 3 * t2) * y_[i + 1] + (t3 - t2) * h * d_[i + 1];
  }

  double prime(double x) const {
    const auto [i, t, h] = locate(x);
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * y_[i] + (3 * t2 - 4 * t + 1) * h * d_[i] +
            (-6 * t2 + 6 * t) * y_[i + 1] + (3 * t2 - 2 * t) * h * d_[i + 1]) /
           h;
  }

  // Integral of the interpolant from the first node to x (clamped).
  double integral_from_front(double x) const {
    ensure_cumulative();
    const auto [i, t, h] = locate(x);
    return cum_[i] + partial_segment(i, t, h);
  }

  double integral(double a, double b) const {
    return integral_from_front(b) - integral_from_front(a);
  }

  double x_front() const { return x_.front(); }
  double x_back() const { return x_.back(); }
  const std::vector<double>& xs() const { return x_; }
  const std::vector<double>& ys() const { return y_; }

 private:
  double secant(std::size_t i) const {
    return (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
  }

  // Shape-preserving three-point endpoint slope.
  static double end_slope(double h0, double h1, double s0, double s1) {
    double d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if (d * s0 <= 0.0) return 0.0;
    if (s0 * s1 < 0.0 && std::abs(d) > 3.0 * std::abs(s0)) return 3.0 * s0;
    return d;
  }

  struct Loc {
    std::size_t i;
    double t, h;
  };

  Loc locate(double x) const {
    const std::size_t n = x_.size();
    if (x <= x_.front()) return {0, 0.0, x_[1] - x_[0]};
    if (x >= x_.back())
      return {n - 2, 1.0, x_[n - 1] - x_[n - 2]};
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    return {i, (x - x_[i]) / h, h};
  }

  // Exact integral of the cubic segment i over local fraction [0, t].
  double partial_segment(std::size_t i, double t, double h) const {
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
    const double A = 0.5 * t4 - t3 + t;                 // int of 2t^3-3t^2+1
    const double B = 0.25 * t4 - (2.0 / 3.0) * t3 + 0.5 * t2;
    const double C = -0.5 * t4 + t3;
    const double D = 0.25 * t4 - t3 / 3.0;
    return h * (A * y_[i] + B * h * d_[i] + C * y_[i + 1] + D * h * d_[i + 1]);
  }

  void ensure_cumulative() const {
    if (!cum_.empty()) return;
    cum_.resize(x_.size(), 0.0);
    for (std::size_t i = 0; i + 1 < x_.size(); ++i)
      cum_[i + 1] = cum_[i] + partial_segment(i, 1.0, x_[i + 1] - x_[i]);
  }

  std::vector<double> x_, y_, d_;
  mutable std::vector<double> cum_;
};

// 4-point Lagrange interpolation on the nodes surrounding x. Not shape
// preserving, but O(h^4) accurate regardless of local spacing jumps.
inline double cubic4(const std::vector<double>& xs,
                     const std::vector<double>& ys, double x) {
  const std::size_t n = xs.size();
  if (n < 4) throw std::invalid_argument("cubic4: need >= 4 nodes");
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  std::size_t hi = static_cast<std::size_t>(
      std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
  std::size_t base = hi >= 2 ? hi - 2 : 0;
  base = std::min(base, n - 4);
  double acc = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    double term = ys[base + j];
    for (std::size_t k = 0; k < 4; ++k) {
      if (k == j) continue;
      term *= (x - xs[base + k]) / (xs[base + j] - xs[base + k]);
    }
    acc += term;
  }
  return acc;
}

inline double gk_integrate(const std::function<double(double)>& f, double a,
                           double b, double tol = 1e-9,
                           double* err_out = nullptr) {
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      f, a, b, 15, tol, &err);
  if (err_out) *err_out = err;
  return v;
}

}  // namespace pmfront::detail
