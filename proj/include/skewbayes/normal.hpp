// Standard normal density, distribution and quantile primitives.
#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>

namespace skewbayes {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))
inline constexpr double kSqrt2OverPi = 0.79788456080286535588;  // sqrt(2/pi)

inline double norm_logpdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

inline double norm_pdf(double x) { return std::exp(norm_logpdf(x)); }

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Upper tail 1 - Phi(x), accurate for large positive x.
inline double norm_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// log Phi(x). Below -30 erfc is close to underflow, so the Mills-ratio
/// asymptotic series is used instead; above 5 log1p keeps the tiny
/// complement.
inline double norm_logcdf(double x) {
  if (std::isnan(x)) return x;
  if (x > 5.0) return std::log1p(-norm_sf(x));
  if (x >= -30.0) return std::log(norm_cdf(x));
  if (x == -std::numeric_limits<double>::infinity()) return x;
  const double r = 1.0 / (x * x);
  // 1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8 - 945/x^10
  const double series =
      1.0 + r * (-1.0 + r * (3.0 + r * (-15.0 + r * (105.0 + r * -945.0))));
  return -0.5 * x * x - std::log(-x) - kLogSqrt2Pi + std::log(series);
}

/// log(1 - Phi(x)).
inline double norm_logsf(double x) { return norm_logcdf(-x); }

/// Phi^{-1}(p) for p in (0, 1).
inline double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::domain_error("norm_quantile: probability outside [0, 1]");
  }
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

/// Inverse of the upper tail: returns x with 1 - Phi(x) = q.
inline double norm_isf(double q) { return -norm_quantile(q); }

/// log(exp(a) - exp(b)) for a >= b.
inline double log_diff_exp(double a, double b) {
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(-std::exp(b - a));
}

/// log(exp(a) + exp(b)).
inline double log_sum_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

}  // namespace skewbayes
