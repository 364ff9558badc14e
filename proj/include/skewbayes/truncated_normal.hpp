// Univariate truncated normal variates.
#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "skewbayes/normal.hpp"
#include "skewbayes/random.hpp"

namespace skewbayes {

class InfeasibleTruncation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace detail {

// Standardized lower bound above which the inverse-cdf route is abandoned
// for exponential rejection.
inline constexpr double kTailSwitch = 4.0;

// Standard normal restricted to (lo, hi) with 0 <= lo < hi.
inline double std_truncnorm_right(double lo, double hi, Rng& rng) {
  if (lo <= kTailSwitch) {
    const double q_lo = norm_sf(lo);
    const double q_hi = norm_sf(hi);
    const double q = q_hi + uniform01(rng) * (q_lo - q_hi);
    const double x = norm_isf(q);
    return std::fmin(std::fmax(x, lo), hi);
  }
  // Translated exponential proposal with rate lo, itself truncated to the
  // interval; accepted with probability exp(-(x - lo)^2 / 2).
  const double width = hi - lo;
  const double tail = std::isfinite(width) ? -std::expm1(-lo * width) : 1.0;
  for (;;) {
    const double x = lo - std::log1p(-uniform01(rng) * tail) / lo;
    const double t = x - lo;
    if (uniform01(rng) <= std::exp(-0.5 * t * t) && x <= hi) return x;
  }
}

}  // namespace detail

/// Standard normal restricted to the open interval (lo, hi). Either bound
/// may be infinite.
inline double std_truncnorm(double lo, double hi, Rng& rng) {
  if (!(lo < hi)) {
    throw InfeasibleTruncation("std_truncnorm: empty truncation interval");
  }
  if (hi <= 0.0) return -detail::std_truncnorm_right(-hi, -lo, rng);
  if (lo >= 0.0) return detail::std_truncnorm_right(lo, hi, rng);
  // Interval straddles zero: plain inverse cdf is well conditioned.
  const double p_lo = norm_cdf(lo);
  const double p_hi = norm_cdf(hi);
  const double p = p_lo + uniform01(rng) * (p_hi - p_lo);
  const double x = norm_quantile(p);
  return std::fmin(std::fmax(x, lo), hi);
}

/// Exact draw from N(mu, sigma^2) restricted to (lower, +inf).
inline double truncnorm_1d(double mu, double sigma, double lower, Rng& rng) {
  if (!(sigma > 0.0) || !std::isfinite(mu)) {
    throw std::invalid_argument("truncnorm_1d: need finite mu and sigma > 0");
  }
  const double z = (lower - mu) / sigma;
  return mu + sigma * std_truncnorm(z, std::numeric_limits<double>::infinity(), rng);
}

/// Mean of N(mu, sigma^2) truncated below at `lower`.
inline double truncnorm_mean(double mu, double sigma, double lower) {
  const double z = (lower - mu) / sigma;
  // Inverse Mills ratio phi(z) / (1 - Phi(z)), in log space for large z.
  return mu + sigma * std::exp(norm_logpdf(z) - norm_logsf(z));
}

}  // namespace skewbayes
