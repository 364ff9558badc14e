// Prior elicitation: sign probability and mean of the shape prior, and
// hyperparameters matched to past-cohort moments.
#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "skewbayes/distributions.hpp"
#include "skewbayes/gibbs.hpp"
#include "skewbayes/normal.hpp"
#include "skewbayes/posterior.hpp"

namespace skewbayes {

/// Pr(alpha < 0) under the prior; the normal prior is the lambda0 = 0 case.
inline double prob_alpha_negative(const ShapePrior& prior) {
  prior.validate();
  return sn_cdf(prior.as_skew_normal(), 0.0);
}

inline double prior_mean_alpha(const ShapePrior& prior) {
  prior.validate();
  return prior.alpha0 + prior.psi0 * kSqrt2OverPi * delta_of_alpha(prior.shape());
}

struct ElicitedPrior {
  SkewNormalParams target;  // DP implied by the moments
  ShapePrior shape;
  NigPrior nig;
};

/// Hyperparameters centered on the DP implied by (mean, sd, skewness).
///
/// `strength` s > 0 tightens every component together:
///
///   psi0 = 1 / s,   kappa = 0.25 / s,   a = s,   b = (a + 1) omega*^2,
///
/// so s = 1 gives psi0 = 1, kappa = 0.25, a = 1, and b always puts the prior
/// mode of omega^2 at omega*^2.
inline ElicitedPrior elicit_from_moments(const CentralMoments& m, double strength) {
  if (!(strength > 0.0 && std::isfinite(strength))) {
    throw std::invalid_argument("elicit_from_moments: strength must be positive");
  }
  ElicitedPrior out;
  out.target = moments_to_dp(m);
  out.shape = ShapePrior::normal(out.target.alpha, 1.0 / strength);
  out.nig.xi0 = out.target.xi;
  out.nig.kappa = 0.25 / strength;
  out.nig.a = strength;
  out.nig.b = (out.nig.a + 1.0) * out.target.omega * out.target.omega;
  return out;
}

/// (lambda0, Pr(alpha < 0)) pairs for a skew-normal prior centered at zero.
inline std::vector<std::pair<double, double>> fig1_curve(double psi0, const std::vector<double>& lambdas) {
  std::vector<std::pair<double, double>> out;
  out.reserve(lambdas.size());
  for (double l : lambdas) out.emplace_back(l, prob_alpha_negative(ShapePrior::skew_normal(0.0, psi0, l)));
  return out;
}

}  // namespace skewbayes
