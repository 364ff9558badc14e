// Univariate and multivariate skew-normal laws in the direct
// parametrization (location, scale, shape), plus the maps between direct
// parameters and the first three central moments.
#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "skewbayes/normal.hpp"
#include "skewbayes/random.hpp"

namespace skewbayes {

struct SkewNormalParams {
  double xi = 0.0;     // location
  double omega = 1.0;  // scale
  double alpha = 0.0;  // shape

  void validate() const {
    if (!std::isfinite(xi) || !std::isfinite(omega) || !std::isfinite(alpha)) {
      throw std::invalid_argument("SkewNormalParams: non-finite parameter");
    }
    if (!(omega > 0.0)) throw std::invalid_argument("SkewNormalParams: omega must be positive");
  }
};

/// d-variate skew-normal; Omega is a covariance matrix whose diagonal holds
/// the squared component scales.
struct MvSkewNormalParams {
  Eigen::VectorXd xi;
  Eigen::MatrixXd Omega;
  Eigen::VectorXd alpha;

  Eigen::Index dim() const { return xi.size(); }

  void validate() const {
    const auto d = xi.size();
    if (d < 1) throw std::invalid_argument("MvSkewNormalParams: dimension must be >= 1");
    if (Omega.rows() != d || Omega.cols() != d || alpha.size() != d) {
      throw std::invalid_argument("MvSkewNormalParams: inconsistent dimensions");
    }
    if (!xi.allFinite() || !Omega.allFinite() || !alpha.allFinite()) {
      throw std::invalid_argument("MvSkewNormalParams: non-finite entries");
    }
    if (!Omega.isApprox(Omega.transpose(), 1e-12)) {
      throw std::invalid_argument("MvSkewNormalParams: Omega is not symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(Omega);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("MvSkewNormalParams: Omega is not positive definite");
    }
  }
};

/// Largest attainable |skewness| in the skew-normal family (the delta -> 1 limit).
inline constexpr double kMaxSkewness = 0.995271746431156;

struct CentralMoments {
  double mean = 0.0;
  double sd = 1.0;
  double skewness = 0.0;
};

class UnrepresentableSkewness : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline double delta_of_alpha(double alpha) { return alpha / std::sqrt(1.0 + alpha * alpha); }

inline double alpha_of_delta(double delta) { return delta / std::sqrt(1.0 - delta * delta); }

inline double sn_logpdf(const SkewNormalParams& p, double y) {
  if (!std::isfinite(y)) throw std::domain_error("sn_logpdf: non-finite argument");
  const double z = (y - p.xi) / p.omega;
  return std::numbers::ln2 - std::log(p.omega) + norm_logpdf(z) + norm_logcdf(p.alpha * z);
}

inline double sn_pdf(const SkewNormalParams& p, double y) { return std::exp(sn_logpdf(p, y)); }

/// Distribution function by adaptive Gauss-Kronrod quadrature of the
/// density. Below the location the integral runs up from xi - 12 omega;
/// above it the upper tail up to xi + 12 omega is integrated and
/// complemented. Mass outside that window is below 1e-32.
inline double sn_cdf(const SkewNormalParams& p, double y) {
  if (std::isnan(y)) throw std::domain_error("sn_cdf: NaN argument");
  const double z = (y - p.xi) / p.omega;
  if (z <= -12.0) return 0.0;
  if (z >= 12.0) return 1.0;
  auto pdf = [a = p.alpha](double t) {
    return 2.0 * std::exp(norm_logpdf(t) + norm_logcdf(a * t));
  };
  using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;
  double err = 0.0;
  // Split at the standardized origin, where the density bends sharply for large |alpha|.
  auto integrate = [&](double lo, double hi) {
    if (lo >= hi) return 0.0;
    if (lo < 0.0 && hi > 0.0) {
      return Quad::integrate(pdf, lo, 0.0, 20, 1e-13, &err) +
             Quad::integrate(pdf, 0.0, hi, 20, 1e-13, &err);
    }
    return Quad::integrate(pdf, lo, hi, 20, 1e-13, &err);
  };
  const double value = (z <= 0.0) ? integrate(-12.0, z) : 1.0 - integrate(z, 12.0);
  return std::fmin(1.0, std::fmax(0.0, value));
}

/// One draw via the hierarchical representation: a half-normal latent
/// u ~ |N(0, 1)| shifts a normal of variance (1 - delta^2).
inline double sn_draw(const SkewNormalParams& p, Rng& rng) {
  const double delta = delta_of_alpha(p.alpha);
  const double u = std::fabs(std_normal(rng));
  const double e = std_normal(rng);
  return p.xi + p.omega * (delta * u + std::sqrt(1.0 - delta * delta) * e);
}

inline std::vector<double> sn_sample(const SkewNormalParams& p, std::size_t n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sn_sample: n must be >= 1");
  p.validate();
  std::vector<double> out(n);
  for (auto& v : out) v = sn_draw(p, rng);
  return out;
}

/// log of 2 phi_d(y - xi; Omega) Phi(alpha' omega^{-1} (y - xi)).
inline double msn_logpdf(const MvSkewNormalParams& p, const Eigen::VectorXd& y) {
  const auto d = p.dim();
  if (y.size() != d) throw std::invalid_argument("msn_logpdf: dimension mismatch");
  const Eigen::VectorXd r = y - p.xi;
  Eigen::LLT<Eigen::MatrixXd> llt(p.Omega);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("msn_logpdf: Omega is not positive definite");
  }
  const Eigen::VectorXd w = llt.matrixL().solve(r);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const Eigen::VectorXd scaled = r.array() / p.Omega.diagonal().array().sqrt();
  return std::numbers::ln2 - 0.5 * w.squaredNorm() - 0.5 * logdet -
         static_cast<double>(d) * kLogSqrt2Pi + norm_logcdf(p.alpha.dot(scaled));
}

/// n draws (rows) from the d-variate skew-normal by the conditioning
/// representation: one shared half-normal scalar and a correlated normal
/// vector with the matching covariance.
inline Eigen::MatrixXd msn_sample(const MvSkewNormalParams& p, std::size_t n, Rng& rng) {
  p.validate();
  const auto d = p.dim();
  const Eigen::VectorXd omega = p.Omega.diagonal().array().sqrt();
  const Eigen::MatrixXd corr = omega.asDiagonal().inverse() * p.Omega * omega.asDiagonal().inverse();
  // delta = corr * alpha / sqrt(1 + alpha' corr alpha)
  const Eigen::VectorXd ca = corr * p.alpha;
  const Eigen::VectorXd delta = ca / std::sqrt(1.0 + p.alpha.dot(ca));
  Eigen::MatrixXd resid = corr - delta * delta.transpose();
  // Residual covariance is only PSD (singular as |delta| -> 1), hence LDLT.
  Eigen::LDLT<Eigen::MatrixXd> ldlt(resid);
  const Eigen::MatrixXd L = ldlt.matrixL();
  const Eigen::VectorXd D = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  const auto& P = ldlt.transpositionsP();

  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), d);
  Eigen::VectorXd e(d);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    const double u = std::fabs(std_normal(rng));
    for (Eigen::Index j = 0; j < d; ++j) e(j) = std_normal(rng);
    Eigen::VectorXd x = L * D.asDiagonal() * e;
    x = P.transpose() * x;
    const Eigen::VectorXd z = delta * u + x;
    out.row(i) = (p.xi + omega.cwiseProduct(z)).transpose();
  }
  return out;
}

/// First three central moments plus the excess kurtosis (read-only; the
/// elicitation path never uses it).
struct SkewNormalMoments {
  CentralMoments central;
  double excess_kurtosis = 0.0;
};

inline SkewNormalMoments dp_to_moments_full(const SkewNormalParams& p) {
  p.validate();
  const double mu_z = kSqrt2OverPi * delta_of_alpha(p.alpha);
  const double var_z = 1.0 - mu_z * mu_z;
  const double ratio = mu_z * mu_z / var_z;
  SkewNormalMoments m;
  m.central.mean = p.xi + p.omega * mu_z;
  m.central.sd = p.omega * std::sqrt(var_z);
  m.central.skewness =
      0.5 * (4.0 - std::numbers::pi) * (mu_z < 0.0 ? -1.0 : 1.0) * std::pow(ratio, 1.5);
  m.excess_kurtosis = 2.0 * (std::numbers::pi - 3.0) * ratio * ratio;
  return m;
}

inline CentralMoments dp_to_moments(const SkewNormalParams& p) { return dp_to_moments_full(p).central; }

/// Closed-form inverse of dp_to_moments. The skewness equation is solved
/// for E[Z]^2 / Var[Z] by a cube root, which fixes delta; omega and xi then
/// follow from the sd and the mean.
inline SkewNormalParams moments_to_dp(const CentralMoments& m) {
  if (!std::isfinite(m.mean) || !std::isfinite(m.sd) || !std::isfinite(m.skewness) || !(m.sd > 0.0)) {
    throw std::invalid_argument("moments_to_dp: need finite moments with sd > 0");
  }
  if (std::fabs(m.skewness) >= kMaxSkewness) {
    throw UnrepresentableSkewness("moments_to_dp: |skewness| " + std::to_string(m.skewness) +
                                  " is not attainable by a skew-normal");
  }
  const double r = std::cbrt(2.0 * std::fabs(m.skewness) / (4.0 - std::numbers::pi));
  const double abs_mu_z = r / std::sqrt(1.0 + r * r);
  const double mu_z = std::copysign(abs_mu_z, m.skewness);
  const double delta = mu_z / kSqrt2OverPi;
  SkewNormalParams p;
  p.omega = m.sd / std::sqrt(1.0 - mu_z * mu_z);
  p.xi = m.mean - p.omega * mu_z;
  p.alpha = alpha_of_delta(delta);
  return p;
}

}  // namespace skewbayes
