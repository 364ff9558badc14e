// Closed-form SUN posteriors for the skew-normal shape parameter with
// location and scale fixed (data already standardized).
//
// Both priors, and the multivariate prior, lead to a posterior proportional
// to phi_d((alpha - alpha0) / psi) prod_i Phi(c_i + b_i' (alpha - alpha0) / psi)
// with one row per observation (and one per skew-normal prior component).
// Normalizing row i by sqrt(1 + |b_i|^2) gives the SUN latent block:
//   Delta_i = b_i / sqrt(1 + |b_i|^2),  gamma_i = c_i / sqrt(1 + |b_i|^2),
// and Gamma = I - diag(Delta Delta') + Delta Delta'.
#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "skewbayes/distributions.hpp"
#include "skewbayes/ltn.hpp"
#include "skewbayes/normal.hpp"
#include "skewbayes/random.hpp"
#include "skewbayes/sun.hpp"

namespace skewbayes {

struct ShapePrior {
  enum class Kind { Normal, SkewNormal };

  Kind kind = Kind::Normal;
  double alpha0 = 0.0;
  double psi0 = 1.0;
  double lambda0 = 0.0;  // only meaningful for SkewNormal

  static ShapePrior normal(double alpha0, double psi0) { return {Kind::Normal, alpha0, psi0, 0.0}; }
  static ShapePrior skew_normal(double alpha0, double psi0, double lambda0) {
    return {Kind::SkewNormal, alpha0, psi0, lambda0};
  }

  bool is_skew() const { return kind == Kind::SkewNormal; }

  /// lambda0 with the normal prior read as the lambda0 = 0 special case.
  double shape() const { return is_skew() ? lambda0 : 0.0; }

  void validate() const {
    if (!std::isfinite(alpha0) || !std::isfinite(psi0) || !std::isfinite(lambda0)) {
      throw std::invalid_argument("ShapePrior: non-finite hyperparameter");
    }
    if (!(psi0 > 0.0)) throw std::invalid_argument("ShapePrior: psi0 must be positive");
  }

  double log_density(double alpha) const {
    const double z = (alpha - alpha0) / psi0;
    double lp = norm_logpdf(z) - std::log(psi0);
    if (is_skew()) lp += std::numbers::ln2 + norm_logcdf(lambda0 * z);
    return lp;
  }

  SkewNormalParams as_skew_normal() const { return {alpha0, psi0, shape()}; }
};

struct MvShapePrior {
  std::vector<ShapePrior> components;

  std::size_t dim() const { return components.size(); }

  void validate() const {
    if (components.empty()) throw std::invalid_argument("MvShapePrior: need at least one component");
    for (const auto& c : components) c.validate();
  }
};

/// Counts the rows whose |delta| had to be pulled back below 1 - 1e-12.
struct BuildDiagnostics {
  std::size_t clamped_rows = 0;
};

class PosteriorConstructionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace detail {

inline constexpr double kMaxAbsDelta = 1.0 - 2.0 * kDeltaSingularity;

// Adds one normalized row (b, c) to the latent block.
inline void put_row(Eigen::MatrixXd& Delta, Eigen::VectorXd& gamma, Eigen::Index row,
                    const Eigen::VectorXd& b, double c, BuildDiagnostics* diag) {
  if (!b.allFinite() || !std::isfinite(c)) {
    throw PosteriorConstructionError("posterior row " + std::to_string(row) + " has non-finite entries");
  }
  const double norm2 = b.squaredNorm();
  const double scale = 1.0 / std::sqrt(1.0 + norm2);
  Eigen::VectorXd delta = b * scale;
  double len = delta.norm();
  if (len > kMaxAbsDelta) {
    delta *= kMaxAbsDelta / len;
    if (diag) ++diag->clamped_rows;
  }
  Delta.row(row) = delta.transpose();
  gamma(row) = c * scale;
}

}  // namespace detail

/// Posterior under the normal prior: SUN_{1,n}(alpha0, Delta alpha0 / psi0,
/// psi0, 1, Delta, Gamma) with delta_i = psi0 y_i / sqrt(psi0^2 y_i^2 + 1).
inline SunParams build_posterior_pi1(const ShapePrior& prior, std::span<const double> y,
                                     BuildDiagnostics* diag = nullptr) {
  prior.validate();
  if (prior.kind != ShapePrior::Kind::Normal) {
    throw std::invalid_argument("build_posterior_pi1: prior must be normal");
  }
  if (y.empty()) throw std::invalid_argument("build_posterior_pi1: empty sample");
  const auto n = static_cast<Eigen::Index>(y.size());
  SunParams s;
  s.xi = Eigen::VectorXd::Constant(1, prior.alpha0);
  s.omega = Eigen::VectorXd::Constant(1, prior.psi0);
  s.Omega = Eigen::MatrixXd::Identity(1, 1);
  s.Delta.resize(n, 1);
  s.gamma.resize(n);
  Eigen::VectorXd b(1);
  for (Eigen::Index i = 0; i < n; ++i) {
    b(0) = prior.psi0 * y[static_cast<std::size_t>(i)];
    detail::put_row(s.Delta, s.gamma, i, b, y[static_cast<std::size_t>(i)] * prior.alpha0, diag);
  }
  return s;
}

/// Posterior under the skew-normal prior: the normal-prior construction on
/// z = (y, lambda0 / psi0) with gamma_{n+1} = 0.
inline SunParams build_posterior_pi2(const ShapePrior& prior, std::span<const double> y,
                                     BuildDiagnostics* diag = nullptr) {
  prior.validate();
  if (prior.kind != ShapePrior::Kind::SkewNormal) {
    throw std::invalid_argument("build_posterior_pi2: prior must be skew-normal");
  }
  const auto n = static_cast<Eigen::Index>(y.size());
  SunParams s;
  s.xi = Eigen::VectorXd::Constant(1, prior.alpha0);
  s.omega = Eigen::VectorXd::Constant(1, prior.psi0);
  s.Omega = Eigen::MatrixXd::Identity(1, 1);
  s.Delta.resize(n + 1, 1);
  s.gamma.resize(n + 1);
  Eigen::VectorXd b(1);
  for (Eigen::Index i = 0; i < n; ++i) {
    b(0) = prior.psi0 * y[static_cast<std::size_t>(i)];
    detail::put_row(s.Delta, s.gamma, i, b, y[static_cast<std::size_t>(i)] * prior.alpha0, diag);
  }
  b(0) = prior.lambda0;
  detail::put_row(s.Delta, s.gamma, n, b, 0.0, diag);
  return s;
}

/// Dispatches on the prior kind.
inline SunParams build_posterior(const ShapePrior& prior, std::span<const double> y,
                                 BuildDiagnostics* diag = nullptr) {
  return prior.is_skew() ? build_posterior_pi2(prior, y, diag) : build_posterior_pi1(prior, y, diag);
}

/// Multivariate posterior. `y` is n x d (rows are standardized
/// observations). Rows of the latent block are the n observations followed
/// by one row per skew-normal component, in component order.
inline SunParams build_posterior_mv(const MvShapePrior& prior, const Eigen::MatrixXd& y,
                                    BuildDiagnostics* diag = nullptr) {
  prior.validate();
  const auto d = static_cast<Eigen::Index>(prior.dim());
  if (y.cols() != d) throw std::invalid_argument("build_posterior_mv: data has wrong number of columns");
  const auto n = y.rows();
  Eigen::Index k = 0;
  for (const auto& c : prior.components) k += c.is_skew() ? 1 : 0;
  if (n + k == 0) throw std::invalid_argument("build_posterior_mv: no data and no skew components");

  Eigen::VectorXd alpha0(d), psi(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    alpha0(j) = prior.components[static_cast<std::size_t>(j)].alpha0;
    psi(j) = prior.components[static_cast<std::size_t>(j)].psi0;
  }
  SunParams s;
  s.xi = alpha0;
  s.omega = psi;
  s.Omega = Eigen::MatrixXd::Identity(d, d);
  s.Delta.resize(n + k, d);
  s.gamma.resize(n + k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd yi = y.row(i).transpose();
    detail::put_row(s.Delta, s.gamma, i, psi.cwiseProduct(yi), yi.dot(alpha0), diag);
  }
  Eigen::Index row = n;
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto& c = prior.components[static_cast<std::size_t>(j)];
    if (!c.is_skew()) continue;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    b(j) = c.lambda0;
    detail::put_row(s.Delta, s.gamma, row++, b, 0.0, diag);
  }
  return s;
}

/// log prior + sum_i log Phi(alpha y_i), unnormalized.
inline double log_posterior_unnorm(const ShapePrior& prior, std::span<const double> y, double alpha) {
  double lp = prior.log_density(alpha);
  for (double v : y) lp += norm_logcdf(alpha * v);
  return lp;
}

inline double log_posterior_unnorm_mv(const MvShapePrior& prior, const Eigen::MatrixXd& y,
                                      const Eigen::VectorXd& alpha) {
  double lp = 0.0;
  for (std::size_t j = 0; j < prior.dim(); ++j) {
    lp += prior.components[j].log_density(alpha(static_cast<Eigen::Index>(j)));
  }
  for (Eigen::Index i = 0; i < y.rows(); ++i) lp += norm_logcdf(y.row(i).dot(alpha));
  return lp;
}

struct PosteriorMoments {
  double mean = 0.0;
  double variance = 0.0;
  double mc_se = 0.0;  // standard error of the mean, batch means
};

/// Monte Carlo mean and variance of a univariate factor-form SUN. Draws come
/// from one persistent chain (started at the location and burned in for
/// `burn_in` draws); the standard error uses 25 batch means.
inline PosteriorMoments posterior_moments_mc(const SunParams& s, std::size_t n_draws, Rng& rng,
                                             LtnKernelOptions opt = {}, std::size_t burn_in = 10) {
  if (n_draws < 50) throw std::invalid_argument("posterior_moments_mc: need at least 50 draws");
  SunSamplerD1 sampler(s, opt);
  sampler.start_at(s.xi(0));
  for (std::size_t i = 0; i < burn_in; ++i) sampler.draw(rng);
  constexpr std::size_t kBatches = 25;
  const std::size_t per_batch = n_draws / kBatches;
  const std::size_t used = per_batch * kBatches;
  std::vector<double> batch(kBatches, 0.0);
  // Welford on the draws, offset by the location for conditioning.
  double mean = 0.0, m2 = 0.0;
  const double shift = s.xi(0);
  for (std::size_t i = 0; i < n_draws; ++i) {
    const double x = sampler.draw(rng) - shift;
    const double delta = x - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (x - mean);
    if (i < used) batch[i / per_batch] += x;
  }
  PosteriorMoments out;
  out.mean = mean + shift;
  out.variance = m2 / static_cast<double>(n_draws - 1);
  double bm = 0.0;
  for (auto& b : batch) {
    b /= static_cast<double>(per_batch);
    bm += b;
  }
  bm /= kBatches;
  double bv = 0.0;
  for (double b : batch) bv += (b - bm) * (b - bm);
  bv /= static_cast<double>(kBatches - 1);
  out.mc_se = std::sqrt(bv / kBatches);
  return out;
}

struct ModeResult {
  double mode = 0.0;
  bool at_edge = false;  // maximum on the bracket boundary: likely divergent estimate
};

inline constexpr double kModeBracket = 200.0;

/// Posterior mode by golden-section search over [-200, 200]. The log
/// posterior is concave (log-concave prior times log Phi terms), so the
/// search finds the global maximum.
inline ModeResult posterior_mode(const ShapePrior& prior, std::span<const double> y, double tol = 1e-7) {
  prior.validate();
  auto f = [&](double a) { return log_posterior_unnorm(prior, y, a); };
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = -kModeBracket, b = kModeBracket;
  double c = b - ratio * (b - a);
  double d = a + ratio * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = f(d);
    }
  }
  ModeResult out;
  out.mode = 0.5 * (a + b);
  out.at_edge = kModeBracket - std::fabs(out.mode) < 1e-3;
  return out;
}

}  // namespace skewbayes
