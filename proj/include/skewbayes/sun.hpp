// Unified skew-normal (SUN) parameters and density.
//
// A SUN_{d,m}(xi, gamma, omega, Omega, Delta, Gamma) vector has density
//
//   phi_d(z - xi; w Omega w) Phi_m(gamma + Delta Omega^{-1} w^{-1} (z - xi); Gamma - Delta Omega^{-1} Delta')
//                            / Phi_m(gamma; Gamma)
//
// with w = diag(omega). Delta is stored m x d. Every posterior built in this
// library has Gamma - Delta Omega^{-1} Delta' diagonal, so Gamma is left
// implicit ("factor form") and is only materialized for validation and the
// test oracles.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "skewbayes/normal.hpp"
#include "skewbayes/random.hpp"

namespace skewbayes {

class InvalidSunParams : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NearSingularCorrelation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Correlation matrix I - D(delta)^2 + delta delta'.
struct Rank1Correlation {
  Eigen::VectorXd delta;

  Eigen::Index size() const { return delta.size(); }

  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd g = delta * delta.transpose();
    g.diagonal().setOnes();
    return g;
  }
};

inline constexpr double kDeltaSingularity = 1e-12;

/// Gamma^{-1} in closed form by Sherman-Morrison, O(m^2):
///   diag(1/(1-d_i^2)) - (1 + sum d_i^2/(1-d_i^2))^{-1} * Dt,
///   Dt_ij = d_i d_j / ((1-d_i^2)(1-d_j^2)).
inline Eigen::MatrixXd rank1_precision(const Rank1Correlation& c) {
  const auto m = c.size();
  Eigen::VectorXd u(m);
  double s = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double d = c.delta(i);
    if (!(std::fabs(d) < 1.0 - kDeltaSingularity)) {
      throw NearSingularCorrelation("rank1_precision: |delta_" + std::to_string(i) +
                                    "| is too close to 1");
    }
    u(i) = d / (1.0 - d * d);
    s += d * u(i);
  }
  Eigen::MatrixXd out = -(u * u.transpose()) / (1.0 + s);
  for (Eigen::Index i = 0; i < m; ++i) out(i, i) += 1.0 / (1.0 - c.delta(i) * c.delta(i));
  return out;
}

/// Gamma^{-1} v by the same Sherman-Morrison identity, O(m).
inline Eigen::VectorXd rank1_solve(const Rank1Correlation& c, const Eigen::VectorXd& v) {
  const auto m = c.size();
  if (v.size() != m) throw std::invalid_argument("rank1_solve: dimension mismatch");
  Eigen::VectorXd out(m);
  double s = 0.0, uv = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double d = c.delta(i);
    if (!(std::fabs(d) < 1.0 - kDeltaSingularity)) {
      throw NearSingularCorrelation("rank1_solve: |delta_" + std::to_string(i) + "| is too close to 1");
    }
    const double u = d / (1.0 - d * d);
    s += d * u;
    uv += u * v(i);
    out(i) = v(i) / (1.0 - d * d);
  }
  for (Eigen::Index i = 0; i < m; ++i) out(i) -= c.delta(i) / (1.0 - c.delta(i) * c.delta(i)) * uv / (1.0 + s);
  return out;
}

struct SunParams {
  Eigen::VectorXd xi;     // d
  Eigen::VectorXd gamma;  // m
  Eigen::VectorXd omega;  // d, diagonal of the scale matrix
  Eigen::MatrixXd Omega;  // d x d correlation
  Eigen::MatrixXd Delta;  // m x d
  // Empty means factor form: Gamma = I - diag(Delta Omega^{-1} Delta') + Delta Omega^{-1} Delta'.
  std::optional<Eigen::MatrixXd> Gamma;

  Eigen::Index d() const { return xi.size(); }
  Eigen::Index m() const { return gamma.size(); }

  bool factor_form() const { return !Gamma.has_value(); }

  Eigen::MatrixXd Omega_inv_DeltaT() const { return Omega.llt().solve(Delta.transpose()); }

  Eigen::MatrixXd gamma_matrix() const {
    if (Gamma) return *Gamma;
    Eigen::MatrixXd g = Delta * Omega_inv_DeltaT();
    g.diagonal().setOnes();
    return g;
  }

  /// Gamma - Delta Omega^{-1} Delta'.
  Eigen::MatrixXd conditional_cov() const { return gamma_matrix() - Delta * Omega_inv_DeltaT(); }

  /// d = 1, Omega = 1, factor form: the structure every univariate shape posterior has.
  bool is_rank1() const {
    return d() == 1 && factor_form() && std::fabs(Omega(0, 0) - 1.0) < 1e-14;
  }

  Rank1Correlation rank1() const {
    if (!is_rank1()) throw InvalidSunParams("SunParams: not a rank-1 correlation structure");
    return Rank1Correlation{Delta.col(0)};
  }

  void validate(double tol = 1e-10) const {
    const auto dd = d();
    const auto mm = m();
    if (dd < 1 || mm < 1) throw InvalidSunParams("SunParams: need d >= 1 and m >= 1");
    if (omega.size() != dd || Omega.rows() != dd || Omega.cols() != dd || Delta.rows() != mm ||
        Delta.cols() != dd) {
      throw InvalidSunParams("SunParams: inconsistent dimensions");
    }
    if (Gamma && (Gamma->rows() != mm || Gamma->cols() != mm)) {
      throw InvalidSunParams("SunParams: Gamma has wrong dimensions");
    }
    if (!xi.allFinite() || !gamma.allFinite() || !omega.allFinite() || !Omega.allFinite() ||
        !Delta.allFinite() || (Gamma && !Gamma->allFinite())) {
      throw InvalidSunParams("SunParams: non-finite entries");
    }
    if ((omega.array() <= 0.0).any()) throw InvalidSunParams("SunParams: omega must be positive");
    auto unit_diag = [tol](const Eigen::MatrixXd& a) {
      return ((a.diagonal().array() - 1.0).abs() <= tol).all() && a.isApprox(a.transpose(), tol);
    };
    if (!unit_diag(Omega)) throw InvalidSunParams("SunParams: Omega is not a correlation matrix");
    if (Gamma && !unit_diag(*Gamma)) {
      throw InvalidSunParams("SunParams: Gamma is not a correlation matrix");
    }
    Eigen::MatrixXd star(mm + dd, mm + dd);
    star.topLeftCorner(mm, mm) = gamma_matrix();
    star.topRightCorner(mm, dd) = Delta;
    star.bottomLeftCorner(dd, mm) = Delta.transpose();
    star.bottomRightCorner(dd, dd) = Omega;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(star, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol) {
      throw InvalidSunParams("SunParams: block matrix [[Gamma, Delta], [Delta', Omega]] is not PSD");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ec(conditional_cov(), Eigen::EigenvaluesOnly);
    if (ec.eigenvalues().minCoeff() < -tol) {
      throw InvalidSunParams("SunParams: Gamma - Delta Omega^-1 Delta' is not PSD");
    }
  }
};

// ---------------------------------------------------------------------------
// Multivariate normal orthant probabilities
// ---------------------------------------------------------------------------

struct MvnCdfResult {
  double log_value = 0.0;
  double abs_error = 0.0;  // 3-sigma error estimate on the probability scale
  std::size_t points = 0;
  bool converged = true;
};

namespace detail {

inline const std::vector<double>& lattice_primes() {
  static const std::vector<double> primes = [] {
    std::vector<double> p;
    for (int k = 2; p.size() < 128; ++k) {
      bool prime = true;
      for (int j = 2; j * j <= k; ++j) {
        if (k % j == 0) {
          prime = false;
          break;
        }
      }
      if (prime) p.push_back(static_cast<double>(k));
    }
    return p;
  }();
  return primes;
}


// Cholesky factor of `cov` with the Genz-Bretz variable ordering: at each
// step the coordinate with the smallest conditional probability goes next,
// conditioning on the truncated means of the coordinates already placed.
// Returns L and writes the permuted limits to `b`.
inline Eigen::MatrixXd prioritized_cholesky(const Eigen::VectorXd& upper, const Eigen::MatrixXd& cov,
                                            Eigen::VectorXd& b) {
  const auto m = upper.size();
  Eigen::MatrixXd c = cov;
  b = upper;
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::Index best = i;
    double best_p = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = i; j < m; ++j) {
      const double var = c(j, j) - L.row(j).head(i).squaredNorm();
      if (var <= 0.0) throw std::domain_error("mvn_cdf_qmc: covariance not positive definite");
      const double lp = norm_logcdf((b(j) - L.row(j).head(i).dot(y.head(i))) / std::sqrt(var));
      if (lp < best_p) {
        best_p = lp;
        best = j;
      }
    }
    if (best != i) {
      std::swap(b(i), b(best));
      c.row(i).swap(c.row(best));
      c.col(i).swap(c.col(best));
      L.row(i).swap(L.row(best));
    }
    const double lii = std::sqrt(c(i, i) - L.row(i).head(i).squaredNorm());
    L(i, i) = lii;
    for (Eigen::Index l = i + 1; l < m; ++l) {
      L(l, i) = (c(l, i) - L.row(l).head(i).dot(L.row(i).head(i))) / lii;
    }
    const double a = (b(i) - L.row(i).head(i).dot(y.head(i))) / lii;
    y(i) = -std::exp(norm_logpdf(a) - norm_logcdf(a));
  }
  return L;
}

}  // namespace detail

/// Phi_m(upper; cov) by Genz's separation-of-variables transform integrated
/// with a randomized Richtmyer lattice. Points are doubled until the
/// relative error estimate drops below `rel_tol` or `budget` points are
/// spent. Shifts come from a fixed seed, so repeated calls agree exactly.
inline MvnCdfResult mvn_cdf_qmc(const Eigen::VectorXd& upper, const Eigen::MatrixXd& cov,
                                std::size_t budget = 1u << 20, double rel_tol = 1e-6,
                                std::uint64_t seed = 0x5EEDULL) {
  const auto m = upper.size();
  if (cov.rows() != m || cov.cols() != m) throw std::invalid_argument("mvn_cdf_qmc: dimension mismatch");
  if (m > static_cast<Eigen::Index>(detail::lattice_primes().size())) {
    throw std::invalid_argument("mvn_cdf_qmc: dimension too large");
  }
  Eigen::VectorXd b;
  const Eigen::MatrixXd L = detail::prioritized_cholesky(upper, cov, b);

  constexpr int kShifts = 12;
  Rng rng(seed);
  std::vector<Eigen::VectorXd> shifts(kShifts, Eigen::VectorXd(std::max<Eigen::Index>(m - 1, 1)));
  for (auto& s : shifts) {
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = uniform01(rng);
  }
  Eigen::VectorXd q(std::max<Eigen::Index>(m - 1, 1));
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const double r = std::sqrt(detail::lattice_primes()[static_cast<std::size_t>(i)]);
    q(i) = r - std::floor(r);
  }

  const double e1 = norm_cdf(b(0) / L(0, 0));
  std::vector<double> sums(kShifts, 0.0);
  Eigen::VectorXd y(m);
  auto integrand = [&](const Eigen::VectorXd& w) {
    double e = e1;
    double f = e1;
    for (Eigen::Index i = 1; i < m; ++i) {
      const double p = std::clamp(w(i - 1) * e, 1e-300, 1.0 - 1e-16);
      y(i - 1) = norm_quantile(p);
      double c = 0.0;
      for (Eigen::Index j = 0; j < i; ++j) c += L(i, j) * y(j);
      e = norm_cdf((b(i) - c) / L(i, i));
      f *= e;
      if (f == 0.0) break;
    }
    return f;
  };

  MvnCdfResult out;
  if (m == 1) {
    out.log_value = std::log(e1);
    out.points = 1;
    return out;
  }
  std::size_t n = 0;
  std::size_t target = 256;
  Eigen::VectorXd w(m - 1);
  double mean = 0.0;
  for (;;) {
    // One free coordinate: the shifted equispaced rule is the optimal
    // lattice, rebuilt at every doubling. Otherwise the Richtmyer sequence
    // is extended in place.
    const bool equispaced = m == 2;
    if (equispaced) {
      std::fill(sums.begin(), sums.end(), 0.0);
      n = 0;
    }
    for (int s = 0; s < kShifts; ++s) {
      for (std::size_t k = n; k < target; ++k) {
        for (Eigen::Index i = 0; i < m - 1; ++i) {
          double x = equispaced ? (static_cast<double>(k) + shifts[static_cast<std::size_t>(s)](i)) /
                                      static_cast<double>(target)
                                : static_cast<double>(k + 1) * q(i) + shifts[static_cast<std::size_t>(s)](i);
          x -= std::floor(x);
          w(i) = std::fabs(2.0 * x - 1.0);  // baker's transform
        }
        sums[static_cast<std::size_t>(s)] += integrand(w);
      }
    }
    n = target;
    mean = 0.0;
    for (double s : sums) mean += s / static_cast<double>(n);
    mean /= kShifts;
    double var = 0.0;
    for (double s : sums) {
      const double v = s / static_cast<double>(n) - mean;
      var += v * v;
    }
    var /= static_cast<double>(kShifts * (kShifts - 1));
    out.abs_error = 3.0 * std::sqrt(var);
    out.points = n * kShifts;
    if (out.abs_error <= rel_tol * mean) break;
    if (2 * target * kShifts > budget) {
      out.converged = false;
      break;
    }
    target *= 2;
  }
  out.log_value = std::log(mean);
  return out;
}

/// Exact log Phi_m(upper; Gamma) for Gamma = I - D(delta)^2 + delta delta':
/// with X_i = delta_i W + sqrt(1 - delta_i^2) E_i the orthant probability is
/// the one-dimensional integral of phi(w) prod_i Phi((u_i - delta_i w) / s_i).
inline double log_mvn_cdf_rank1(const Eigen::VectorXd& upper, const Rank1Correlation& c) {
  const auto m = c.size();
  Eigen::VectorXd s(m);
  for (Eigen::Index i = 0; i < m; ++i) s(i) = std::sqrt(1.0 - c.delta(i) * c.delta(i));
  auto log_integrand = [&](double w) {
    double acc = norm_logpdf(w);
    for (Eigen::Index i = 0; i < m; ++i) acc += norm_logcdf((upper(i) - c.delta(i) * w) / s(i));
    return acc;
  };
  // Rescale by the integrand peak on a coarse grid to keep the quadrature in range.
  double peak = -std::numeric_limits<double>::infinity();
  for (double w = -12.0; w <= 12.0; w += 0.05) peak = std::max(peak, log_integrand(w));
  auto f = [&](double w) { return std::exp(log_integrand(w) - peak); };
  using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
  double total = 0.0;
  for (double a = -12.0; a < 12.0; a += 1.0) total += Quad::integrate(f, a, a + 1.0, 15, 1e-14);
  return peak + std::log(total);
}

// ---------------------------------------------------------------------------
// Density
// ---------------------------------------------------------------------------

struct SunLogDensity {
  double value = 0.0;
  double error_estimate = 0.0;  // absolute, on the log scale
  std::optional<std::string> warning;
};

/// Evaluates the SUN log-density at many points, computing the
/// Phi_m(gamma; Gamma) normalizer once.
class SunDensity {
 public:
  static constexpr Eigen::Index kMaxD = 3;
  static constexpr Eigen::Index kMaxM = 32;

  explicit SunDensity(SunParams s, std::size_t mvn_cdf_budget = 1u << 20)
      : s_(std::move(s)), budget_(mvn_cdf_budget) {
    s_.validate();
    if (s_.d() > kMaxD || s_.m() > kMaxM) {
      throw std::invalid_argument("sun_logpdf: density evaluation limited to d <= 3, m <= 32");
    }
    const Eigen::MatrixXd gam = s_.gamma_matrix();
    normalizer_ = mvn_cdf_qmc(s_.gamma, gam, budget_);
    if (!normalizer_.converged) {
      warning_ = "normalizing orthant probability did not reach 1e-6 relative error within " +
                 std::to_string(budget_) + " points";
    }
    cond_cov_ = s_.conditional_cov();
    const Eigen::MatrixXd off = cond_cov_ - Eigen::MatrixXd(cond_cov_.diagonal().asDiagonal());
    diagonal_ = off.cwiseAbs().maxCoeff() <= 1e-13;
    proj_ = s_.Omega_inv_DeltaT().transpose();  // Delta Omega^{-1}, m x d
    scale_ = Eigen::MatrixXd(s_.omega.asDiagonal()) * s_.Omega * Eigen::MatrixXd(s_.omega.asDiagonal());
    scale_llt_.compute(scale_);
  }

  const SunParams& params() const { return s_; }
  const MvnCdfResult& normalizer() const { return normalizer_; }

  SunLogDensity operator()(const Eigen::VectorXd& z) const {
    if (z.size() != s_.d()) throw std::invalid_argument("sun_logpdf: dimension mismatch");
    const Eigen::VectorXd r = z - s_.xi;
    const Eigen::VectorXd w = scale_llt_.matrixL().solve(r);
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < s_.d(); ++i) logdet += 2.0 * std::log(scale_llt_.matrixLLT()(i, i));
    const double log_phi = -0.5 * w.squaredNorm() - 0.5 * logdet - static_cast<double>(s_.d()) * kLogSqrt2Pi;

    const Eigen::VectorXd arg = s_.gamma + proj_ * (r.array() / s_.omega.array()).matrix();
    SunLogDensity out;
    out.warning = warning_;
    double log_num = 0.0;
    double num_err = 0.0;
    if (diagonal_) {
      for (Eigen::Index i = 0; i < s_.m(); ++i) {
        const double v = cond_cov_(i, i);
        if (v <= 0.0) {
          if (arg(i) < 0.0) log_num = -std::numeric_limits<double>::infinity();
          continue;
        }
        log_num += norm_logcdf(arg(i) / std::sqrt(v));
      }
    } else {
      const auto num = mvn_cdf_qmc(arg, cond_cov_, budget_);
      log_num = num.log_value;
      num_err = num.abs_error / std::exp(num.log_value);
      if (!num.converged && !out.warning) out.warning = "numerator orthant probability did not converge";
    }
    out.value = log_phi + log_num - normalizer_.log_value;
    out.error_estimate = num_err + normalizer_.abs_error / std::exp(normalizer_.log_value);
    return out;
  }

 private:
  SunParams s_;
  std::size_t budget_;
  MvnCdfResult normalizer_;
  std::optional<std::string> warning_;
  Eigen::MatrixXd cond_cov_;
  bool diagonal_ = false;
  Eigen::MatrixXd proj_;
  Eigen::MatrixXd scale_;
  Eigen::LLT<Eigen::MatrixXd> scale_llt_;
};

inline SunLogDensity sun_logpdf(const SunParams& s, const Eigen::VectorXd& z,
                                std::size_t mvn_cdf_budget = 1u << 20) {
  return SunDensity(s, mvn_cdf_budget)(z);
}

}  // namespace skewbayes
