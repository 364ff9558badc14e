// Lower-truncated multivariate normal kernels for factor-structured
// correlations, and the SUN samplers built on them.
//
// A factor correlation writes the latent block as
//
//   V0_i = a_i' t + s_i eps_i,   t ~ N_d(0, Omega),  eps ~ N_m(0, I),
//
// so Cov(V0) = A Omega A' + D(s^2) = Gamma. The target is V0 restricted to
// V0 > -gamma componentwise. One sweep runs three Gibbs updates, each of
// which leaves the target invariant:
//
//   1. eps | t      m independent one-sided truncated normals
//   2. t | eps      d univariate doubly truncated normals (coordinatewise)
//   3. t | V0       unconstrained Gaussian regression with V0 held fixed,
//                   after which eps is recomputed from V0
//
// Steps 1-2 are the plain two-block kernel; step 3 is the same regression
// that maps V0 to the SUN variate, and interleaving it removes the slow
// drift of t when many constraints are nearly active. All three cost O(m d).
#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "skewbayes/random.hpp"
#include "skewbayes/sun.hpp"
#include "skewbayes/truncated_normal.hpp"

namespace skewbayes {

inline constexpr int kDefaultSweeps = 50;

struct LtnKernelOptions {
  int sweeps = kDefaultSweeps;
  bool interweave = true;  // run the regression update (step 3) in every sweep
};

/// Two-block Gibbs kernel for N_m(0, I - D(delta)^2 + delta delta')
/// truncated below at -gamma. The scalar factor w carries all dependence.
class Rank1LtnSampler {
 public:
  Rank1LtnSampler(const Rank1Correlation& c, const Eigen::VectorXd& gamma)
      : delta_(c.delta), gamma_(gamma) {
    const auto m = delta_.size();
    if (gamma_.size() != m) throw std::invalid_argument("Rank1LtnSampler: dimension mismatch");
    s_.resize(m);
    eps_.setZero(m);
    v0_.setZero(m);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double d = delta_(i);
      if (!(std::fabs(d) < 1.0)) {
        throw NearSingularCorrelation("Rank1LtnSampler: |delta_" + std::to_string(i) + "| >= 1");
      }
      s_(i) = std::sqrt(1.0 - d * d);
      sum += d * d / (1.0 - d * d);
    }
    // w | V0 ~ N(g' V0, 1 / (1 + sum)), g = Gamma^{-1} delta; by Sherman-Morrison
    // g_i = delta_i / ((1 - delta_i^2)(1 + sum)).
    resid_sd_ = std::sqrt(1.0 / (1.0 + sum));
    g_.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) g_(i) = delta_(i) / ((1.0 - delta_(i) * delta_(i)) * (1.0 + sum));
  }

  /// Replace the regression weights Gamma^{-1} delta (e.g. from rank1_solve).
  void set_regression(const Eigen::VectorXd& g, double resid_var) {
    g_ = g;
    resid_sd_ = std::sqrt(std::fmax(resid_var, 0.0));
  }

  const Eigen::VectorXd& regression() const { return g_; }
  double residual_sd() const { return resid_sd_; }

  /// Start the chain at factor value w. Any w is admissible because the
  /// next sweep draws eps conditionally on it first.
  void reset(double w) { w_ = w; }

  double factor() const { return w_; }

  void sweep(Rng& rng, bool interweave = true) {
    const auto m = delta_.size();
    const double inf = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      eps_(i) = std_truncnorm((-gamma_(i) - delta_(i) * w_) / s_(i), inf, rng);
    }
    double lo = -inf;
    double hi = inf;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double d = delta_(i);
      if (d == 0.0) continue;
      const double bound = (-gamma_(i) - s_(i) * eps_(i)) / d;
      if (d > 0.0) {
        lo = std::fmax(lo, bound);
      } else {
        hi = std::fmin(hi, bound);
      }
    }
    w_ = draw_between(lo, hi, rng);
    if (interweave) {
      double mean = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        v0_(i) = delta_(i) * w_ + s_(i) * eps_(i);
        mean += g_(i) * v0_(i);
      }
      w_ = mean + resid_sd_ * std_normal(rng);
      for (Eigen::Index i = 0; i < m; ++i) eps_(i) = (v0_(i) - delta_(i) * w_) / s_(i);
    }
  }

  Eigen::VectorXd latent() const { return delta_ * w_ + s_.cwiseProduct(eps_); }

  /// The Lemma-1 map: g' V0 + sqrt(1 - delta' Gamma^{-1} delta) V1.
  double project(Rng& rng) const { return g_.dot(latent()) + resid_sd_ * std_normal(rng); }

 private:
  double draw_between(double lo, double hi, Rng& rng) const {
    if (lo < hi) return std_truncnorm(lo, hi, rng);
    // Only rounding can pinch the interval shut: the current w satisfies
    // every constraint exactly.
    if (lo - hi > 1e-9 * (1.0 + std::fabs(lo))) {
      throw InfeasibleTruncation("Rank1LtnSampler: truncation region is numerically empty");
    }
    return 0.5 * (lo + hi);
  }

  Eigen::VectorXd delta_;
  Eigen::VectorXd gamma_;
  Eigen::VectorXd s_;
  Eigen::VectorXd g_;
  double resid_sd_ = 1.0;
  Eigen::VectorXd eps_;
  Eigen::VectorXd v0_;
  double w_ = 0.0;
};

/// One draw of V0 ~ N_m(0, Gamma) truncated below at -gamma after
/// `n_sweeps` sweeps from w = 0.
inline Eigen::VectorXd ltn_sample_rank1(const Rank1Correlation& c, const Eigen::VectorXd& gamma,
                                        int n_sweeps, Rng& rng, bool interweave = true) {
  Rank1LtnSampler k(c, gamma);
  k.reset(0.0);
  for (int i = 0; i < n_sweeps; ++i) k.sweep(rng, interweave);
  return k.latent();
}

/// Persistent sampler for a univariate SUN in factor form (d = 1, Omega = 1).
/// Each draw advances the chain by `sweeps` sweeps and applies
/// Y = xi + omega (Delta' Gamma^{-1} V0 + sqrt(1 - Delta' Gamma^{-1} Delta) V1),
/// with Gamma^{-1} Delta from rank1_solve.
class SunSamplerD1 {
 public:
  explicit SunSamplerD1(const SunParams& s, LtnKernelOptions opt = {})
      : xi_(s.xi(0)), omega_(s.omega(0)), opt_(opt), kernel_(s.rank1(), s.gamma) {
    const auto c = s.rank1();
    const Eigen::VectorXd g = rank1_solve(c, c.delta);
    double q = 1.0 - c.delta.dot(g);
    if (q < -1e-10) throw InvalidSunParams("sun_sample_d1: 1 - Delta' Gamma^-1 Delta is negative");
    kernel_.set_regression(g, std::fmax(q, 0.0));
  }

  /// Warm start at a value on the Y scale; the latent factor starts at the
  /// matching standardized value.
  void start_at(double y) { kernel_.reset((y - xi_) / omega_); }

  double draw(Rng& rng) {
    for (int i = 0; i < opt_.sweeps; ++i) kernel_.sweep(rng, opt_.interweave);
    return xi_ + omega_ * kernel_.project(rng);
  }

  const Rank1LtnSampler& kernel() const { return kernel_; }

 private:
  double xi_;
  double omega_;
  LtnKernelOptions opt_;
  Rank1LtnSampler kernel_;
};

/// One independent draw from a univariate factor-form SUN: a fresh chain
/// started at the location, run for n_sweeps sweeps.
inline double sun_sample_d1(const SunParams& s, int n_sweeps, Rng& rng, bool interweave = true) {
  SunSamplerD1 sampler(s, LtnKernelOptions{n_sweeps, interweave});
  sampler.start_at(s.xi(0));
  return sampler.draw(rng);
}

/// Factor kernel for d >= 1 and an arbitrary correlation Omega. Requires
/// Gamma - Delta Omega^{-1} Delta' to be diagonal (factor form).
class FactorLtnSampler {
 public:
  FactorLtnSampler(const SunParams& s) : gamma_(s.gamma) {
    if (!s.factor_form()) {
      const Eigen::MatrixXd cc = s.conditional_cov();
      const Eigen::MatrixXd off = cc - Eigen::MatrixXd(cc.diagonal().asDiagonal());
      if (off.cwiseAbs().maxCoeff() > 1e-10) {
        throw InvalidSunParams("sun_sample_md: Gamma - Delta Omega^-1 Delta' must be diagonal");
      }
    }
    const auto m = s.m();
    const auto d = s.d();
    Eigen::LLT<Eigen::MatrixXd> omega_llt(s.Omega);
    if (omega_llt.info() != Eigen::Success) throw InvalidSunParams("sun_sample_md: Omega not positive definite");
    A_ = omega_llt.solve(s.Delta.transpose()).transpose();  // Delta Omega^{-1}
    s_.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double v = 1.0 - s.Delta.row(i).dot(A_.row(i));
      if (v < -1e-10) throw InvalidSunParams("sun_sample_md: row " + std::to_string(i) + " of Delta is too long");
      if (v <= 0.0) throw NearSingularCorrelation("sun_sample_md: degenerate row " + std::to_string(i));
      s_(i) = std::sqrt(v);
    }
    P_ = omega_llt.solve(Eigen::MatrixXd::Identity(d, d));
    // t | V0: precision Omega^{-1} + A' D^{-2} A, mean Q^{-1} A' D^{-2} V0.
    const Eigen::VectorXd inv_s2 = s_.array().square().inverse();
    const Eigen::MatrixXd Q = P_ + A_.transpose() * inv_s2.asDiagonal() * A_;
    Q_llt_.compute(Q);
    B_ = Q_llt_.solve(A_.transpose() * inv_s2.asDiagonal());  // d x m
    t_.setZero(d);
    eps_.setZero(m);
    r_.setZero(m);
  }

  void reset(const Eigen::VectorXd& t) {
    t_ = t;
    r_ = A_ * t_;
  }

  const Eigen::VectorXd& factor() const { return t_; }

  void sweep(Rng& rng, bool interweave = true) {
    const auto m = gamma_.size();
    const auto d = t_.size();
    const double inf = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) eps_(i) = std_truncnorm((-gamma_(i) - r_(i)) / s_(i), inf, rng);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double pjj = P_(j, j);
      const double mu = -(P_.row(j).dot(t_) - pjj * t_(j)) / pjj;
      const double sd = 1.0 / std::sqrt(pjj);
      double lo = -inf;
      double hi = inf;
      for (Eigen::Index i = 0; i < m; ++i) {
        const double a = A_(i, j);
        if (a == 0.0) continue;
        const double c = -gamma_(i) - s_(i) * eps_(i) - (r_(i) - a * t_(j));
        const double bound = c / a;
        if (a > 0.0) {
          lo = std::fmax(lo, bound);
        } else {
          hi = std::fmin(hi, bound);
        }
      }
      double tj;
      const double zl = (lo - mu) / sd;
      const double zh = (hi - mu) / sd;
      if (zl < zh) {
        tj = mu + sd * std_truncnorm(zl, zh, rng);
      } else if (lo - hi > 1e-9 * (1.0 + std::fabs(lo))) {
        throw InfeasibleTruncation("sun_sample_md: truncation region is numerically empty");
      } else {
        tj = 0.5 * (lo + hi);
      }
      r_ += A_.col(j) * (tj - t_(j));
      t_(j) = tj;
    }
    if (interweave) {
      const Eigen::VectorXd v0 = latent();
      Eigen::VectorXd z(d);
      for (Eigen::Index j = 0; j < d; ++j) z(j) = std_normal(rng);
      t_ = B_ * v0 + Q_llt_.matrixU().solve(z);
      r_ = A_ * t_;
      eps_ = (v0 - r_).cwiseQuotient(s_);
    }
  }

  Eigen::VectorXd latent() const { return r_ + s_.cwiseProduct(eps_); }

  /// Delta' Gamma^{-1} V0 + V1 with V1 ~ N_d(0, Omega - Delta' Gamma^{-1} Delta).
  Eigen::VectorXd project(Rng& rng) const {
    Eigen::VectorXd z(t_.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = std_normal(rng);
    return B_ * latent() + Q_llt_.matrixU().solve(z);
  }

 private:
  Eigen::VectorXd gamma_;
  Eigen::MatrixXd A_;
  Eigen::VectorXd s_;
  Eigen::MatrixXd P_;
  Eigen::LLT<Eigen::MatrixXd> Q_llt_;
  Eigen::MatrixXd B_;
  Eigen::VectorXd t_;
  Eigen::VectorXd eps_;
  Eigen::VectorXd r_;
};

/// Persistent multivariate SUN sampler (factor form, any d).
class SunSamplerMd {
 public:
  explicit SunSamplerMd(const SunParams& s, LtnKernelOptions opt = {})
      : xi_(s.xi), omega_(s.omega), opt_(opt), kernel_(s) {}

  void start_at(const Eigen::VectorXd& y) { kernel_.reset((y - xi_).cwiseQuotient(omega_)); }

  Eigen::VectorXd draw(Rng& rng) {
    for (int i = 0; i < opt_.sweeps; ++i) kernel_.sweep(rng, opt_.interweave);
    return xi_ + omega_.cwiseProduct(kernel_.project(rng));
  }

 private:
  Eigen::VectorXd xi_;
  Eigen::VectorXd omega_;
  LtnKernelOptions opt_;
  FactorLtnSampler kernel_;
};

inline Eigen::VectorXd sun_sample_md(const SunParams& s, int n_sweeps, Rng& rng, bool interweave = true) {
  SunSamplerMd sampler(s, LtnKernelOptions{n_sweeps, interweave});
  sampler.start_at(s.xi);
  return sampler.draw(rng);
}

}  // namespace skewbayes
