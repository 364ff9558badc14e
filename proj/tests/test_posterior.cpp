#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "skewbayes/ltn.hpp"
#include "skewbayes/posterior.hpp"
#include "skewbayes/sun.hpp"

using namespace skewbayes;

namespace {

std::vector<double> normal_sample(std::size_t n, Rng& rng, double shift = 0.0) {
  std::vector<double> y(n);
  for (auto& v : y) v = std_normal(rng) + shift;
  return y;
}

// max - min of sun_logpdf - log_posterior_unnorm over 101 points on [c-5, c+5].
double proportionality_spread(const ShapePrior& prior, const std::vector<double>& y) {
  const auto s = build_posterior(prior, y);
  SunDensity dens(s, 1u << 14);
  const double c = posterior_mode(prior, y).mode;
  double lo = INFINITY, hi = -INFINITY;
  for (int k = 0; k <= 100; ++k) {
    const double a = c - 5.0 + 0.1 * k;
    const double diff = dens(Eigen::VectorXd::Constant(1, a)).value - log_posterior_unnorm(prior, y, a);
    lo = std::min(lo, diff);
    hi = std::max(hi, diff);
  }
  return hi - lo;
}

oracle::Moments1d quadrature(const ShapePrior& prior, const std::vector<double>& y) {
  return oracle::quadrature_moments([&](double a) { return log_posterior_unnorm(prior, y, a); }, -60.0, 60.0,
                                    60001);
}

}  // namespace

TEST(BuildPi1, SinglePointExample) {
  const auto s = build_posterior_pi1(ShapePrior::normal(0.0, 1.0), std::vector<double>{1.0});
  EXPECT_NEAR(s.Delta(0, 0), 0.7071068, 1e-7);
  EXPECT_EQ(s.gamma(0), 0.0);
  EXPECT_NEAR(s.gamma_matrix()(0, 0), 1.0, 1e-15);
  EXPECT_EQ(s.xi(0), 0.0);
  EXPECT_EQ(s.omega(0), 1.0);
  EXPECT_TRUE(s.factor_form());
}

TEST(BuildPi1, ZeroDataCollapsesToPrior) {
  const auto prior = ShapePrior::normal(1.5, 2.0);
  const std::vector<double> y(6, 0.0);
  const auto s = build_posterior_pi1(prior, y);
  EXPECT_TRUE(s.Delta.isZero(0.0));
  for (double a : {-3.0, 0.0, 1.5, 4.0}) {
    EXPECT_NEAR(sun_logpdf(s, Eigen::VectorXd::Constant(1, a)).value, norm_logpdf((a - 1.5) / 2.0) - std::log(2.0),
                1e-12);
  }
  Rng rng(1);
  std::vector<double> x(10000);
  for (auto& v : x) v = sun_sample_d1(s, 5, rng);
  EXPECT_LT(oracle::ks_one_sample(x, [](double v) { return oracle::phi_cdf((v - 1.5) / 2.0); }),
            oracle::ks_crit_one(x.size()));
}

TEST(BuildPi1, GridProportionality) {
  Rng rng(2);
  const auto y = normal_sample(10, rng, 0.3);
  EXPECT_LT(proportionality_spread(ShapePrior::normal(0.0, 1.0), y), 1e-8);
  EXPECT_LT(proportionality_spread(ShapePrior::normal(-1.0, 5.0), y), 1e-8);
}

TEST(BuildPi1, EmptySampleRejected) {
  EXPECT_THROW(build_posterior_pi1(ShapePrior::normal(0, 1), std::vector<double>{}), std::invalid_argument);
}

TEST(BuildPi2, SinglePointExample) {
  const auto s = build_posterior_pi2(ShapePrior::skew_normal(0.0, 1.0, 1.0), std::vector<double>{1.0});
  ASSERT_EQ(s.m(), 2);
  EXPECT_NEAR(s.Delta(0, 0), 0.7071068, 1e-7);
  EXPECT_NEAR(s.Delta(1, 0), 0.7071068, 1e-7);
  EXPECT_EQ(s.gamma(0), 0.0);
  EXPECT_EQ(s.gamma(1), 0.0);
  const Eigen::MatrixXd g = s.gamma_matrix();
  EXPECT_NEAR(g(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(g(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(g(1, 1), 1.0, 1e-15);
}

TEST(BuildPi2, LocationEnteringGamma) {
  // gamma_i = delta_i alpha0 / psi0 on the data rows, 0 on the prior row.
  const auto prior = ShapePrior::skew_normal(2.0, 4.0, -3.0);
  const std::vector<double> y{0.5, -1.2};
  const auto s = build_posterior_pi2(prior, y);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(s.gamma(i), s.Delta(i, 0) * 2.0 / 4.0, 1e-15);
  EXPECT_EQ(s.gamma(2), 0.0);
  EXPECT_NEAR(s.Delta(2, 0), -3.0 / std::sqrt(10.0), 1e-15);
}

TEST(BuildPi2, ZeroLambdaMatchesPi1) {
  Rng rng(3);
  const auto y = normal_sample(8, rng, 0.5);
  const auto s1 = build_posterior_pi1(ShapePrior::normal(0.3, 2.0), y);
  const auto s2 = build_posterior_pi2(ShapePrior::skew_normal(0.3, 2.0, 0.0), y);
  ASSERT_EQ(s2.m(), s1.m() + 1);
  EXPECT_EQ(s2.Delta.topRows(8), s1.Delta);
  EXPECT_EQ(s2.gamma.head(8), s1.gamma);
  EXPECT_EQ(s2.Delta(8, 0), 0.0);
  Rng r1(4), r2(5);
  std::vector<double> a(10000), b(10000);
  for (auto& v : a) v = sun_sample_d1(s1, kDefaultSweeps, r1);
  for (auto& v : b) v = sun_sample_d1(s2, kDefaultSweeps, r2);
  EXPECT_LT(oracle::ks_two_sample(a, b), oracle::ks_crit_two(a.size(), b.size()));
}

TEST(BuildPi2, GridProportionality) {
  Rng rng(6);
  const auto y = normal_sample(10, rng, 0.4);
  EXPECT_LT(proportionality_spread(ShapePrior::skew_normal(0.0, 7.0, 20.0), y), 1e-8);
  EXPECT_LT(proportionality_spread(ShapePrior::skew_normal(0.0, 1.0, 3.0), y), 1e-8);
  EXPECT_LT(proportionality_spread(ShapePrior::skew_normal(1.0, 2.0, -4.0), y), 1e-8);
}

TEST(BuildMv, OneDimensionalReductions) {
  Rng rng(7);
  const auto y = normal_sample(6, rng);
  Eigen::MatrixXd ym(6, 1);
  for (int i = 0; i < 6; ++i) ym(i, 0) = y[static_cast<std::size_t>(i)];

  const auto p2 = ShapePrior::skew_normal(0.5, 2.0, 3.0);
  const auto a = build_posterior_mv(MvShapePrior{{p2}}, ym);
  const auto b = build_posterior_pi2(p2, y);
  EXPECT_TRUE(a.Delta.isApprox(b.Delta, 1e-15));
  EXPECT_TRUE(a.gamma.isApprox(b.gamma, 1e-15));
  EXPECT_EQ(a.xi, b.xi);
  EXPECT_EQ(a.omega, b.omega);

  const auto p1 = ShapePrior::normal(0.5, 2.0);
  const auto c = build_posterior_mv(MvShapePrior{{p1}}, ym);
  const auto d = build_posterior_pi1(p1, y);
  EXPECT_TRUE(c.Delta.isApprox(d.Delta, 1e-15));
  EXPECT_TRUE(c.gamma.isApprox(d.gamma, 1e-15));
}

TEST(BuildMv, BivariateGridProportionality) {
  Rng rng(8);
  Eigen::MatrixXd y(5, 2);
  for (int i = 0; i < 5; ++i) {
    y(i, 0) = std_normal(rng);
    y(i, 1) = std_normal(rng) + 0.5;
  }
  const MvShapePrior prior{{ShapePrior::normal(0.0, 1.0), ShapePrior::skew_normal(0.0, 2.0, 3.0)}};
  const auto s = build_posterior_mv(prior, y);
  EXPECT_NO_THROW(s.validate());
  ASSERT_EQ(s.m(), 6);
  SunDensity dens(s, 1u << 14);
  double lo = INFINITY, hi = -INFINITY;
  for (int i = 0; i <= 20; ++i) {
    for (int j = 0; j <= 20; ++j) {
      const Eigen::Vector2d a(-5.0 + 0.5 * i, -4.0 + 0.5 * j);
      const double diff = dens(a).value - log_posterior_unnorm_mv(prior, y, a);
      lo = std::min(lo, diff);
      hi = std::max(hi, diff);
    }
  }
  EXPECT_LT(hi - lo, 1e-6);
}

TEST(BuildMv, WrongColumnsRejected) {
  const MvShapePrior prior{{ShapePrior::normal(0.0, 1.0), ShapePrior::normal(0.0, 1.0)}};
  EXPECT_THROW(build_posterior_mv(prior, Eigen::MatrixXd::Zero(3, 3)), std::invalid_argument);
}

TEST(Builders, ClampNearUnitDelta) {
  BuildDiagnostics diag;
  const auto s = build_posterior_pi1(ShapePrior::normal(0.0, 1e3), std::vector<double>{1e9, 0.5}, &diag);
  EXPECT_EQ(diag.clamped_rows, 1u);
  EXPECT_LT(std::fabs(s.Delta(0, 0)), 1.0);
  EXPECT_NO_THROW(rank1_precision(s.rank1()));
}

TEST(Builders, PermutationInvariance) {
  Rng rng(9);
  auto y = normal_sample(7, rng, 0.2);
  const auto prior = ShapePrior::skew_normal(0.5, 3.0, 2.0);
  const auto s = build_posterior(prior, y);
  std::vector<std::size_t> perm(7);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[1], perm[4]);
  std::vector<double> yp(7);
  for (std::size_t i = 0; i < 7; ++i) yp[i] = y[perm[i]];
  const auto t = build_posterior(prior, yp);
  for (std::size_t i = 0; i < 7; ++i) {
    const auto r = static_cast<Eigen::Index>(i), o = static_cast<Eigen::Index>(perm[i]);
    EXPECT_EQ(t.Delta(r, 0), s.Delta(o, 0));
    EXPECT_EQ(t.gamma(r), s.gamma(o));
  }
  EXPECT_EQ(t.Delta(7, 0), s.Delta(7, 0));
  for (double a : {-2.0, 0.1, 3.7}) {
    // Sums in a different order may differ in the last bits only.
    EXPECT_NEAR(log_posterior_unnorm(prior, y, a), log_posterior_unnorm(prior, yp, a), 1e-12);
  }
}

TEST(LogPosteriorUnnorm, ValueAtZero) {
  const auto prior = ShapePrior::skew_normal(1.0, 2.0, 5.0);
  const std::vector<double> y{0.3, -2.0, 1.4};
  EXPECT_NEAR(log_posterior_unnorm(prior, y, 0.0), prior.log_density(0.0) + 3.0 * std::log(0.5), 1e-14);
  EXPECT_NEAR(prior.log_density(0.0), sn_logpdf({1.0, 2.0, 5.0}, 0.0), 1e-14);
}

TEST(LogPosteriorUnnorm, MonotoneForPositiveDataAndFlatPrior) {
  const auto prior = ShapePrior::normal(0.0, 1e6);
  const std::vector<double> y{0.2, 1.0, 0.7, 2.2};
  // Beyond alpha y_i of about 38 every Phi term is 1 in double precision.
  double prev = -INFINITY;
  for (double a = -50.0; a <= 8.0; a += 0.5) {
    const double v = log_posterior_unnorm(prior, y, a);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(LogPosteriorUnnorm, FiniteFarInTheTail) {
  const std::vector<double> y{3.0, 4.0};
  EXPECT_TRUE(std::isfinite(log_posterior_unnorm(ShapePrior::normal(0, 1), y, -150.0)));
}

TEST(PosteriorMomentsMc, PriorOnly) {
  const auto s = build_posterior_pi1(ShapePrior::normal(1.0, 2.0), std::vector<double>(4, 0.0));
  Rng rng(10);
  const auto m = posterior_moments_mc(s, 20000, rng);
  EXPECT_NEAR(m.mean, 1.0, 3.0 * m.mc_se);
  EXPECT_NEAR(m.variance, 4.0, 0.15);
}

TEST(PosteriorMomentsMc, MatchesQuadrature) {
  Rng drng(11);
  for (const auto& prior : {ShapePrior::normal(0.0, 1.0), ShapePrior::skew_normal(0.0, 1.0, 3.0),
                            ShapePrior::skew_normal(0.0, 7.0, 20.0)}) {
    const auto y = normal_sample(10, drng, 0.3);
    const auto q = quadrature(prior, y);
    Rng rng(12);
    const auto m = posterior_moments_mc(build_posterior(prior, y), 20000, rng);
    EXPECT_NEAR(m.mean, q.mean, 3.0 * m.mc_se);
  }
}

TEST(PosteriorMomentsMc, SymmetricData) {
  Rng drng(13);
  auto y = normal_sample(10, drng, 0.5);
  std::vector<double> ny(y.size());
  std::transform(y.begin(), y.end(), ny.begin(), [](double v) { return -v; });
  const auto prior = ShapePrior::normal(0.0, 2.0);
  Rng r1(14), r2(15);
  const auto a = posterior_moments_mc(build_posterior(prior, y), 20000, r1);
  const auto b = posterior_moments_mc(build_posterior(prior, ny), 20000, r2);
  EXPECT_NEAR(a.mean + b.mean, 0.0, 3.0 * std::sqrt(2.0) * std::max(a.mc_se, b.mc_se));
}

TEST(PosteriorMomentsMc, RejectsTinyRuns) {
  const auto s = build_posterior_pi1(ShapePrior::normal(0, 1), std::vector<double>{1.0});
  Rng rng(16);
  EXPECT_THROW(posterior_moments_mc(s, 10, rng), std::invalid_argument);
}

TEST(PosteriorMode, ZeroDataGivesPriorMode) {
  const auto r = posterior_mode(ShapePrior::normal(0.0, 1.0), std::vector<double>(5, 0.0));
  EXPECT_NEAR(r.mode, 0.0, 1e-6);
  EXPECT_FALSE(r.at_edge);
}

TEST(PosteriorMode, AllPositiveFlatPriorHitsEdge) {
  // With small positive observations the likelihood slope at the bracket
  // edge, 0.01 phi(2), still dwarfs the prior slope 200 / psi0^2.
  const auto r = posterior_mode(ShapePrior::normal(0.0, 1e6), std::vector<double>{0.01, 0.3, 0.05, 1.1});
  EXPECT_TRUE(r.at_edge);
  EXPECT_GT(r.mode, 199.0);
}

TEST(PosteriorMode, MatchesGridArgmax) {
  Rng rng(17);
  const auto y = sn_sample({0.0, 1.0, 1.5}, 50, rng);
  const auto prior = ShapePrior::skew_normal(0.0, 1.0, 3.0);
  const auto r = posterior_mode(prior, y);
  double best = -INFINITY, arg = 0.0;
  for (int k = 0; k <= 2000; ++k) {
    const double a = r.mode - 1.0 + 0.001 * k;
    const double v = log_posterior_unnorm(prior, y, a);
    if (v > best) {
      best = v;
      arg = a;
    }
  }
  EXPECT_NEAR(r.mode, arg, 1e-3);
  const auto q = quadrature(prior, y);
  EXPECT_NEAR(r.mode, q.mode, 2e-3);
}

TEST(ShapePrior, Validation) {
  EXPECT_THROW(ShapePrior::normal(0.0, 0.0).validate(), std::invalid_argument);
  EXPECT_THROW(ShapePrior::skew_normal(0.0, -1.0, 2.0).validate(), std::invalid_argument);
  EXPECT_THROW(ShapePrior::normal(NAN, 1.0).validate(), std::invalid_argument);
}
