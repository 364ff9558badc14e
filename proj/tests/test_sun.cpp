#include <array>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "skewbayes/ltn.hpp"
#include "skewbayes/posterior.hpp"
#include "skewbayes/sun.hpp"

using namespace skewbayes;

namespace {

SunParams univariate(double xi, double omega, const Eigen::VectorXd& delta, const Eigen::VectorXd& gamma) {
  SunParams s;
  s.xi = Eigen::VectorXd::Constant(1, xi);
  s.omega = Eigen::VectorXd::Constant(1, omega);
  s.Omega = Eigen::MatrixXd::Identity(1, 1);
  s.Delta = delta;
  s.gamma = gamma;
  return s;
}

Eigen::VectorXd random_delta(Eigen::Index m, Rng& rng, double cap = 0.999) {
  Eigen::VectorXd d(m);
  for (Eigen::Index i = 0; i < m; ++i) d(i) = cap * (2.0 * uniform01(rng) - 1.0);
  return d;
}

std::vector<double> normal_sample(std::size_t n, Rng& rng) {
  std::vector<double> y(n);
  for (auto& v : y) v = std_normal(rng);
  return y;
}

}  // namespace

TEST(Rank1Precision, IdentityForZeroDelta) {
  const auto p = rank1_precision({Eigen::VectorXd::Zero(1)});
  EXPECT_EQ(p(0, 0), 1.0);
}

TEST(Rank1Precision, TwoByTwoAgainstDirectInverse) {
  const Rank1Correlation c{Eigen::Vector2d(0.6, 0.8)};
  const Eigen::MatrixXd g = c.matrix();
  EXPECT_NEAR(g(0, 1), 0.48, 1e-15);
  const auto p = rank1_precision(c);
  // 1/(1 - 0.48^2) and -0.48/(1 - 0.48^2)
  EXPECT_NEAR(p(0, 0), 1.2993762993762994, 1e-12);
  EXPECT_NEAR(p(1, 1), 1.2993762993762994, 1e-12);
  EXPECT_NEAR(p(0, 1), -0.6237006237006237, 1e-12);
  EXPECT_NEAR(p(1, 0), -0.6237006237006237, 1e-12);
}

TEST(Rank1Precision, ProductWithGammaIsIdentity) {
  Rng rng(1);
  for (Eigen::Index m : {1, 2, 10, 50, 200}) {
    for (int rep = 0; rep < 10; ++rep) {
      const Rank1Correlation c{random_delta(m, rng)};
      const Eigen::MatrixXd e = rank1_precision(c) * c.matrix() - Eigen::MatrixXd::Identity(m, m);
      EXPECT_LT(e.cwiseAbs().rowwise().sum().maxCoeff(), 1e-10) << "m=" << m;
    }
  }
}

TEST(Rank1Solve, InvertsGammaTimesVector) {
  Rng rng(2);
  for (Eigen::Index m : {1, 3, 40, 200}) {
    const Rank1Correlation c{random_delta(m, rng)};
    Eigen::VectorXd v(m);
    for (auto& x : v) x = std_normal(rng);
    const Eigen::VectorXd x = rank1_solve(c, v);
    EXPECT_LT((c.matrix() * x - v).cwiseAbs().maxCoeff(), 1e-10) << "m=" << m;
  }
  EXPECT_THROW(rank1_solve({Eigen::Vector2d(0.5, 0.5)}, Eigen::Vector3d::Zero()), std::invalid_argument);
}

TEST(Rank1Precision, RejectsNearUnitDelta) {
  EXPECT_THROW(rank1_precision({Eigen::Vector2d(0.5, 1.0 - 1e-13)}), NearSingularCorrelation);
  EXPECT_THROW(rank1_precision({Eigen::Vector2d(-1.0, 0.0)}), NearSingularCorrelation);
}

TEST(SunParams, ValidationCatchesBadInputs) {
  auto s = univariate(0, 1, Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d::Zero());
  EXPECT_NO_THROW(s.validate());
  auto bad = s;
  bad.omega(0) = -1.0;
  EXPECT_THROW(bad.validate(), InvalidSunParams);
  bad = s;
  bad.Gamma = Eigen::Matrix2d::Identity();  // Gamma - Delta Delta' has negative determinant
  bad.Delta = Eigen::Vector2d(0.9, 0.9);
  EXPECT_THROW(bad.validate(), InvalidSunParams);
  bad = s;
  bad.gamma = Eigen::Vector3d::Zero();
  EXPECT_THROW(bad.validate(), InvalidSunParams);
}

TEST(MvnCdf, BivariateOrthantClosedForm) {
  for (double rho : {-0.9, -0.3, 0.0, 0.5, 0.95}) {
    Eigen::Matrix2d c;
    c << 1, rho, rho, 1;
    const auto r = mvn_cdf_qmc(Eigen::Vector2d::Zero(), c);
    // Documented accuracy: 1e-6 relative at three standard errors.
    const double truth = 0.25 + std::asin(rho) / (2 * M_PI);
    EXPECT_NEAR(std::exp(r.log_value), truth, 2e-6 * truth) << "rho=" << rho;
    EXPECT_LE(r.abs_error, 1e-6 * truth * 1.0000001);
    EXPECT_TRUE(r.converged);
  }
}

TEST(MvnCdf, AgreesWithRank1Quadrature) {
  Rng rng(2);
  for (int rep = 0; rep < 5; ++rep) {
    const Rank1Correlation c{random_delta(6, rng, 0.95)};
    Eigen::VectorXd u(6);
    for (int i = 0; i < 6; ++i) u(i) = 2.0 * std_normal(rng);
    const auto q = mvn_cdf_qmc(u, c.matrix());
    EXPECT_NEAR(q.log_value, log_mvn_cdf_rank1(u, c), 1e-5);
  }
}

TEST(MvnCdf, DeterministicResult) {
  const Rank1Correlation c{Eigen::Vector3d(0.3, -0.5, 0.7)};
  const Eigen::Vector3d u(0.2, 1.0, -0.4);
  EXPECT_EQ(mvn_cdf_qmc(u, c.matrix()).log_value, mvn_cdf_qmc(u, c.matrix()).log_value);
}

TEST(SunLogpdf, ReducesToSkewNormal) {
  for (double d : {-0.9, -0.2, 0.0, 0.5, 0.99}) {
    const auto s = univariate(0, 1, Eigen::VectorXd::Constant(1, d), Eigen::VectorXd::Zero(1));
    for (double z : {-2.0, -0.3, 0.0, 1.1, 3.0}) {
      EXPECT_NEAR(sun_logpdf(s, Eigen::VectorXd::Constant(1, z)).value,
                  sn_logpdf({0, 1, d / std::sqrt(1 - d * d)}, z), 1e-8);
    }
  }
}

TEST(SunLogpdf, ZeroDeltaIsNormal) {
  SunParams s;
  s.xi = Eigen::Vector2d(1.0, -1.0);
  s.omega = Eigen::Vector2d(2.0, 0.5);
  s.Omega = Eigen::Matrix2d::Identity();
  s.Omega(0, 1) = s.Omega(1, 0) = 0.3;
  s.Delta = Eigen::MatrixXd::Zero(3, 2);
  s.gamma = Eigen::Vector3d(0.4, -1.0, 2.0);
  const Eigen::Vector2d z(0.5, -0.7);
  Eigen::Matrix2d S = s.omega.asDiagonal() * s.Omega * s.omega.asDiagonal();
  const Eigen::Vector2d r = z - s.xi;
  const double expect = -0.5 * r.dot(S.inverse() * r) - 0.5 * std::log(S.determinant()) - std::log(2 * M_PI);
  EXPECT_NEAR(sun_logpdf(s, z).value, expect, 1e-10);
}

TEST(SunLogpdf, PosteriorShapedProportional) {
  const std::vector<double> y{0.8, -1.3};
  const auto prior = ShapePrior::normal(0.5, 2.0);
  const auto s = build_posterior_pi1(prior, y);
  SunDensity dens(s);
  double lo = INFINITY, hi = -INFINITY;
  for (int k = 0; k <= 100; ++k) {
    const double a = -6.0 + 0.12 * k;
    const double diff = dens(Eigen::VectorXd::Constant(1, a)).value - log_posterior_unnorm(prior, y, a);
    lo = std::min(lo, diff);
    hi = std::max(hi, diff);
  }
  EXPECT_LT(hi - lo, 1e-8);
}

TEST(SunLogpdf, GeneralGammaUsesQmcNumerator) {
  // Non-factor Gamma: Gamma = [[1, .2], [.2, 1]], Delta = (0.3, 0.4).
  SunParams s = univariate(0, 1, Eigen::Vector2d(0.3, 0.4), Eigen::Vector2d(0.1, -0.2));
  Eigen::Matrix2d G;
  G << 1, 0.2, 0.2, 1;
  s.Gamma = G;
  // Normalization on a grid.
  SunDensity dens(s, 1u << 16);
  double total = 0.0;
  const double h = 0.02;
  for (double z = -8; z <= 8; z += h) total += std::exp(dens(Eigen::VectorXd::Constant(1, z)).value) * h;
  EXPECT_NEAR(total, 1.0, 1e-5);
}

TEST(SunLogpdf, DimensionLimits) {
  auto s = univariate(0, 1, Eigen::VectorXd::Constant(40, 0.1), Eigen::VectorXd::Zero(40));
  EXPECT_THROW(sun_logpdf(s, Eigen::VectorXd::Zero(1)), std::invalid_argument);
}

TEST(LtnRank1, IndependentCaseMatchesTruncatedMeans) {
  Rng rng(3);
  const Rank1Correlation c{Eigen::VectorXd::Zero(3)};
  const Eigen::Vector3d gamma(0.0, -1.0, 2.0);
  Rank1LtnSampler k(c, gamma);
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    k.sweep(rng);
    const Eigen::VectorXd v = k.latent();
    for (int j = 0; j < 3; ++j) ASSERT_GT(v(j), -gamma(j));
    sum += v;
  }
  for (int j = 0; j < 3; ++j) {
    const double m = truncnorm_mean(0.0, 1.0, -gamma(j));
    // Independent coordinates: consecutive draws are independent.
    EXPECT_NEAR(sum(j) / n, m, 3.0 * 1.0 / std::sqrt(n));
  }
}

TEST(LtnRank1, RejectionOracleM2) {
  const Rank1Correlation c{Eigen::Vector2d(0.5, 0.5)};
  const Eigen::Vector2d gamma = Eigen::Vector2d::Zero();
  // Rejection oracle: N(0, Gamma) draws kept when both coordinates exceed 0.
  Rng orng(4);
  const Eigen::MatrixXd G = c.matrix();
  const Eigen::Matrix2d L = G.llt().matrixL();
  std::vector<double> r1, r2, r11;
  while (r1.size() < 100000) {
    const Eigen::Vector2d v = L * Eigen::Vector2d(std_normal(orng), std_normal(orng));
    if (v(0) > 0 && v(1) > 0) {
      r1.push_back(v(0));
      r2.push_back(v(1));
      r11.push_back(v(0) * v(1));
    }
  }
  Rng rng(5);
  std::vector<double> s1, s2, s11;
  for (int i = 0; i < 100000; ++i) {
    const Eigen::VectorXd v = ltn_sample_rank1(c, gamma, 10, rng);
    s1.push_back(v(0));
    s2.push_back(v(1));
    s11.push_back(v(0) * v(1));
  }
  auto close = [](const std::vector<double>& a, const std::vector<double>& b) {
    const double se = std::sqrt(oracle::variance(a) / a.size() + oracle::variance(b) / b.size());
    EXPECT_NEAR(oracle::mean(a), oracle::mean(b), 3.0 * se);
  };
  close(s1, r1);
  close(s2, r2);
  close(s11, r11);
  std::vector<double> q1, q2;
  for (double v : s1) q1.push_back(v * v);
  for (double v : r1) q2.push_back(v * v);
  close(q1, q2);
}

TEST(LtnRank1, InactiveTruncationIsUnconstrained) {
  const Rank1Correlation c{Eigen::Vector3d(0.6, -0.3, 0.8)};
  const Eigen::Vector3d gamma = Eigen::Vector3d::Constant(8.0);
  Rng rng(6);
  const int n = 100000;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  double cross = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd v = ltn_sample_rank1(c, gamma, 2, rng);
    sum += v;
    cross += v(0) * v(2);
  }
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(sum(j) / n, 0.0, 3.0 / std::sqrt(n));
  // Var(v0 v2) = 1 + rho^2 for a standard bivariate normal with rho = 0.48.
  EXPECT_NEAR(cross / n, 0.48, 3.0 * std::sqrt((1 + 0.48 * 0.48) / n));
}

TEST(LtnRank1, GelmanRubinFromDispersedStarts) {
  Rng data_rng(7);
  const auto y = normal_sample(20, data_rng);
  const auto s = build_posterior_pi1(ShapePrior::normal(0.0, 3.0), y);
  const auto c = s.rank1();
  std::vector<std::vector<double>> chains;
  for (double w0 : {-8.0, 8.0}) {
    Rng rng(static_cast<std::uint64_t>(100 + w0));
    Rank1LtnSampler k(c, s.gamma);
    k.reset(w0);
    for (int i = 0; i < 200; ++i) k.sweep(rng);
    std::vector<double> trace;
    for (int i = 0; i < 2000; ++i) {
      k.sweep(rng);
      trace.push_back(k.latent()(0));
    }
    chains.push_back(trace);
  }
  EXPECT_LT(oracle::gelman_rubin(chains), 1.05);
}

TEST(LtnRank1, InfeasibleStartStillSatisfiesConstraints) {
  const Rank1Correlation c{Eigen::Vector2d(0.9, -0.9)};
  const Eigen::Vector2d gamma(-3.0, -3.0);  // both coordinates must exceed 3
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXd v = ltn_sample_rank1(c, gamma, 5, rng);
    ASSERT_GT(v(0), 3.0);
    ASSERT_GT(v(1), 3.0);
  }
}

TEST(SunSampleD1, SingleRowIsSkewNormal) {
  const double d = 0.8;
  const auto s = univariate(1.0, 2.0, Eigen::VectorXd::Constant(1, d), Eigen::VectorXd::Zero(1));
  Rng rng(9);
  std::vector<double> x(10000);
  for (auto& v : x) v = sun_sample_d1(s, kDefaultSweeps, rng);
  const double a = d / std::sqrt(1 - d * d);
  const double ks = oracle::ks_one_sample(x, [&](double v) { return oracle::sn_cdf_owen(1.0, 2.0, a, v); });
  EXPECT_LT(ks, oracle::ks_crit_one(x.size()));
}

TEST(SunSampleD1, ZeroDeltaIsNormal) {
  const auto s = univariate(-1.0, 0.5, Eigen::VectorXd::Zero(4), Eigen::Vector4d(3.0, -2.0, 0.0, 1.0));
  Rng rng(10);
  std::vector<double> x(10000);
  for (auto& v : x) v = sun_sample_d1(s, 5, rng);
  const double ks = oracle::ks_one_sample(x, [](double v) { return oracle::phi_cdf((v + 1.0) / 0.5); });
  EXPECT_LT(ks, oracle::ks_crit_one(x.size()));
}

TEST(SunSampleD1, PosteriorMatchesQuadrature) {
  Rng data_rng(11);
  for (const auto& prior : {ShapePrior::normal(0.0, 1.0), ShapePrior::skew_normal(0.0, 7.0, 20.0),
                            ShapePrior::normal(2.0, 4.0)}) {
    auto y = normal_sample(10, data_rng);
    for (auto& v : y) v += 0.4;
    const auto s = build_posterior(prior, y);
    const auto q = oracle::quadrature_moments([&](double a) { return log_posterior_unnorm(prior, y, a); },
                                              -40.0, 40.0, 40001);
    Rng rng(12);
    std::vector<double> x(20000);
    for (auto& v : x) v = sun_sample_d1(s, kDefaultSweeps, rng);
    const double sd = std::sqrt(oracle::variance(x));
    const double se_mean = sd / std::sqrt(x.size());
    EXPECT_NEAR(oracle::mean(x), q.mean, 3.0 * se_mean);
    // Sd of the sample sd for near-normal draws: sd / sqrt(2N).
    EXPECT_NEAR(sd, q.sd, 3.0 * sd / std::sqrt(2.0 * x.size()) * 1.2);
  }
}

TEST(SunSampleD1, PlainKernelAlsoTargetsPosterior) {
  Rng data_rng(13);
  auto y = normal_sample(10, data_rng);
  const auto prior = ShapePrior::normal(0.0, 2.0);
  const auto s = build_posterior(prior, y);
  const auto q = oracle::quadrature_moments([&](double a) { return log_posterior_unnorm(prior, y, a); }, -40.0,
                                            40.0, 40001);
  Rng rng(14);
  std::vector<double> x(20000);
  for (auto& v : x) v = sun_sample_d1(s, kDefaultSweeps, rng, false);
  EXPECT_NEAR(oracle::mean(x), q.mean, 3.0 * std::sqrt(oracle::variance(x) / x.size()));
}

TEST(SunSampleD1, DeterministicBySeed) {
  const auto s = build_posterior(ShapePrior::normal(0.0, 1.0), std::vector<double>{0.3, -0.2, 1.5});
  Rng a(15), b(15);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(sun_sample_d1(s, 10, a), sun_sample_d1(s, 10, b));
}

TEST(SunSampleMd, OneDimensionalAgreesWithD1) {
  Rng data_rng(16);
  const auto y = normal_sample(8, data_rng);
  const auto s = build_posterior(ShapePrior::skew_normal(0.5, 2.0, 3.0), y);
  Rng r1(17), r2(18);
  std::vector<double> a(10000), b(10000);
  for (auto& v : a) v = sun_sample_d1(s, kDefaultSweeps, r1);
  for (auto& v : b) v = sun_sample_md(s, kDefaultSweeps, r2)(0);
  EXPECT_LT(oracle::ks_two_sample(a, b), oracle::ks_crit_two(a.size(), b.size()));
}

TEST(SunSampleMd, ZeroDeltaIsNormal) {
  SunParams s;
  s.xi = Eigen::Vector2d(1.0, 2.0);
  s.omega = Eigen::Vector2d(1.5, 0.5);
  s.Omega = Eigen::Matrix2d::Identity();
  s.Omega(0, 1) = s.Omega(1, 0) = -0.4;
  s.Delta = Eigen::MatrixXd::Zero(3, 2);
  s.gamma = Eigen::Vector3d(0.0, 1.0, -1.0);
  Rng rng(19);
  const int n = 20000;
  std::vector<double> x0, x1, x01;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd v = sun_sample_md(s, 3, rng);
    x0.push_back(v(0));
    x1.push_back(v(1));
    x01.push_back((v(0) - 1.0) * (v(1) - 2.0));
  }
  EXPECT_LT(oracle::ks_one_sample(x0, [](double v) { return oracle::phi_cdf((v - 1.0) / 1.5); }),
            oracle::ks_crit_one(n));
  EXPECT_LT(oracle::ks_one_sample(x1, [](double v) { return oracle::phi_cdf((v - 2.0) / 0.5); }),
            oracle::ks_crit_one(n));
  // Cov = -0.4 * 1.5 * 0.5 = -0.3, sd of the product about 0.82.
  EXPECT_NEAR(oracle::mean(x01), -0.3, 3.0 * std::sqrt(oracle::variance(x01) / n));
}

TEST(SunSampleMd, BivariatePosteriorMatchesGrid) {
  Rng data_rng(20);
  Eigen::MatrixXd y(5, 2);
  for (int i = 0; i < 5; ++i) {
    y(i, 0) = std_normal(data_rng) + 0.5;
    y(i, 1) = std_normal(data_rng) - 0.3;
  }
  const MvShapePrior prior{{ShapePrior::normal(0.0, 1.5), ShapePrior::skew_normal(0.5, 2.0, 3.0)}};
  const auto s = build_posterior_mv(prior, y);
  // 2-d grid oracle.
  const double h = 0.02;
  double z = 0.0, m0 = 0.0, m1 = 0.0, peak = -INFINITY;
  std::vector<std::array<double, 3>> cells;
  for (double a = -10; a <= 10; a += h) {
    for (double b = -10; b <= 12; b += h) {
      const double lp = log_posterior_unnorm_mv(prior, y, Eigen::Vector2d(a, b));
      cells.push_back({a, b, lp});
      peak = std::max(peak, lp);
    }
  }
  for (const auto& c : cells) {
    const double w = std::exp(c[2] - peak);
    z += w;
    m0 += w * c[0];
    m1 += w * c[1];
  }
  m0 /= z;
  m1 /= z;
  Rng rng(21);
  std::vector<double> a0, a1;
  for (int i = 0; i < 20000; ++i) {
    const Eigen::VectorXd v = sun_sample_md(s, kDefaultSweeps, rng);
    a0.push_back(v(0));
    a1.push_back(v(1));
  }
  EXPECT_NEAR(oracle::mean(a0), m0, 3.0 * std::sqrt(oracle::variance(a0) / a0.size()));
  EXPECT_NEAR(oracle::mean(a1), m1, 3.0 * std::sqrt(oracle::variance(a1) / a1.size()));
}
