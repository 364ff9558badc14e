// Chain summaries: Geweke z-scores, quantiles, and pointwise density bands.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "skewbayes/distributions.hpp"

namespace skewbayes {

/// Linear-interpolation quantile (type 7) of an unsorted sample.
inline double quantile(std::vector<double> x, double p) {
  if (x.empty()) throw std::invalid_argument("quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile: p outside [0, 1]");
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(lo), x.end());
  const double a = x[lo];
  if (lo + 1 >= x.size()) return a;
  const double b = *std::min_element(x.begin() + static_cast<std::ptrdiff_t>(lo) + 1, x.end());
  return a + (h - static_cast<double>(lo)) * (b - a);
}

namespace detail {

struct SegmentStats {
  double mean = 0.0;
  double var_of_mean = 0.0;
};

inline SegmentStats batch_means(const double* x, std::size_t n, std::size_t batches) {
  const std::size_t per = n / batches;
  SegmentStats s;
  std::vector<double> bm(batches, 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t i = 0; i < per; ++i) bm[b] += x[b * per + i];
    bm[b] /= static_cast<double>(per);
  }
  for (double v : bm) s.mean += v;
  s.mean /= static_cast<double>(batches);
  double ss = 0.0;
  for (double v : bm) ss += (v - s.mean) * (v - s.mean);
  s.var_of_mean = ss / static_cast<double>(batches - 1) / static_cast<double>(batches);
  return s;
}

}  // namespace detail

inline constexpr std::size_t kGewekeBatches = 20;

/// Geweke's convergence z-score: mean of the first `frac_a` of the chain
/// against the mean of the last `frac_b`, each variance from batch means.
inline double geweke_z(const std::vector<double>& chain, double frac_a = 0.1, double frac_b = 0.5) {
  if (!(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b <= 1.0)) {
    throw std::invalid_argument("geweke_z: fractions must be positive and sum to at most 1");
  }
  const auto na = static_cast<std::size_t>(frac_a * static_cast<double>(chain.size()));
  const auto nb = static_cast<std::size_t>(frac_b * static_cast<double>(chain.size()));
  if (na < 2 * kGewekeBatches || nb < 2 * kGewekeBatches) {
    throw std::invalid_argument("geweke_z: chain too short for 20 batches per segment");
  }
  const auto a = detail::batch_means(chain.data(), na, kGewekeBatches);
  const auto b = detail::batch_means(chain.data() + chain.size() - nb, nb, kGewekeBatches);
  const double v = a.var_of_mean + b.var_of_mean;
  if (v == 0.0) return a.mean == b.mean ? 0.0 : std::copysign(INFINITY, a.mean - b.mean);
  return (a.mean - b.mean) / std::sqrt(v);
}

struct Interval {
  double mean = 0.0;
  double lo = 0.0;  // 2.5%
  double hi = 0.0;  // 97.5%
};

inline Interval summarize_values(const std::vector<double>& x) {
  if (x.empty()) throw std::invalid_argument("summarize: empty chain");
  Interval out;
  for (double v : x) out.mean += v;
  out.mean /= static_cast<double>(x.size());
  out.lo = quantile(x, 0.025);
  out.hi = quantile(x, 0.975);
  return out;
}

struct DensityBands {
  std::vector<double> grid;
  std::vector<double> mean;
  std::vector<double> lo95;
  std::vector<double> hi95;
};

/// Pointwise posterior mean and 2.5/97.5 percentiles of the SN density over
/// the draws.
inline DensityBands density_bands(const std::vector<SkewNormalParams>& draws, const std::vector<double>& grid) {
  if (draws.empty()) throw std::invalid_argument("density_bands: no draws");
  DensityBands out;
  out.grid = grid;
  out.mean.resize(grid.size());
  out.lo95.resize(grid.size());
  out.hi95.resize(grid.size());
  std::vector<double> col(draws.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double sum = 0.0;
    for (std::size_t k = 0; k < draws.size(); ++k) {
      col[k] = sn_pdf(draws[k], grid[g]);
      sum += col[k];
    }
    out.mean[g] = sum / static_cast<double>(draws.size());
    out.lo95[g] = quantile(col, 0.025);
    out.hi95[g] = quantile(col, 0.975);
  }
  return out;
}

}  // namespace skewbayes
