// Random streams and the basic variate generators used by every sampler.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The transforms to uniform, normal and gamma variates are written
// out here rather than taken from <random>, because the distribution classes
// in the standard library are implementation-defined and would break
// bit-identical reproducibility across toolchains.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace skewbayes {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent per-replicate seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of stream `index` derived from `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

/// Uniform on the open interval (0, 1), 53 bits of resolution.
inline double uniform01(Rng& rng) {
  for (;;) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (u > 0.0) return u;
  }
}

/// Standard normal by the Marsaglia polar method. The spare variate is
/// discarded so the stream state fully determines the next draw.
inline double std_normal(Rng& rng) {
  for (;;) {
    const double u = 2.0 * uniform01(rng) - 1.0;
    const double v = 2.0 * uniform01(rng) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

inline double exponential(Rng& rng) { return -std::log(uniform01(rng)); }

/// Gamma(shape, rate = 1) by Marsaglia and Tsang's squeeze method. Shapes
/// below one use the boost G(a) = G(a + 1) * U^(1/a).
inline double gamma_variate(Rng& rng, double shape) {
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw std::invalid_argument("gamma_variate: shape must be positive and finite");
  }
  if (shape < 1.0) {
    const double g = gamma_variate(rng, shape + 1.0);
    return g * std::pow(uniform01(rng), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = std_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform01(rng);
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

/// Gamma with the given shape and rate.
inline double gamma_variate(Rng& rng, double shape, double rate) {
  if (!(rate > 0.0)) throw std::invalid_argument("gamma_variate: rate must be positive");
  return gamma_variate(rng, shape) / rate;
}

}  // namespace skewbayes
