// Experiment plumbing behind the skewfit CLI: simulation studies, CSV
// ingestion, and deterministic JSON/CSV serialization.
#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "skewbayes/diagnostics.hpp"
#include "skewbayes/distributions.hpp"
#include "skewbayes/elicitation.hpp"
#include "skewbayes/gibbs.hpp"
#include "skewbayes/posterior.hpp"
#include "skewbayes/random.hpp"

namespace skewbayes::harness {

using Json = nlohmann::ordered_json;

/// Bad input data (as opposed to bad flags): unreadable or malformed files,
/// too few observations.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- formatting

/// 17 significant digits: reads back to the same double.
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

// ---------------------------------------------------------------- CSV input

/// One numeric column, optional header on the first line, blank lines
/// ignored. Errors name the source and the 1-based line.
inline std::vector<double> read_single_column(std::istream& in, const std::string& source) {
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view v = line;
    if (lineno == 1 && v.starts_with("\xEF\xBB\xBF")) v.remove_prefix(3);
    v = trim(v);
    if (v.empty()) continue;
    if (v.find(',') != std::string_view::npos) {
      throw DataError(source + ":" + std::to_string(lineno) + ": expected a single column");
    }
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = trim(v.substr(1, v.size() - 2));
    double x = 0.0;
    if (parse_double(v, x)) {
      out.push_back(x);
    } else if (lineno == 1) {
      continue;  // header
    } else {
      throw DataError(source + ":" + std::to_string(lineno) + ": not a finite number: '" + std::string(v) + "'");
    }
  }
  if (out.empty()) throw DataError(source + ": no observations");
  return out;
}

inline std::vector<double> read_single_column(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open");
  return read_single_column(in, path);
}

// ---------------------------------------------------------------- JSON echo

inline Json to_json(const SkewNormalParams& p) { return Json{{"xi", p.xi}, {"omega", p.omega}, {"alpha", p.alpha}}; }

inline Json to_json(const ShapePrior& p) {
  Json j{{"kind", p.is_skew() ? "skewnormal" : "normal"}, {"alpha0", p.alpha0}, {"psi0", p.psi0}};
  if (p.is_skew()) j["lambda0"] = p.lambda0;
  return j;
}

inline Json to_json(const NigPrior& p) {
  return Json{{"xi0", p.xi0}, {"kappa", p.kappa}, {"a", p.a}, {"b", p.b}};
}

inline Json to_json(const GibbsConfig& c) {
  return Json{{"iters", c.n_iter},
              {"burnin", c.burn_in},
              {"thin", c.thin},
              {"seed", c.seed},
              {"ltn_sweeps", c.ltn_sweeps},
              {"kernel", c.variant == KernelVariant::Derived ? "derived" : "printed"}};
}

inline Json to_json(const Interval& i) { return Json{{"mean", i.mean}, {"q025", i.lo}, {"q975", i.hi}}; }

// ---------------------------------------------------------------- simulation

enum class Estimand { PosteriorMean, PosteriorMode };

inline const char* estimand_name(Estimand e) { return e == Estimand::PosteriorMean ? "mean" : "mode"; }

struct ExperimentSpec {
  SkewNormalParams true_params{0.0, 1.0, 0.0};
  std::size_t n = 50;
  std::size_t replications = 1000;
  Estimand estimand = Estimand::PosteriorMean;
  ShapePrior prior = ShapePrior::normal(0.0, 1.0);
  bool fixed_loc_scale = true;  // known xi and omega; otherwise full Gibbs
  NigPrior nig{};               // full Gibbs only
  GibbsConfig gibbs{};          // full Gibbs only; the seed is replaced per replicate
  std::uint64_t seed = 1;
  std::size_t mc_draws = 4000;  // posterior-mean draws per replicate
  int mc_sweeps = 1;
  unsigned threads = 0;  // 0: hardware concurrency

  void validate() const {
    if (replications < 1) throw std::invalid_argument("ExperimentSpec: replications must be at least 1");
    if (n < 1) throw std::invalid_argument("ExperimentSpec: n must be at least 1");
    if (!(true_params.omega > 0.0) || !std::isfinite(true_params.xi) || !std::isfinite(true_params.alpha)) {
      throw std::invalid_argument("ExperimentSpec: invalid true parameters");
    }
    prior.validate();
    if (mc_draws < 50) throw std::invalid_argument("ExperimentSpec: mc_draws must be at least 50");
    if (mc_sweeps < 1) throw std::invalid_argument("ExperimentSpec: mc_sweeps must be at least 1");
    if (!fixed_loc_scale) {
      if (estimand == Estimand::PosteriorMode) {
        throw std::invalid_argument("ExperimentSpec: the mode estimand needs known location and scale");
      }
      if (n < kMinObservations) throw std::invalid_argument("ExperimentSpec: full Gibbs needs n >= 3");
      nig.validate();
      gibbs.validate();
    }
  }
};

struct ReplicateResult {
  double estimate = 0.0;
  bool edge = false;
};

/// Estimate of alpha for replicate r; depends only on (spec, r).
inline ReplicateResult run_replicate(const ExperimentSpec& spec, std::uint64_t r) {
  Rng rng(derive_seed(spec.seed, r));
  auto y = sn_sample(spec.true_params, spec.n, rng);
  ReplicateResult out;
  if (!spec.fixed_loc_scale) {
    GibbsConfig cfg = spec.gibbs;
    cfg.seed = rng();
    out.estimate = summarize_values(run_chain(y, spec.prior, spec.nig, cfg).alpha()).mean;
    return out;
  }
  for (auto& v : y) v = (v - spec.true_params.xi) / spec.true_params.omega;
  if (spec.estimand == Estimand::PosteriorMode) {
    const auto m = posterior_mode(spec.prior, y);
    out.estimate = m.mode;
    out.edge = m.at_edge;
  } else {
    const auto post = build_posterior(spec.prior, y);
    out.estimate = posterior_moments_mc(post, spec.mc_draws, rng, LtnKernelOptions{spec.mc_sweeps, true}).mean;
  }
  return out;
}

/// Runs fn(i) for i in [0, count) on a pool of worker threads.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i; !failed && (i = next.fetch_add(1)) < count;) {
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct SimulationRow {
  std::size_t n = 0;
  double alpha_true = 0.0;
  std::size_t replications = 0;
  double bias = 0.0;
  double mse = 0.0;
  double bias_se = 0.0;  // Monte Carlo standard error of the bias
  std::size_t edge_warnings = 0;
  std::vector<double> estimates;
};

/// Bias and MSE of the alpha estimand over seeded replicates. Replicates run
/// concurrently; the reduction is in replicate order.
inline SimulationRow cmd_simulate(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<ReplicateResult> results(spec.replications);
  parallel_for(spec.replications, spec.threads, [&](std::size_t r) { results[r] = run_replicate(spec, r); });
  SimulationRow row;
  row.n = spec.n;
  row.alpha_true = spec.true_params.alpha;
  row.replications = spec.replications;
  double sum = 0.0, sum2 = 0.0;
  for (const auto& res : results) {
    const double e = res.estimate - spec.true_params.alpha;
    sum += e;
    sum2 += e * e;
    row.estimates.push_back(res.estimate);
    if (res.edge) ++row.edge_warnings;
  }
  const auto k = static_cast<double>(spec.replications);
  row.bias = sum / k;
  row.mse = sum2 / k;
  row.bias_se = spec.replications > 1 ? std::sqrt(std::max(0.0, (sum2 - k * row.bias * row.bias) / (k - 1.0)) / k) : 0.0;
  return row;
}

inline const char* kSimHeader = "n,alpha_true,prior,alpha0,psi0,lambda0,estimand,reps,bias,mse,bias_se,edge_warnings";

inline void write_sim_row(std::ostream& out, const ExperimentSpec& spec, const SimulationRow& row) {
  out << row.n << ',' << format_double(row.alpha_true) << ',' << (spec.prior.is_skew() ? "skewnormal" : "normal") << ','
      << format_double(spec.prior.alpha0) << ',' << format_double(spec.prior.psi0) << ','
      << format_double(spec.prior.shape()) << ',' << estimand_name(spec.estimand) << ',' << row.replications << ','
      << format_double(row.bias) << ',' << format_double(row.mse) << ',' << format_double(row.bias_se) << ','
      << row.edge_warnings << '\n';
}

inline Json spec_to_json(const ExperimentSpec& spec) {
  Json j{{"true_params", to_json(spec.true_params)},
         {"replications", spec.replications},
         {"estimand", estimand_name(spec.estimand)},
         {"prior", to_json(spec.prior)},
         {"fixed_loc_scale", spec.fixed_loc_scale},
         {"seed", spec.seed}};
  if (spec.fixed_loc_scale) {
    if (spec.estimand == Estimand::PosteriorMean) {
      j["mc_draws"] = spec.mc_draws;
      j["mc_sweeps"] = spec.mc_sweeps;
    }
  } else {
    j["nig"] = to_json(spec.nig);
    j["gibbs"] = to_json(spec.gibbs);
  }
  return j;
}

// ---------------------------------------------------------------- fitting

struct FitReport {
  std::string source;
  std::size_t n = 0;
  ShapePrior shape_prior;
  NigPrior nig;
  GibbsConfig config;
  ChainSummary summary;
  std::array<double, 3> geweke{};
  DensityBands bands;
  double wall_seconds = 0.0;  // reported on stderr only, so files stay byte-identical
};

inline constexpr int kBandPoints = 201;

/// Grid over the data range widened by a quarter of the range on each side.
inline std::vector<double> band_grid(const std::vector<double>& y, int points = kBandPoints) {
  const auto [lo_it, hi_it] = std::minmax_element(y.begin(), y.end());
  double lo = *lo_it, hi = *hi_it;
  double pad = 0.25 * (hi - lo);
  if (pad == 0.0) pad = 1.0;
  lo -= pad;
  hi += pad;
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
  return grid;
}

inline FitReport cmd_fit(const std::vector<double>& y, const std::string& source, const ShapePrior& shape_prior,
                         const NigPrior& nig, const GibbsConfig& cfg) {
  if (y.size() < kMinObservations) {
    throw DataError(source + ": need at least 3 observations, got " + std::to_string(y.size()));
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto chain = run_chain(y, shape_prior, nig, cfg);
  FitReport rep;
  rep.source = source;
  rep.n = y.size();
  rep.shape_prior = shape_prior;
  rep.nig = nig;
  rep.config = cfg;
  rep.summary = summarize(chain);
  rep.geweke = chain.geweke;
  rep.bands = density_bands(chain, band_grid(y));
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

inline Json nullable(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json to_json(const FitReport& r) {
  return Json{{"command", "fit"},
              {"input", r.source},
              {"n", r.n},
              {"shape_prior", to_json(r.shape_prior)},
              {"nig_prior", to_json(r.nig)},
              {"gibbs", to_json(r.config)},
              {"parameters",
               {{"xi", to_json(r.summary.xi)}, {"omega", to_json(r.summary.omega)}, {"alpha", to_json(r.summary.alpha)}}},
              {"geweke_z", {{"xi", nullable(r.geweke[0])}, {"omega", nullable(r.geweke[1])}, {"alpha", nullable(r.geweke[2])}}}};
}

inline void write_bands_csv(std::ostream& out, const DensityBands& b) {
  out << "x,mean,lo95,hi95\n";
  for (std::size_t i = 0; i < b.grid.size(); ++i) {
    out << format_double(b.grid[i]) << ',' << format_double(b.mean[i]) << ',' << format_double(b.lo95[i]) << ','
        << format_double(b.hi95[i]) << '\n';
  }
}

/// Numeric matrix of a CSV with a header row.
inline std::vector<std::vector<double>> read_numeric_csv(std::istream& in, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    if (++lineno == 1) continue;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::string_view rest = line;
    for (;;) {
      const auto comma = rest.find(',');
      double x = 0.0;
      if (!parse_double(trim(rest.substr(0, comma)), x)) {
        throw DataError(source + ":" + std::to_string(lineno) + ": not a finite number");
      }
      row.push_back(x);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------- elicitation

inline Json elicitation_json(const ElicitedPrior& e, const CentralMoments& m, double strength) {
  return Json{{"command", "elicit"},
              {"moments", {{"mean", m.mean}, {"sd", m.sd}, {"skewness", m.skewness}}},
              {"strength", strength},
              {"target_dp", to_json(e.target)},
              {"shape_prior", to_json(e.shape)},
              {"nig_prior", to_json(e.nig)},
              {"prob_alpha_negative", prob_alpha_negative(e.shape)},
              {"prior_mean_alpha", prior_mean_alpha(e.shape)}};
}

inline Json shape_prior_json(const ShapePrior& p) {
  return Json{{"command", "elicit"},
              {"shape_prior", to_json(p)},
              {"prob_alpha_negative", prob_alpha_negative(p)},
              {"prior_mean_alpha", prior_mean_alpha(p)}};
}

inline void write_fig1_csv(std::ostream& out, const std::vector<std::pair<double, double>>& curve) {
  out << "lambda0,prob_alpha_negative\n";
  for (const auto& [l, p] : curve) out << format_double(l) << ',' << format_double(p) << '\n';
}

}  // namespace skewbayes::harness
