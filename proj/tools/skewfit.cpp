// skewfit: simulate | fit | elicit.
//
// Exit codes: 0 success, 2 usage error, 3 data error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "skewbayes/harness.hpp"

namespace fs = std::filesystem;
using namespace skewbayes;
using namespace skewbayes::harness;

namespace {

constexpr int kUsageError = 2;
constexpr int kDataError = 3;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PriorFlags {
  std::string kind = "normal";
  double alpha0 = 0.0;
  double psi0 = 1.0;
  double lambda0 = 0.0;

  void add(CLI::App* app) {
    app->add_option("--prior", kind, "shape prior")->check(CLI::IsMember({"normal", "skewnormal"}))->capture_default_str();
    app->add_option("--alpha0", alpha0, "shape prior location")->capture_default_str();
    app->add_option("--psi0", psi0, "shape prior scale")->capture_default_str();
    app->add_option("--lambda0", lambda0, "shape prior skewness (skewnormal only)")->capture_default_str();
  }

  ShapePrior get() const {
    const auto p = kind == "skewnormal" ? ShapePrior::skew_normal(alpha0, psi0, lambda0) : ShapePrior::normal(alpha0, psi0);
    p.validate();
    return p;
  }
};

struct NigFlags {
  NigPrior nig{0.0, 100.0, 1.0, 1.0};

  void add(CLI::App* app) {
    app->add_option("--xi0", nig.xi0, "location prior mean")->capture_default_str();
    app->add_option("--kappa", nig.kappa, "location prior variance factor")->capture_default_str();
    app->add_option("--a", nig.a, "omega^-2 prior shape")->capture_default_str();
    app->add_option("--b", nig.b, "omega^-2 prior rate")->capture_default_str();
  }
};

struct ChainFlags {
  GibbsConfig cfg;
  std::string kernel = "derived";

  void add(CLI::App* app) {
    app->add_option("--iters", cfg.n_iter, "Gibbs iterations, burn-in included")->capture_default_str();
    app->add_option("--burnin", cfg.burn_in, "discarded iterations")->capture_default_str();
    app->add_option("--thin", cfg.thin, "keep every thin-th draw")->capture_default_str();
    app->add_option("--sweeps", cfg.ltn_sweeps, "latent sweeps per shape update")->capture_default_str();
    app->add_option("--kernel", kernel, "scale update")->check(CLI::IsMember({"derived", "printed"}))->capture_default_str();
  }

  GibbsConfig get(std::uint64_t seed) const {
    GibbsConfig c = cfg;
    c.seed = seed;
    c.variant = kernel == "printed" ? KernelVariant::Printed : KernelVariant::Derived;
    c.validate();
    return c;
  }
};

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
  return p;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw DataError("cannot write '" + path.string() + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian skew-normal inference"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  std::string out_dir = ".";
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "master seed")->capture_default_str();
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
  };

  // simulate
  // Config files are read by the root app; a [simulate] section holds the flags.
  app.set_config("--config", "", "TOML file with a [simulate] section; explicit flags take precedence");
  auto* sim = app.add_subcommand("simulate", "bias and MSE of the shape estimate over seeded replicates");
  sim->fallthrough();
  add_common(sim);
  std::vector<std::size_t> sim_n{50};
  std::size_t reps = 1000;
  double xi_true = 0.0, omega_true = 1.0, alpha_true = 0.0;
  std::string estimand = "mean";
  std::size_t draws = 4000;
  int mc_sweeps = 1;
  unsigned threads = 0;
  bool full_gibbs = false;
  PriorFlags sim_prior;
  NigFlags sim_nig;
  ChainFlags sim_chain;
  sim->add_option("--n", sim_n, "sample size(s); one output row each")->delimiter(',')->capture_default_str();
  sim->add_option("--reps", reps, "replications per row")->capture_default_str();
  sim->add_option("--xi-true", xi_true, "true location")->capture_default_str();
  sim->add_option("--omega-true", omega_true, "true scale")->capture_default_str();
  sim->add_option("--alpha-true", alpha_true, "true shape")->capture_default_str();
  sim->add_option("--estimand", estimand, "posterior summary of alpha")
      ->check(CLI::IsMember({"mean", "mode"}))
      ->capture_default_str();
  sim->add_option("--draws", draws, "posterior draws per replicate (mean estimand)")->capture_default_str();
  sim->add_option("--mc-sweeps", mc_sweeps, "latent sweeps per posterior draw")->capture_default_str();
  sim->add_option("--threads", threads, "worker threads, 0 = all cores")->capture_default_str();
  sim->add_flag("--full-gibbs", full_gibbs, "treat location and scale as unknown and run the full sampler");
  sim_prior.add(sim);
  sim_nig.add(sim);
  sim_chain.add(sim);

  // fit
  auto* fit = app.add_subcommand("fit", "posterior for (xi, omega, alpha) from a one-column CSV");
  add_common(fit);
  std::string data_path;
  PriorFlags fit_prior;
  NigFlags fit_nig;
  ChainFlags fit_chain;
  fit->add_option("data", data_path, "input CSV")->required();
  fit_prior.add(fit);
  fit_nig.add(fit);
  fit_chain.add(fit);

  // elicit
  auto* eli = app.add_subcommand("elicit", "hyperparameters from cohort moments, or shape-prior summaries");
  add_common(eli);
  double m_mean = 0.0, m_sd = 1.0, m_skew = 0.0, strength = 1.0, lambda_max = 15.0, lambda_step = 0.1;
  PriorFlags eli_prior;
  eli_prior.psi0 = 10.0;
  auto* o_mean = eli->add_option("--mean", m_mean, "cohort mean");
  auto* o_sd = eli->add_option("--sd", m_sd, "cohort standard deviation");
  auto* o_skew = eli->add_option("--skew", m_skew, "cohort skewness");
  o_mean->needs(o_sd)->needs(o_skew);
  o_sd->needs(o_mean);
  o_skew->needs(o_mean);
  eli->add_option("--strength", strength, "prior concentration")->needs(o_mean)->capture_default_str();
  eli->add_option("--lambda-max", lambda_max, "fig1.csv grid end")->capture_default_str();
  eli->add_option("--lambda-step", lambda_step, "fig1.csv grid step")->capture_default_str();
  eli_prior.add(eli);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    const auto t0 = std::chrono::steady_clock::now();
    if (sim->parsed()) {
      ExperimentSpec spec;
      spec.true_params = {xi_true, omega_true, alpha_true};
      spec.replications = reps;
      spec.estimand = estimand == "mode" ? Estimand::PosteriorMode : Estimand::PosteriorMean;
      spec.prior = sim_prior.get();
      spec.fixed_loc_scale = !full_gibbs;
      spec.nig = sim_nig.nig;
      spec.gibbs = sim_chain.get(seed);
      spec.seed = seed;
      spec.mc_draws = draws;
      spec.mc_sweeps = mc_sweeps;
      spec.threads = threads;
      const auto dir = prepare_out(out_dir);
      std::ostringstream csv;
      csv << kSimHeader << '\n';
      Json rows = Json::array();
      for (std::size_t i = 0; i < sim_n.size(); ++i) {
        spec.n = sim_n[i];
        // Each sample size gets its own stream.
        ExperimentSpec row_spec = spec;
        row_spec.seed = derive_seed(seed, sim_n[i]);
        const auto row = cmd_simulate(row_spec);
        write_sim_row(csv, spec, row);
        rows.push_back(Json{{"n", row.n},
                            {"bias", row.bias},
                            {"mse", row.mse},
                            {"bias_se", row.bias_se},
                            {"edge_warnings", row.edge_warnings}});
        if (row.edge_warnings > 0) {
          std::cerr << "warning: n=" << row.n << ": " << row.edge_warnings
                    << " replicates had the mode at the search boundary\n";
        }
      }
      Json summary{{"command", "simulate"}, {"config", spec_to_json(spec)}, {"rows", rows}};
      summary["config"]["n"] = sim_n;
      write_file(dir / "simstudy.csv", csv.str());
      write_file(dir / "summary.json", summary.dump(2) + "\n");
    } else if (fit->parsed()) {
      const auto shape = fit_prior.get();
      fit_nig.nig.validate();
      const auto cfg = fit_chain.get(seed);
      const auto y = read_single_column(data_path);
      const auto rep = cmd_fit(y, fs::path(data_path).filename().string(), shape, fit_nig.nig, cfg);
      const auto dir = prepare_out(out_dir);
      write_file(dir / "summary.json", to_json(rep).dump(2) + "\n");
      std::ostringstream csv;
      write_bands_csv(csv, rep.bands);
      write_file(dir / "bands.csv", csv.str());
    } else if (eli->parsed()) {
      if (!(lambda_step > 0.0) || !(lambda_max >= 0.0)) throw UsageError("--lambda-step must be positive and --lambda-max nonnegative");
      Json summary;
      if (o_mean->count() > 0) {
        const CentralMoments m{m_mean, m_sd, m_skew};
        try {
          summary = elicitation_json(elicit_from_moments(m, strength), m, strength);
        } catch (const std::domain_error& e) {
          throw UsageError(e.what());
        }
      } else {
        summary = shape_prior_json(eli_prior.get());
      }
      std::vector<double> grid;
      const auto steps = static_cast<std::size_t>(std::floor(lambda_max / lambda_step + 1e-9));
      for (std::size_t k = 0; k <= steps; ++k) grid.push_back(static_cast<double>(k) * lambda_step);
      summary["fig1"] = Json{{"psi0", eli_prior.psi0}, {"lambda_max", lambda_max}, {"lambda_step", lambda_step}};
      const auto dir = prepare_out(out_dir);
      write_file(dir / "summary.json", summary.dump(2) + "\n");
      std::ostringstream csv;
      write_fig1_csv(csv, fig1_curve(eli_prior.psi0, grid));
      write_file(dir / "fig1.csv", csv.str());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "done in " << secs << " s\n";
    return 0;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const InsufficientData& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
}
