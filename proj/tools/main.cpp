#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cpjm/commands.hpp"

namespace {

using cpjm::RunConfig;

// Flat INI with [scenario] / [priors] / [sampler] / [output] / [data]
// sections, translated to the matching dotted long options. Command-line
// flags win because they are parsed after these tokens.
std::vector<std::string> config_to_args(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw cpjm::ConfigError("cannot open config file " + path);
  std::vector<std::string> args;
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto strip = [](std::string v) {
      const auto b = v.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = v.find_last_not_of(" \t\r");
      return v.substr(b, e - b + 1);
    };
    line = strip(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw cpjm::ConfigError(path + ":" + std::to_string(lineno) +
                                ": unterminated section header");
      }
      section = strip(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw cpjm::ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected key = value");
    }
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw cpjm::ConfigError(path + ":" + std::to_string(lineno) +
                              ": empty key or value");
    }
    args.push_back("--" + (section.empty() ? key : section + "." + key));
    std::stringstream vs(value);
    std::string tok;
    while (vs >> tok) args.push_back(tok);
  }
  return args;
}

// Vector keys accepted from the config file or flags; fixed-size blocks are
// validated here so errors name the offending field.
void apply_vector(const std::vector<double>& v, Eigen::VectorXd* out) {
  out->resize(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) (*out)(i) = v[i];
}

void apply_gnd(const std::vector<double>& v, cpjm::GndPrior* g,
               const char* name) {
  if (v.size() != 3) {
    throw cpjm::ConfigError(std::string("priors.") + name +
                            " needs exactly 3 values (mu alpha beta)");
  }
  g->mu = v[0];
  g->alpha = v[1];
  g->beta = v[2];
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint change-point model for longitudinal and survival data"};
  app.require_subcommand(1);
  std::string config_note;
  app.add_option("--config", config_note,
                 "config file with [scenario] [priors] [sampler] [output] "
                 "sections (handled before flag parsing)");

  RunConfig cfg;

  // [scenario]
  std::vector<double> truth_gamma, truth_beta, truth_mu_b, truth_sd_r,
      truth_corr;
  app.add_option("--scenario.n", cfg.scenario.n, "subjects per dataset");
  app.add_option("--scenario.target-censoring",
                  cfg.scenario.target_censoring, "censored fraction target");
  app.add_option("--scenario.replications", cfg.scenario.replications,
                  "replication count");
  app.add_option("--scenario.seed", cfg.scenario.seed, "scenario RNG seed");
  app.add_option("--scenario.visit-interval", cfg.scenario.visit_interval);
  app.add_option("--scenario.visit-noise-scale",
                  cfg.scenario.visit_noise_scale);
  app.add_option("--scenario.truth-gamma", truth_gamma);
  app.add_option("--scenario.truth-eta", cfg.scenario.truth.eta);
  app.add_option("--scenario.truth-alpha", cfg.scenario.truth.alpha);
  app.add_option("--scenario.truth-beta", truth_beta);
  app.add_option("--scenario.truth-sigma-y", cfg.scenario.truth.sigma_y);
  app.add_option("--scenario.truth-mu-omega", cfg.scenario.truth.mu_omega);
  app.add_option("--scenario.truth-mu-b", truth_mu_b)->expected(3);
  app.add_option("--scenario.truth-sd-r", truth_sd_r)->expected(4);
  app.add_option("--scenario.truth-corr", truth_corr)
      ->expected(16);  // row-major 4x4

  // [priors]
  std::vector<double> gnd_mu_omega, gnd_mu_b0, gnd_mu_b1, gnd_mu_b2;
  app.add_option("--priors.gnd-mu-omega", gnd_mu_omega)->expected(3);
  app.add_option("--priors.gnd-mu-b0", gnd_mu_b0)->expected(3);
  app.add_option("--priors.gnd-mu-b1", gnd_mu_b1)->expected(3);
  app.add_option("--priors.gnd-mu-b2", gnd_mu_b2)->expected(3);
  app.add_option("--priors.sigma-gamma", cfg.priors.sigma_gamma);
  app.add_option("--priors.sigma-beta", cfg.priors.sigma_beta);
  app.add_option("--priors.sigma-eta", cfg.priors.sigma_eta);
  app.add_option("--priors.sigma-alpha", cfg.priors.sigma_alpha);
  app.add_option("--priors.sigma-sigma-y", cfg.priors.sigma_sigma_y);
  app.add_option("--priors.sd-scale", cfg.priors.sd_r_scale);
  app.add_option("--priors.lkj-eta", cfg.priors.lkj_eta);

  // [sampler]
  app.add_option("--sampler.chains", cfg.sampler.chains);
  app.add_option("--sampler.warmup", cfg.sampler.warmup);
  app.add_option("--sampler.samples", cfg.sampler.samples);
  app.add_option("--sampler.seed", cfg.sampler.seed);
  app.add_option("--sampler.target-accept", cfg.sampler.target_accept);
  app.add_option("--sampler.max-tree-depth", cfg.sampler.max_tree_depth);
  app.add_option("--sampler.init-jitter", cfg.sampler.init_jitter);
  app.add_option("--sampler.nuts", cfg.sampler.nuts);
  app.add_option("--sampler.static-steps", cfg.sampler.static_steps);
  app.add_option("--sampler.retain-latent", cfg.sampler.retain_latent);
  app.add_option("--sampler.threads", cfg.sampler.threads);

  // [output] and [data]
  app.add_option("--output.dir", cfg.out_dir);
  app.add_option("--data.longitudinal", cfg.longitudinal_path);
  app.add_option("--data.survival", cfg.survival_path);
  app.add_option("--data.draws", cfg.draws_path);

  // Shared flag overrides (command line beats config file; these beat the
  // sectioned keys).
  std::uint64_t seed_override = 0;
  std::string out_override;
  int chains_override = 0, warmup_override = -1, samples_override = 0;
  auto* seed_opt = app.add_option("--seed", seed_override,
                                  "override both scenario and sampler seeds");
  auto* out_opt = app.add_option("--out", out_override, "output directory");
  auto* chains_opt = app.add_option("--chains", chains_override);
  auto* warmup_opt = app.add_option("--warmup", warmup_override);
  auto* samples_opt = app.add_option("--samples", samples_override);
  app.add_option("--model", cfg.model,
                 "joint or longitudinal-only (fit, replicate)");

  auto* sim_cmd = app.add_subcommand("simulate", "draw one dataset");
  auto* fit_cmd = app.add_subcommand("fit", "fit a model to CSV data");
  sim_cmd->fallthrough();
  fit_cmd->fallthrough();
  fit_cmd->add_option("--longitudinal", cfg.longitudinal_path,
                      "longitudinal CSV path");
  fit_cmd->add_option("--survival", cfg.survival_path, "survival CSV path");
  auto* rep_cmd = app.add_subcommand("replicate", "operating characteristics");
  auto* sum_cmd = app.add_subcommand("summarize", "posterior functionals");
  rep_cmd->fallthrough();
  sum_cmd->fallthrough();
  sum_cmd->add_option("--draws", cfg.draws_path, "draws CSV path");
  sum_cmd->add_option("--tstar", cfg.tstar_grid,
                      "event times for marginal mean curves");
  sum_cmd->add_option("--w", cfg.w_fixed, "fixed survival covariate value");
  sum_cmd->add_option("--x", cfg.x_fixed, "fixed outcome covariate value");

  // Pull --config out of argv, then parse [config tokens] + [remaining
  // argv]: later (command line) values override earlier (file) ones.
  std::vector<std::string> args;
  std::string config_path;
  try {
    for (int i = 1; i < argc; ++i) {
      const std::string a = argv[i];
      if (a == "--config") {
        if (i + 1 >= argc) throw cpjm::ConfigError("--config needs a path");
        config_path = argv[++i];
      } else if (a.rfind("--config=", 0) == 0) {
        config_path = a.substr(9);
      } else {
        args.push_back(a);
      }
    }
    if (!config_path.empty()) {
      const auto file_args = config_to_args(config_path);
      args.insert(args.begin(), file_args.begin(), file_args.end());
    }
  } catch (const cpjm::ConfigError& e) {
    std::fprintf(stderr, "error[config]: %s\n", e.what());
    return 2;
  }
  for (auto* opt : app.get_options()) {
    opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }
  try {
    std::vector<const char*> cargs;
    cargs.push_back(argv[0]);
    for (const auto& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::fprintf(stderr, "error[config]: %s\n", e.what());
    return 2;
  }

  try {
    if (!truth_gamma.empty()) apply_vector(truth_gamma, &cfg.scenario.truth.gamma);
    if (!truth_beta.empty()) apply_vector(truth_beta, &cfg.scenario.truth.beta);
    if (!truth_mu_b.empty()) {
      cfg.scenario.truth.mu_b << truth_mu_b[0], truth_mu_b[1], truth_mu_b[2];
    }
    if (!truth_sd_r.empty()) {
      for (int k = 0; k < 4; ++k) cfg.scenario.truth.sd_r(k) = truth_sd_r[k];
    }
    if (!truth_corr.empty()) {
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
          cfg.scenario.truth.Gamma_r(i, j) = truth_corr[4 * i + j];
    }
    if (!gnd_mu_omega.empty()) apply_gnd(gnd_mu_omega, &cfg.priors.mu_omega, "gnd-mu-omega");
    if (!gnd_mu_b0.empty()) apply_gnd(gnd_mu_b0, &cfg.priors.mu_b0, "gnd-mu-b0");
    if (!gnd_mu_b1.empty()) apply_gnd(gnd_mu_b1, &cfg.priors.mu_b1, "gnd-mu-b1");
    if (!gnd_mu_b2.empty()) apply_gnd(gnd_mu_b2, &cfg.priors.mu_b2, "gnd-mu-b2");
    if (seed_opt->count() > 0) {
      cfg.scenario.seed = seed_override;
      cfg.sampler.seed = seed_override;
    }
    if (out_opt->count() > 0) cfg.out_dir = out_override;
    if (chains_opt->count() > 0) cfg.sampler.chains = chains_override;
    if (warmup_opt->count() > 0) cfg.sampler.warmup = warmup_override;
    if (samples_opt->count() > 0) cfg.sampler.samples = samples_override;

    if (sim_cmd->parsed()) {
      cpjm::cmd_simulate(cfg);
    } else if (fit_cmd->parsed()) {
      cpjm::cmd_fit(cfg);
    } else if (rep_cmd->parsed()) {
      cpjm::cmd_replicate(cfg);
    } else if (sum_cmd->parsed()) {
      cpjm::cmd_summarize(cfg);
    }
    return 0;
  } catch (const cpjm::ConfigError& e) {
    std::fprintf(stderr, "error[config]: %s\n", e.what());
    return 2;
  } catch (const cpjm::DataError& e) {
    std::fprintf(stderr, "error[data]: %s\n", e.what());
    return 3;
  } catch (const cpjm::SamplerError& e) {
    std::fprintf(stderr, "error[sampler]: %s\n", e.what());
    return 4;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error[config]: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error[internal]: %s\n", e.what());
    return 1;
  }
}
