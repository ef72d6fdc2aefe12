// bnnmc command line: `train` draws posterior weight samples for a small
// Bayesian neural network and writes an archive with diagnostics, `test`
// scores an archive on held-out and OOD data, and `sweep` repeats the pair
// across temperatures to produce a tempering table.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bnnmc/pipeline.hpp"
#include "bnnmc/serde.hpp"

namespace {

using bnnmc::json;

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDivergence = 3;

int exit_code_for(const bnnmc::Error& e) {
  switch (e.code()) {
    case bnnmc::ErrorCode::DivergenceDetected:
      return kExitDivergence;
    case bnnmc::ErrorCode::MissingFile:
    case bnnmc::ErrorCode::IoError:
      return kExitIo;
    default:
      return kExitUsage;
  }
}

json load_json_argument(const std::string& arg, const std::string& flag) {
  if (!arg.empty() && arg.front() == '{') {
    return json::parse(arg);
  }
  std::ifstream in(arg);
  bnnmc::require(in.good(), bnnmc::ErrorCode::InvalidConfig,
                 flag + ": '" + arg + "' is not a known name, JSON, or readable file");
  return json::parse(in);
}

bnnmc::PriorSpec resolve_prior(const std::string& arg) {
  using bnnmc::PriorSpec;
  if (arg == "gaussian") return PriorSpec::gaussian(0.0, 1.0);
  if (arg == "laplace") return PriorSpec::laplace(0.0, 1.0);
  if (arg == "cauchy") return PriorSpec::cauchy(0.0, 1.0);
  if (arg == "student-t") return PriorSpec::student_t(3.0, 0.0, 1.0);
  if (arg == "gaussian-hier") {
    return PriorSpec::hierarchical(PriorSpec::gaussian(0.0, 1.0),
                                   {{"scale", PriorSpec::gaussian(1.0, 0.25)}});
  }
  if (arg == "gaussian-laplace-mix") {
    return PriorSpec::mixture(
        {PriorSpec::gaussian(0.0, 1.0), PriorSpec::laplace(0.0, 1.0)});
  }
  try {
    return bnnmc::prior_from_json(load_json_argument(arg, "--prior"));
  } catch (const json::exception& e) {
    bnnmc::fail(bnnmc::ErrorCode::InvalidConfig,
                std::string("--prior: not a known name or valid JSON (") + e.what() + ")");
  }
}

bnnmc::DataConfig resolve_data(const std::string& arg, const std::string& target_col,
                               std::uint64_t seed) {
  bnnmc::DataConfig cfg;
  if (arg == "blobs") {
    cfg.kind = bnnmc::DataConfig::Kind::Blobs;
  } else if (arg == "sine") {
    cfg.kind = bnnmc::DataConfig::Kind::Sine;
    cfg.task = bnnmc::TaskKind::Regression;
  } else if (arg.rfind("csv:", 0) == 0) {
    cfg.kind = bnnmc::DataConfig::Kind::Csv;
    cfg.path = arg.substr(4);
    cfg.task = bnnmc::TaskKind::Classification;
  } else {
    bnnmc::fail(bnnmc::ErrorCode::InvalidConfig,
                "--data: expected blobs, sine, or csv:PATH, got '" + arg + "'");
  }
  if (!target_col.empty()) cfg.target_column = target_col;
  cfg.seed = seed;
  return cfg;
}

bnnmc::ModelSpec resolve_model(const std::string& arg, const bnnmc::Dataset& data) {
  bnnmc::ModelSpec spec;
  const std::size_t in = data.cols();
  const std::size_t out = data.task == bnnmc::TaskKind::Classification
                              ? static_cast<std::size_t>(data.num_classes)
                              : data.real_targets.cols;
  if (arg == "mlp" || arg == "linear") {
    spec.arch = arg == "mlp" ? bnnmc::Architecture::Mlp : bnnmc::Architecture::Linear;
    spec.widths = arg == "mlp" ? std::vector<std::size_t>{in, 16, out}
                               : std::vector<std::size_t>{in, out};
    if (data.task == bnnmc::TaskKind::Regression) {
      spec.likelihood = bnnmc::Likelihood::GaussianRegression;
      spec.noise_sigma = 0.25;
    }
    return spec;
  }
  try {
    spec = bnnmc::model_from_json(load_json_argument(arg, "--model"));
  } catch (const json::exception& e) {
    bnnmc::fail(bnnmc::ErrorCode::InvalidConfig,
                std::string("--model: not a known name or valid JSON (") + e.what() + ")");
  }
  if (data.task == bnnmc::TaskKind::Regression &&
      spec.likelihood != bnnmc::Likelihood::GaussianRegression) {
    bnnmc::fail(bnnmc::ErrorCode::InvalidConfig,
                "--model: regression data needs the gaussian likelihood");
  }
  if (data.task == bnnmc::TaskKind::Classification &&
      spec.likelihood != bnnmc::Likelihood::Categorical) {
    bnnmc::fail(bnnmc::ErrorCode::InvalidConfig,
                "--model: classification data needs the categorical likelihood");
  }
  return spec;
}

struct TrainFlags {
  std::string model = "mlp";
  std::string prior = "gaussian";
  std::string data = "blobs";
  std::string inference = "ggmc";
  std::string config_file;
  std::string outdir;
  std::string target_col;
  std::string precond = "off";
  std::size_t n_samples = 100;
  std::size_t steps = 2000;
  std::size_t burn_in = 500;
  std::size_t cycles = 1;
  std::size_t thin = 0;
  std::size_t batch_size = 0;
  std::size_t leapfrog_steps = 10;
  double temperature = 1.0;
  double lr = 1e-3;
  double friction = 0.9;
  double train_frac = 0.8;
  double ood_offset = 3.0;
  std::uint64_t seed = 0;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f, bool with_outdir = true) {
  cmd->add_option("--model", f.model, "Model: mlp, linear, or JSON (inline or file)");
  cmd->add_option("--prior", f.prior,
                  "Prior: gaussian, laplace, cauchy, student-t, gaussian-hier, "
                  "gaussian-laplace-mix, or JSON");
  cmd->add_option("--data", f.data, "Dataset: blobs, sine, or csv:PATH");
  cmd->add_option("--inference", f.inference, "Sampler: sgld, ggmc, or hmc");
  cmd->add_option("--n-samples", f.n_samples, "Posterior samples to keep");
  cmd->add_option("--steps", f.steps, "Sampling steps");
  cmd->add_option("--burn-in", f.burn_in, "Burn-in steps");
  cmd->add_option("--temperature", f.temperature, "Sampling temperature T");
  cmd->add_option("--lr", f.lr, "Peak step size h0");
  cmd->add_option("--cycles", f.cycles, "Cyclical schedule cycle count");
  cmd->add_option("--precond", f.precond, "Diagonal preconditioner: on or off");
  cmd->add_option("--seed", f.seed, "Random seed");
  if (with_outdir) {
    cmd->add_option("--outdir", f.outdir, "Output directory")->required();
  }
  cmd->add_option("--target-col", f.target_col, "CSV target column name");
  cmd->add_option("--config", f.config_file, "Sampler config JSON; flags override");
  cmd->add_option("--batch-size", f.batch_size, "Minibatch size (0 = full batch)");
  cmd->add_option("--thin", f.thin, "Thinning interval (0 = derive from --n-samples)");
  cmd->add_option("--friction", f.friction, "GGMC per-step momentum decay a");
  cmd->add_option("--leapfrog-steps", f.leapfrog_steps, "HMC leapfrog steps");
  cmd->add_option("--train-frac", f.train_frac, "Train split fraction");
  cmd->add_option("--ood-offset", f.ood_offset, "Constant input shift for the OOD split");
}

bnnmc::ExperimentConfig build_config(const TrainFlags& f, const CLI::App* cmd) {
  bnnmc::ExperimentConfig cfg;

  bnnmc::SamplerConfig sampler;
  if (!f.config_file.empty()) {
    sampler = bnnmc::sampler_from_json(load_json_argument(f.config_file, "--config"));
  }
  const auto flag_set = [cmd](const std::string& name) {
    return cmd->count(name) > 0;
  };
  if (f.config_file.empty() || flag_set("--inference")) {
    if (f.inference == "sgld") {
      sampler.kind = bnnmc::SamplerKind::Sgld;
    } else if (f.inference == "ggmc") {
      sampler.kind = bnnmc::SamplerKind::Ggmc;
    } else if (f.inference == "hmc") {
      sampler.kind = bnnmc::SamplerKind::Hmc;
    } else {
      bnnmc::fail(bnnmc::ErrorCode::InvalidConfig,
                  "--inference: expected sgld, ggmc, or hmc, got '" + f.inference + "'");
    }
  }
  if (f.config_file.empty() || flag_set("--lr")) sampler.step_size = f.lr;
  if (f.config_file.empty() || flag_set("--temperature")) sampler.temperature = f.temperature;
  if (f.config_file.empty() || flag_set("--friction")) sampler.friction = f.friction;
  if (f.config_file.empty() || flag_set("--leapfrog-steps"))
    sampler.leapfrog_steps = f.leapfrog_steps;
  if (f.config_file.empty() || flag_set("--cycles")) sampler.cycles = f.cycles;
  if (f.config_file.empty() || flag_set("--steps")) sampler.steps = f.steps;
  if (f.config_file.empty() || flag_set("--burn-in")) sampler.burn_in = f.burn_in;
  if (f.config_file.empty() || flag_set("--thin")) sampler.thin = f.thin;
  if (f.config_file.empty() || flag_set("--seed")) sampler.seed = f.seed;
  if (f.config_file.empty() || flag_set("--batch-size")) sampler.batch_size = f.batch_size;
  if (flag_set("--precond") || f.config_file.empty()) {
    if (f.precond == "on") {
      sampler.precond.enabled = true;
    } else if (f.precond == "off") {
      sampler.precond.enabled = false;
    } else {
      bnnmc::fail(bnnmc::ErrorCode::InvalidConfig,
                  "--precond: expected on or off, got '" + f.precond + "'");
    }
  }
  cfg.sampler = sampler;

  cfg.data = resolve_data(f.data, f.target_col, f.seed);
  const bnnmc::Dataset preview = bnnmc::make_dataset(cfg.data);
  cfg.model = resolve_model(f.model, preview);
  cfg.prior = resolve_prior(f.prior);
  cfg.n_samples = f.n_samples;
  cfg.train_fraction = f.train_frac;
  cfg.ood_offset = f.ood_offset;
  cfg.outdir = f.outdir;
  return cfg;
}

void print_summary(const bnnmc::TrainSummary& summary, double temperature) {
  std::printf("wrote %zu samples to %s\n", summary.n_samples,
              summary.archive_dir.c_str());
  for (const bnnmc::GroupCalibration& g : summary.diagnostics.groups) {
    if (g.has_kinetic) {
      std::printf("%-28s kinetic T^ = %.4g (SE %.3g) [%s]\n", g.group.c_str(),
                  g.kinetic_mean, g.kinetic_se, g.kinetic_pass ? "PASS" : "FLAG");
    }
    std::printf("%-28s config  T^ = %.4g (SE %.3g) [%s]\n", g.group.c_str(),
                g.config_mean, g.config_se, g.config_pass ? "PASS" : "FLAG");
  }
  if (summary.diagnostics.has_acceptance) {
    std::printf("mean MH acceptance: %.4f\n", summary.diagnostics.acceptance_rate);
  }
  std::printf("target temperature: %g\n", temperature);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tempered MCMC inference for small Bayesian neural networks"};
  app.require_subcommand(1);

  TrainFlags train_flags;
  CLI::App* train_cmd = app.add_subcommand("train", "Sample the posterior, write an archive");
  add_train_flags(train_cmd, train_flags);

  std::string test_archive;
  std::string test_out;
  CLI::App* test_cmd = app.add_subcommand("test", "Score an archive on held-out data");
  test_cmd->add_option("--archive", test_archive, "Archive directory")->required();
  test_cmd->add_option("--out", test_out, "Metrics CSV path (default: archive dir)");

  TrainFlags sweep_flags;
  std::vector<double> temperatures;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "Train and test across temperatures");
  add_train_flags(sweep_cmd, sweep_flags);
  sweep_cmd->add_option("--temperatures", temperatures, "Temperatures to sweep")
      ->required()
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) {
      const bnnmc::ExperimentConfig cfg = build_config(train_flags, train_cmd);
      const bnnmc::TrainSummary summary = bnnmc::run_train(cfg);
      print_summary(summary, cfg.sampler.temperature);
    } else if (test_cmd->parsed()) {
      const bnnmc::MetricReport report = bnnmc::run_test(test_archive, test_out);
      std::printf("T = %g  accuracy = %.4f  log_lik = %.4f  ece = %.4f  auroc = %.4f\n",
                  report.temperature, report.accuracy, report.log_lik, report.ece,
                  report.auroc);
    } else if (sweep_cmd->parsed()) {
      bnnmc::ExperimentConfig cfg = build_config(sweep_flags, sweep_cmd);
      const std::vector<bnnmc::MetricReport> reports =
          bnnmc::run_sweep(cfg, temperatures);
      std::printf("tempering table (%zu rows) written to %s/tempering.csv\n",
                  reports.size(), cfg.outdir.c_str());
    }
  } catch (const bnnmc::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  }
  return kExitOk;
}
