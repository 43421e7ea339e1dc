// Copyright 2026 The dpdistill Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. Exit codes: 0 success, 1 infeasible or diverged
// computation, 2 usage error.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "CLI11.hpp"
#include "dpdistill/alloc.hpp"
#include "dpdistill/dataset.hpp"
#include "dpdistill/gdp.hpp"
#include "dpdistill/harness.hpp"

namespace {

constexpr const char* kSeedEnvVar = "DPDISTILL_SEED";

void print_value(const char* name, double value) {
  std::printf("%s = %.6g\n", name, value);
}

// Seed precedence: --seed flag, then DPDISTILL_SEED, then the config value.
std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv(kSeedEnvVar);
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  std::uint64_t value = 0;
  const char* end = raw + std::string_view(raw).size();
  auto [ptr, ec] = std::from_chars(raw, end, value);
  if (ec != std::errc() || ptr != end) {
    throw CLI::ValidationError(std::string(kSeedEnvVar) +
                               " must be a non-negative integer, got '" + raw +
                               "'");
  }
  return value;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct AccountArgs {
  std::vector<double> mus;
  double mu = 0.0;
  double eps = 0.0;
  double delta = 0.0;
  double p = 1.0;
  long iterations = 1;
  double sigma = 1.0;
};

struct AllocateArgs {
  double eps = 0.0;
  double delta = 0.0;
  double mu_g = 0.0;
  double mu_e = 0.0;
  double p = 1.0;
  long iterations = 1;
  double expert_p = 1.0;
  long expert_iterations = 1;
};

struct RunArgs {
  std::string config_path;
  std::string out_dir;
  std::string distilled_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> seeds;
};

int run_distill(const RunArgs& args) {
  dpdistill::harness::ExperimentConfig config =
      dpdistill::harness::config_from_json(read_file(args.config_path));
  if (args.seed) {
    config.seed = *args.seed;
  } else if (std::optional<std::uint64_t> fallback = env_seed()) {
    config.seed = *fallback;
  }

  dpdistill::harness::PipelineResult result =
      dpdistill::harness::run_pipeline(config);
  try {
    dpdistill::harness::write_artifacts(args.out_dir, config, result);
  } catch (...) {
    std::fprintf(stderr, "warning: partial artifacts left in %s\n",
                 args.out_dir.c_str());
    throw;
  }

  const dpdistill::harness::RunReport& report = result.report;
  std::printf("artifacts written to %s\n", args.out_dir.c_str());
  if (std::isfinite(report.epsilon)) {
    std::printf("budget: eps = %.6g, delta = %.6g\n", report.epsilon,
                report.delta);
    std::printf("spent:  mu = %.6g, delta at eps = %.6g\n", report.ledger_mu,
                report.delta_spent);
  } else {
    std::printf("budget: unlimited\n");
  }
  std::printf("accuracy = %.4f +/- %.4f over %zu seeds\n",
              report.accuracy_mean, report.accuracy_std,
              report.accuracy_per_seed.size());
  return 0;
}

int run_eval(const RunArgs& args) {
  dpdistill::harness::ExperimentConfig config =
      dpdistill::harness::config_from_json(read_file(args.config_path));
  dpdistill::harness::EvalSpec spec = config.eval;
  if (args.seeds) spec.seeds = *args.seeds;
  if (args.seed) {
    spec.seed = *args.seed;
  } else if (std::optional<std::uint64_t> fallback = env_seed()) {
    spec.seed = *fallback;
  }

  dpdistill::data::LabeledSet distilled = dpdistill::data::read_csv_file(
      args.distilled_path, config.dataset.classes);
  dpdistill::harness::Task task = dpdistill::harness::make_task(config.dataset);
  dpdistill::harness::EvalResult result =
      dpdistill::harness::evaluate_distilled(distilled, task.test, spec);

  std::printf("accuracy = %.4f +/- %.4f over %d seeds\n", result.mean,
              result.stddev, spec.seeds);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private dataset distillation toolkit"};
  app.require_subcommand(1);

  AccountArgs acct;
  CLI::App* account = app.add_subcommand(
      "account", "Gaussian differential privacy calculator");
  account->require_subcommand(1);

  CLI::App* compose =
      account->add_subcommand("compose", "Sequentially compose mu values");
  compose->add_option("--mu", acct.mus, "Comma-separated list of mu values")
      ->required()
      ->delimiter(',');

  CLI::App* to_dp = account->add_subcommand(
      "to-dp", "Delta spent by a mu-GDP mechanism at a given epsilon");
  to_dp->add_option("--mu", acct.mu, "GDP budget")->required();
  to_dp->add_option("--eps", acct.eps, "Epsilon at which to report delta")
      ->required();

  CLI::App* to_gdp = account->add_subcommand(
      "to-gdp", "Tightest mu matching an (epsilon, delta) target");
  to_gdp->add_option("--eps", acct.eps, "Epsilon budget")->required();
  to_gdp->add_option("--delta", acct.delta, "Delta budget")->required();

  CLI::App* subsample = account->add_subcommand(
      "subsample", "Total mu of a subsampled Gaussian mechanism");
  subsample->add_option("--p", acct.p, "Sampling probability per round")
      ->required();
  subsample->add_option("--iterations", acct.iterations, "Number of rounds")
      ->required();
  subsample->add_option("--sigma", acct.sigma, "Noise multiplier")->required();

  AllocateArgs alloc_args;
  CLI::App* allocate = app.add_subcommand(
      "allocate", "Split an (epsilon, delta) budget across mechanisms");
  allocate->add_option("--eps", alloc_args.eps, "Total epsilon")->required();
  allocate->add_option("--delta", alloc_args.delta, "Total delta")->required();
  allocate->add_option("--mu-g", alloc_args.mu_g, "Moment-release share")
      ->required();
  allocate->add_option("--mu-e", alloc_args.mu_e, "Expert fine-tuning share")
      ->required();
  allocate
      ->add_option("--p", alloc_args.p,
                   "Feature-matching sampling probability")
      ->required();
  allocate
      ->add_option("--iterations", alloc_args.iterations,
                   "Feature-matching rounds")
      ->required();
  CLI::Option* opt_ep = allocate->add_option(
      "--expert-p", alloc_args.expert_p, "Expert sampling probability");
  CLI::Option* opt_et = allocate->add_option(
      "--expert-iterations", alloc_args.expert_iterations, "Expert rounds");

  RunArgs distill_args;
  CLI::App* distill = app.add_subcommand(
      "distill", "Run the full pipeline and write artifacts");
  distill->add_option("--config", distill_args.config_path, "Config JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  distill->add_option("--out", distill_args.out_dir, "Output directory")
      ->required();
  distill->add_option("--seed", distill_args.seed,
                      "Master seed (default: DPDISTILL_SEED, then the config)");

  RunArgs eval_args;
  CLI::App* eval = app.add_subcommand(
      "eval", "Train downstream models on a distilled set and report accuracy");
  eval->add_option("--distilled", eval_args.distilled_path, "Distilled CSV")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--config", eval_args.config_path,
                   "Config JSON file providing the dataset and eval specs")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--seeds", eval_args.seeds, "Number of evaluation seeds");
  eval->add_option("--seed", eval_args.seed,
                   "Base seed (default: DPDISTILL_SEED, then the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (compose->parsed()) {
      std::vector<dpdistill::gdp::GdpBudget> budgets;
      budgets.reserve(acct.mus.size());
      for (double mu : acct.mus) budgets.emplace_back(mu);
      print_value("mu", dpdistill::gdp::compose(budgets).mu);
    } else if (to_dp->parsed()) {
      print_value("delta", dpdistill::gdp::gdp_to_dp(
                               dpdistill::gdp::GdpBudget(acct.mu), acct.eps)
                               .delta);
    } else if (to_gdp->parsed()) {
      print_value("mu", dpdistill::gdp::dp_to_gdp(
                            dpdistill::gdp::DpBudget(acct.eps, acct.delta))
                            .mu);
    } else if (subsample->parsed()) {
      print_value("mu", dpdistill::gdp::subsampled_mu(
                            dpdistill::gdp::SubsamplingSpec(
                                acct.p, acct.iterations, acct.sigma))
                            .mu);
    } else if (allocate->parsed()) {
      dpdistill::gdp::DpBudget total(alloc_args.eps, alloc_args.delta);
      dpdistill::gdp::GdpBudget mu_g(alloc_args.mu_g);
      dpdistill::gdp::GdpBudget mu_e(alloc_args.mu_e);
      dpdistill::alloc::AllocationPlan plan;
      if (opt_ep->count() > 0 || opt_et->count() > 0) {
        plan = dpdistill::alloc::allocate(
            total, mu_g, mu_e,
            dpdistill::alloc::SamplingPlan{alloc_args.p, alloc_args.iterations},
            dpdistill::alloc::SamplingPlan{alloc_args.expert_p,
                                           alloc_args.expert_iterations});
      } else {
        plan = dpdistill::alloc::allocate(total, mu_g, mu_e, alloc_args.p,
                                          alloc_args.iterations);
      }
      std::fputs(dpdistill::alloc::allocation_report(plan).c_str(), stdout);
    } else if (distill->parsed()) {
      return run_distill(distill_args);
    } else if (eval->parsed()) {
      return run_eval(eval_args);
    }
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
