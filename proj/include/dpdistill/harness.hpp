//
// Copyright 2026 The dpdistill Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef DPDISTILL_HARNESS_HPP_
#define DPDISTILL_HARNESS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "dpdistill/alloc.hpp"
#include "dpdistill/dataset.hpp"
#include "dpdistill/distill.hpp"
#include "dpdistill/gen.hpp"
#include "dpdistill/ledger.hpp"
#include "dpdistill/rng.hpp"

namespace dpdistill::harness {

// Gaussian-blob classification task: class means are separation-scaled random
// unit directions, points scatter isotropically around them.
struct DatasetSpec {
  long dim = 16;
  int classes = 4;
  long per_class = 500;
  long test_per_class = 250;
  double separation = 3.0;
  double within_std = 1.0;
  std::uint64_t seed = 1;
};

// epsilon = infinity is the non-private sentinel: no allocation, no noise,
// unlimited ledger.
struct BudgetSpec {
  double epsilon = 10.0;
  double delta = 1e-5;

  bool unlimited() const;
};

// How the generator and expert shares of the budget are chosen. With probe
// off, the shares are fixed fractions of mu_total. With probe on, sigma_g is
// searched so the released-moment distance hits moment_multiplier times the
// full-budget reference, and sigma_e so the fine-tuned expert reaches
// accuracy_fraction of its full-budget accuracy.
struct AllocationKnobs {
  bool probe = false;
  double share_g = 0.135;
  double share_e = 0.65;
  double moment_multiplier = 1.2;
  double accuracy_fraction = 0.9;
};

// Expert classifier: pre-trained on the synthetic set, then fine-tuned on
// private data with per-example clipping and noise.
struct ExpertSpec {
  std::vector<long> hidden = {32};
  long pretrain_epochs = 20;
  long finetune_epochs = 8;
  double lr = 0.05;
  long batch = 64;
  double clip_norm = 1.0;
};

// Downstream evaluation: a fresh model per seed trained on the distilled set,
// scored on the held-out test split.
struct EvalSpec {
  std::vector<long> hidden = {32};
  long epochs = 80;
  double lr = 0.1;
  long batch = 16;
  int seeds = 3;
  std::uint64_t seed = 1000;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  BudgetSpec budget;
  AllocationKnobs knobs;
  distill::DistillConfig distill;
  ExpertSpec expert;
  EvalSpec eval;
  double clip_radius = 8.0;        // moment-release clipping radius
  long synthetic_per_class = 100;  // size of the sampled synthetic set
  std::vector<long> extractor_hidden = {32};
  std::uint64_t seed = 7;          // master pipeline seed
};

struct RunReport {
  double epsilon = 0.0;
  double delta = 0.0;
  double mu_total = 0.0;
  double mu_g = 0.0;
  double mu_e = 0.0;
  double mu_f = 0.0;
  double sigma_g = 0.0;
  double sigma_e = 0.0;
  double sigma_f = 0.0;
  double ledger_mu = 0.0;
  double delta_spent = 0.0;  // ledger total converted at the configured epsilon
  bool budget_ok = false;
  double moment_distance = 0.0;
  double expert_accuracy = 0.0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  std::vector<double> accuracy_per_seed;
  std::vector<double> matching_loss;
  std::vector<double> guidance_loss;
  long undeclared_reads = 0;
  std::string ledger_text;
};

struct Task {
  data::LabeledSet train;
  data::LabeledSet test;
};

// Deterministic in spec.seed; train and test draw from the same class means.
Task make_task(const DatasetSpec& spec);

// Mean over classes of the 2-Wasserstein distance between the diagonal
// Gaussians described by two moment releases.
double moment_w2(const gen::DpMoments& a, const gen::DpMoments& b);

// Uniform per-class subset without replacement, the baseline competitor.
data::LabeledSet random_subset_per_class(const data::LabeledSet& set,
                                         long per_class, Rng& rng);

struct EvalResult {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> per_seed;
};

// Seeds run in parallel; deterministic for a given spec.seed.
EvalResult evaluate_distilled(const data::LabeledSet& distilled,
                              const data::LabeledSet& test,
                              const EvalSpec& spec);

struct PipelineResult {
  data::LabeledSet distilled;
  data::LabeledSet synthetic;  // the generator sample the run started from
  ledger::BudgetLedger audit;
  alloc::AllocationPlan plan;
  RunReport report;
};

// The full run: task synthesis, budget allocation, moment release, synthetic
// sampling, expert training, distillation, downstream evaluation, audit.
PipelineResult run_pipeline(const ExperimentConfig& config);

// Lossless round-trips; canonical output (sorted keys, full precision).
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const std::string& text);
std::string report_to_json(const RunReport& report);

// distilled.csv, ledger.txt, report.json, config.json, trace.csv under dir.
void write_artifacts(const std::string& dir, const ExperimentConfig& config,
                     const PipelineResult& result);

}  // namespace dpdistill::harness

#endif  // DPDISTILL_HARNESS_HPP_
