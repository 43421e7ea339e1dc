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

#ifndef DPDISTILL_DISTILL_HPP_
#define DPDISTILL_DISTILL_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dpdistill/alloc.hpp"
#include "dpdistill/dataset.hpp"
#include "dpdistill/guard.hpp"
#include "dpdistill/ledger.hpp"
#include "dpdistill/nn.hpp"
#include "dpdistill/rng.hpp"

namespace dpdistill::distill {

struct DistillConfig {
  long ipc = 10;
  long iterations = 100;
  double clip_norm = 1.0;      // feature clip bound C
  double sigma_f = 0.0;        // matching noise multiplier
  double eta_f = 0.1;          // matching step size
  double eta_e = 0.01;         // guidance step size
  long private_batch = 128;    // nominal Poisson batch per class
  long ref_batch = 32;         // references per guidance step
  long pool_size = 5;          // extractors drawn from when building a pool
  std::uint64_t seed = 0;
  // When false, matching targets the public synthetic set noise-free and
  // spends no matching budget; the default targets the private set.
  bool match_private = true;
  // Frobenius cap on each applied update, a guard against noise blowup.
  double update_clip = 1e3;
};

struct DistillResult {
  data::LabeledSet distilled;
  ledger::BudgetLedger audit;
  // Per-iteration means over classes.
  std::vector<double> matching_loss;
  std::vector<double> guidance_loss;
};

// Mean of norm-clipped extractor features over a slice; the result's norm
// never exceeds clip_norm.
Eigen::VectorXd clipped_mean_feature(const nn::ModelParams& extractor,
                                     const data::LabeledSet& slice,
                                     double clip_norm);

// Squared distance between the noised clipped-mean feature of the target
// batch and the clipped-mean feature of the distilled slice. The noise
// standard deviation is sigma_f * clip_norm per coordinate, drawn fresh from
// rng on every call. The gradient flows only through the distilled slice; if
// d_slice is non-null it receives one row per distilled point.
double feature_matching_loss(const nn::ModelParams& extractor,
                             const data::LabeledSet& target_batch,
                             const data::LabeledSet& distilled_slice,
                             double clip_norm, double sigma_f, Rng& rng,
                             Eigen::MatrixXd* d_slice = nullptr);

// Mean over the distilled slice of cross-entropy against the slice's label
// plus KL between the point's softmax and the softmax of the mean reference
// logit vector. References and slice must share one class.
double expert_guidance_loss(const nn::ModelParams& expert,
                            const data::LabeledSet& distilled_slice,
                            const data::LabeledSet& references,
                            Eigen::MatrixXd* d_slice = nullptr);

// The distillation loop: k-means initialization from the synthetic set, then
// per iteration one uniformly drawn extractor, per class a Poisson batch,
// a matching step and a guidance step. Returns the distilled set plus the
// audit ledger (matching entries per iteration and class; generation and
// expert entries carried over from starting_ledger when given, otherwise
// summarized from the plan). Throws BudgetBreachError if the ledger total
// exceeds the plan's total budget and DivergenceError if any distilled
// coordinate goes non-finite.
DistillResult distill(data::PrivateDataset& private_set,
                      const data::LabeledSet& synthetic,
                      const std::vector<nn::ModelParams>& extractor_pool,
                      const nn::ModelParams& expert,
                      const DistillConfig& config,
                      const alloc::AllocationPlan& plan,
                      const ledger::BudgetLedger* starting_ledger = nullptr);

}  // namespace dpdistill::distill

#endif  // DPDISTILL_DISTILL_HPP_
