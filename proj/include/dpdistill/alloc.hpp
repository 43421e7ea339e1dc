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

#ifndef DPDISTILL_ALLOC_HPP_
#define DPDISTILL_ALLOC_HPP_

#include <functional>
#include <string>

#include "dpdistill/gdp.hpp"

namespace dpdistill::alloc {

// Sampling context of one subsampled mechanism: probability p per element
// per round and the number of rounds.
struct SamplingPlan {
  double p = 1.0;
  long iterations = 1;
};

// Split of a total (epsilon, delta) budget across the three mechanisms that
// touch private data: moment release for the generator (g), expert
// fine-tuning (e), and feature matching (f). Noise multipliers are derived
// so each component spends exactly its share.
struct AllocationPlan {
  gdp::GdpBudget mu_total;
  gdp::GdpBudget mu_g;
  gdp::GdpBudget mu_e;
  gdp::GdpBudget mu_f;
  double sigma_g = 0.0;
  double sigma_e = 0.0;
  double sigma_f = 0.0;
  gdp::SubsamplingSpec spec_f;
  gdp::SubsamplingSpec spec_e;
  double epsilon_total = 0.0;
  double delta_total = 0.0;
  // delta_total minus the delta actually realized at mu_total; >= 0 because
  // the DP-to-GDP conversion rounds toward the private side.
  double delta_slack = 0.0;
};

// Noise multiplier that makes a (p, T)-subsampled Gaussian mechanism spend
// exactly mu_f: sigma = [ln(1 + mu_f^2 / (p^2 T))]^{-1/2}, the functional
// inverse of subsampled_mu.
double sigma_for_budget(gdp::GdpBudget mu_f, double p, long iterations);

// Fixed-priority split: mu_g and mu_e are chosen by the caller (typically by
// utility-targeted search), feature matching gets the remainder
// mu_f = sqrt(mu_total^2 - mu_g^2 - mu_e^2).
AllocationPlan allocate(const gdp::DpBudget& total, gdp::GdpBudget mu_g,
                        gdp::GdpBudget mu_e, const SamplingPlan& matching,
                        const SamplingPlan& expert);

// Same split with the expert mechanism treated as a single full-batch
// release (p = 1, one round).
AllocationPlan allocate(const gdp::DpBudget& total, gdp::GdpBudget mu_g,
                        gdp::GdpBudget mu_e, double p, long iterations);

enum class Direction { kMinimize, kMaximize };

// A scalar experiment outcome as a function of a noise multiplier, assumed
// monotone over the searched bracket.
struct UtilityProbe {
  std::function<double(double)> evaluate;
  double target = 0.0;
  Direction direction = Direction::kMinimize;
};

struct SearchBracket {
  double lo = 0.0;
  double hi = 0.0;
};

// Bisection for the sigma at which probe.evaluate crosses probe.target.
// The endpoints must straddle the target; if they do not (including the case
// of a non-monotone probe), a bracket error carrying both endpoint scores is
// thrown. Deterministic whenever the probe is.
double search_noise_for_target(const UtilityProbe& probe,
                               const SearchBracket& bracket, double tol);

// Human-readable summary: total budget, per-component mu and sigma, residual
// delta slack.
std::string allocation_report(const AllocationPlan& plan);

}  // namespace dpdistill::alloc

#endif  // DPDISTILL_ALLOC_HPP_
