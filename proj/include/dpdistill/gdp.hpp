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

#ifndef DPDISTILL_GDP_HPP_
#define DPDISTILL_GDP_HPP_

#include <initializer_list>
#include <span>

namespace dpdistill::gdp {

// Gaussian differential privacy parameter mu >= 0. mu = 0 is a perfectly
// private (data-independent) mechanism; smaller is more private.
struct GdpBudget {
  double mu = 0.0;

  GdpBudget() = default;
  explicit GdpBudget(double mu_value);  // validates mu >= 0; infinity allowed
};

// Classical approximate DP budget (epsilon, delta).
struct DpBudget {
  double epsilon = 0.0;
  double delta = 0.0;

  DpBudget() = default;
  DpBudget(double epsilon_value, double delta_value);  // validates ranges
};

// Poisson-subsampled Gaussian mechanism: sampling probability p, iteration
// count, noise multiplier sigma (noise stddev / sensitivity).
struct SubsamplingSpec {
  double p = 1.0;
  long iterations = 1;
  double sigma = 1.0;

  SubsamplingSpec() = default;
  SubsamplingSpec(double p_value, long iteration_count, double sigma_value);
};

// Noise multipliers below this make exp(1/sigma^2) meaningless; subsampled_mu
// refuses them.
inline constexpr double kMinSubsamplingSigma = 0.05;

// Standard normal CDF, absolute error <= 1e-12 over |x| <= 10.
double normal_cdf(double x);

// Inverse of normal_cdf on (0, 1); returns +/-infinity at the endpoints.
double normal_quantile(double p);

// log(normal_cdf(x)), stable deep into the lower tail where the CDF itself
// underflows.
double log_normal_cdf(double x);

// Gaussian mechanism with the given L2 sensitivity and noise standard
// deviation (in the statistic's units) is (sensitivity / stddev)-GDP.
GdpBudget gaussian_mechanism_mu(double sensitivity, double sigma_noise);

// Sequential composition: sqrt(mu_1^2 + ... + mu_n^2).
GdpBudget compose(std::span<const GdpBudget> budgets);
GdpBudget compose(std::initializer_list<double> mus);

// Parallel composition over disjoint data shards: max(mu_1, ..., mu_k).
GdpBudget compose_parallel(std::span<const GdpBudget> budgets);
GdpBudget compose_parallel(std::initializer_list<double> mus);

// delta(epsilon) = Phi(-eps/mu + mu/2) - e^eps * Phi(-eps/mu - mu/2),
// with the second term evaluated in log space to survive large eps.
DpBudget gdp_to_dp(GdpBudget mu, double epsilon);

// The unique mu with gdp_to_dp(mu, eps).delta = delta. Biased toward the
// private side, usually by a few ulps, so that converting back never exceeds
// the requested delta.
GdpBudget dp_to_gdp(const DpBudget& target);

// mu = p * sqrt(T * (e^{1/sigma^2} - 1)) for the Poisson-subsampled Gaussian
// mechanism. The closed form is the asymptotic (T -> inf) limit; it is
// applied at finite T throughout, matching how the allocation formulas use it.
GdpBudget subsampled_mu(const SubsamplingSpec& spec);

// Trade-off function G_mu(x) = Phi(Phi^{-1}(1 - x) - mu) on [0, 1].
double tradeoff_gmu(GdpBudget mu, double x);

struct TradeoffCurve {
  GdpBudget mu;
  double operator()(double x) const { return tradeoff_gmu(mu, x); }
};

}  // namespace dpdistill::gdp

#endif  // DPDISTILL_GDP_HPP_
