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

#include "dpdistill/alloc.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dpdistill/errors.hpp"

namespace dpdistill::alloc {

double sigma_for_budget(gdp::GdpBudget mu_f, double p, long iterations) {
  if (mu_f.mu <= 0.0 || !std::isfinite(mu_f.mu)) {
    throw InfeasibleBudgetError(
        "sigma_for_budget needs a positive finite mu, got " +
        std::to_string(mu_f.mu));
  }
  if (!(p > 0.0) || p > 1.0) {
    throw std::domain_error("sampling probability must be in (0, 1], got " +
                            std::to_string(p));
  }
  if (iterations <= 0) {
    throw std::domain_error("iteration count must be positive, got " +
                            std::to_string(iterations));
  }
  double ratio = mu_f.mu * mu_f.mu /
                 (p * p * static_cast<double>(iterations));
  double sigma = 1.0 / std::sqrt(std::log1p(ratio));
  if (sigma < gdp::kMinSubsamplingSigma) {
    throw std::domain_error(
        "budget mu = " + std::to_string(mu_f.mu) +
        " would need a noise multiplier below the supported minimum");
  }
  return sigma;
}

AllocationPlan allocate(const gdp::DpBudget& total, gdp::GdpBudget mu_g,
                        gdp::GdpBudget mu_e, const SamplingPlan& matching,
                        const SamplingPlan& expert) {
  if (mu_g.mu <= 0.0 || mu_e.mu <= 0.0) {
    throw std::domain_error(
        "allocate needs positive mu_g and mu_e; pass the non-private path "
        "around the allocator instead of a zero budget");
  }
  AllocationPlan plan;
  plan.mu_total = gdp::dp_to_gdp(total);
  plan.epsilon_total = total.epsilon;
  plan.delta_total = total.delta;
  plan.delta_slack =
      total.delta - gdp::gdp_to_dp(plan.mu_total, total.epsilon).delta;

  double remainder = plan.mu_total.mu * plan.mu_total.mu - mu_g.mu * mu_g.mu -
                     mu_e.mu * mu_e.mu;
  if (remainder <= 0.0) {
    std::ostringstream msg;
    msg << "budget infeasible: mu_g = " << mu_g.mu << " and mu_e = " << mu_e.mu
        << " already spend " << std::sqrt(mu_g.mu * mu_g.mu + mu_e.mu * mu_e.mu)
        << " of the total mu = " << plan.mu_total.mu
        << "; nothing is left for feature matching";
    throw InfeasibleBudgetError(msg.str());
  }

  plan.mu_g = mu_g;
  plan.mu_e = mu_e;
  plan.mu_f = gdp::GdpBudget(std::sqrt(remainder));
  plan.sigma_g = 1.0 / mu_g.mu;
  plan.sigma_e = sigma_for_budget(mu_e, expert.p, expert.iterations);
  plan.sigma_f = sigma_for_budget(plan.mu_f, matching.p, matching.iterations);
  plan.spec_f =
      gdp::SubsamplingSpec(matching.p, matching.iterations, plan.sigma_f);
  plan.spec_e = gdp::SubsamplingSpec(expert.p, expert.iterations, plan.sigma_e);
  return plan;
}

AllocationPlan allocate(const gdp::DpBudget& total, gdp::GdpBudget mu_g,
                        gdp::GdpBudget mu_e, double p, long iterations) {
  return allocate(total, mu_g, mu_e, SamplingPlan{p, iterations},
                  SamplingPlan{1.0, 1});
}

double search_noise_for_target(const UtilityProbe& probe,
                               const SearchBracket& bracket, double tol) {
  if (!probe.evaluate) {
    throw std::invalid_argument("probe has no evaluate function");
  }
  if (!(bracket.lo > 0.0) || !(bracket.hi > bracket.lo)) {
    throw std::domain_error("bracket must satisfy 0 < lo < hi");
  }
  if (!(tol > 0.0)) {
    throw std::domain_error("tolerance must be positive");
  }

  double lo = bracket.lo;
  double hi = bracket.hi;
  double f_lo = probe.evaluate(lo) - probe.target;
  double f_hi = probe.evaluate(hi) - probe.target;
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  if ((f_lo > 0.0) == (f_hi > 0.0)) {
    std::ostringstream msg;
    msg << "target " << probe.target << " is not bracketed: probe("
        << bracket.lo << ") = " << f_lo + probe.target << ", probe("
        << bracket.hi << ") = " << f_hi + probe.target;
    throw BracketError(msg.str(), f_lo + probe.target, f_hi + probe.target);
  }

  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    double f_mid = probe.evaluate(mid) - probe.target;
    if (f_mid == 0.0) return mid;
    if ((f_mid > 0.0) == (f_lo > 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::string allocation_report(const AllocationPlan& plan) {
  std::ostringstream out;
  out.precision(6);
  out << "privacy budget allocation\n"
      << "  total: epsilon = " << plan.epsilon_total
      << ", delta = " << plan.delta_total << ", mu = " << plan.mu_total.mu
      << "\n"
      << "  generator moments: mu = " << plan.mu_g.mu
      << ", sigma = " << plan.sigma_g << "\n"
      << "  expert fine-tune:  mu = " << plan.mu_e.mu
      << ", sigma = " << plan.sigma_e << " (p = " << plan.spec_e.p
      << ", rounds = " << plan.spec_e.iterations << ")\n"
      << "  feature matching:  mu = " << plan.mu_f.mu
      << ", sigma = " << plan.sigma_f << " (p = " << plan.spec_f.p
      << ", rounds = " << plan.spec_f.iterations << ")\n"
      << "  residual delta slack = " << plan.delta_slack << "\n";
  return out.str();
}

}  // namespace dpdistill::alloc
