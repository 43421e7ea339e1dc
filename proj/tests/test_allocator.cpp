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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "dpdistill/alloc.hpp"
#include "dpdistill/errors.hpp"
#include "dpdistill/gdp.hpp"

using dpdistill::BracketError;
using dpdistill::InfeasibleBudgetError;
using dpdistill::alloc::allocate;
using dpdistill::alloc::allocation_report;
using dpdistill::alloc::AllocationPlan;
using dpdistill::alloc::Direction;
using dpdistill::alloc::SamplingPlan;
using dpdistill::alloc::SearchBracket;
using dpdistill::alloc::search_noise_for_target;
using dpdistill::alloc::sigma_for_budget;
using dpdistill::alloc::UtilityProbe;
using dpdistill::gdp::DpBudget;
using dpdistill::gdp::GdpBudget;
using dpdistill::gdp::gdp_to_dp;
using dpdistill::gdp::SubsamplingSpec;
using dpdistill::gdp::subsampled_mu;

namespace {

// Inverts subsampled_mu in sigma by bisection, deliberately ignoring the
// closed form under test.
double invert_by_bisection(double mu, double p, long iterations) {
  double lo = 0.05, hi = 1e4;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    double got = subsampled_mu(SubsamplingSpec(p, iterations, mid)).mu;
    (got > mu ? lo : hi) = mid;  // mu decreases as sigma grows
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("sigma_for_budget inverts subsampled_mu") {
  double mu = subsampled_mu(SubsamplingSpec(0.1, 100, 2.0)).mu;
  CHECK(sigma_for_budget(GdpBudget(mu), 0.1, 100) ==
        doctest::Approx(2.0).epsilon(1e-9));

  CHECK(sigma_for_budget(GdpBudget(1.0), 1.0, 1) ==
        doctest::Approx(1.2011224087864498).epsilon(1e-14));  // 1/sqrt(ln 2)

  CHECK(sigma_for_budget(GdpBudget(1.496), 0.0256, 2000) ==
        doctest::Approx(1.002).epsilon(2e-3));
  CHECK(sigma_for_budget(GdpBudget(1.495996547197697), 0.0256, 2000) ==
        doctest::Approx(1.002).epsilon(1e-12));
}

TEST_CASE("sigma_for_budget agrees with independent bisection") {
  for (double mu : {0.3, 0.8, 1.496, 2.5}) {
    for (double p : {0.01, 0.1, 0.5, 1.0}) {
      for (long t : {10L, 200L, 2000L}) {
        CAPTURE(mu);
        CAPTURE(p);
        CAPTURE(t);
        CHECK(sigma_for_budget(GdpBudget(mu), p, t) ==
              doctest::Approx(invert_by_bisection(mu, p, t)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("sigma_for_budget round-trips over a random grid") {
  std::mt19937_64 gen(12345);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    double p = 0.001 + 0.999 * unif(gen);
    long t = 1 + static_cast<long>(unif(gen) * 5000);
    double sigma = 0.3 + 5.0 * unif(gen);
    double mu = subsampled_mu(SubsamplingSpec(p, t, sigma)).mu;
    double back = sigma_for_budget(GdpBudget(mu), p, t);
    CAPTURE(p);
    CAPTURE(t);
    CAPTURE(sigma);
    CHECK(back == doctest::Approx(sigma).epsilon(1e-9));
    CHECK(subsampled_mu(SubsamplingSpec(p, t, back)).mu ==
          doctest::Approx(mu).epsilon(1e-9));
  }
}

TEST_CASE("sigma_for_budget rejects bad inputs") {
  CHECK_THROWS_AS(sigma_for_budget(GdpBudget(0.0), 0.1, 100),
                  InfeasibleBudgetError);
  CHECK_THROWS_AS(sigma_for_budget(GdpBudget(1.0), 0.0, 100),
                  std::domain_error);
  CHECK_THROWS_AS(sigma_for_budget(GdpBudget(1.0), 1.5, 100),
                  std::domain_error);
  CHECK_THROWS_AS(sigma_for_budget(GdpBudget(1.0), 0.1, 0), std::domain_error);
}

TEST_CASE("allocate reproduces the published splits") {
  SamplingPlan matching{0.0256, 2000};
  SamplingPlan expert{0.1, 500};

  AllocationPlan at10 = allocate(DpBudget(10.0, 1e-5), GdpBudget(0.27),
                                 GdpBudget(1.30), matching, expert);
  CHECK(at10.mu_total.mu == doctest::Approx(2.000445620430632).epsilon(1e-9));
  CHECK(at10.mu_f.mu == doctest::Approx(1.4962896378375738).epsilon(1e-9));
  CHECK(at10.sigma_g == doctest::Approx(1.0 / 0.27).epsilon(1e-12));

  AllocationPlan at20 = allocate(DpBudget(20.0, 1e-5), GdpBudget(0.50),
                                 GdpBudget(2.31), matching, expert);
  CHECK(at20.mu_total.mu == doctest::Approx(3.4477834468693954).epsilon(1e-9));
  CHECK(at20.mu_f.mu == doctest::Approx(2.50).epsilon(0.02 / 2.50));
  CHECK(at20.mu_f.mu == doctest::Approx(2.5102013258913335).epsilon(1e-9));
}

TEST_CASE("allocate conserves the budget") {
  SamplingPlan matching{0.05, 1500};
  SamplingPlan expert{0.2, 300};
  for (double eps : {1.0, 4.0, 10.0, 20.0}) {
    double mu_total = dpdistill::gdp::dp_to_gdp(DpBudget(eps, 1e-5)).mu;
    AllocationPlan plan =
        allocate(DpBudget(eps, 1e-5), GdpBudget(0.15 * mu_total),
                 GdpBudget(0.6 * mu_total), matching, expert);
    double sum_sq = plan.mu_g.mu * plan.mu_g.mu + plan.mu_e.mu * plan.mu_e.mu +
                    plan.mu_f.mu * plan.mu_f.mu;
    CAPTURE(eps);
    CHECK(sum_sq == doctest::Approx(plan.mu_total.mu * plan.mu_total.mu)
                        .epsilon(1e-9));
    // Sequential composition of the three parts, converted back to DP, may
    // never exceed the declared delta.
    GdpBudget composed =
        dpdistill::gdp::compose({plan.mu_g.mu, plan.mu_e.mu, plan.mu_f.mu});
    double realized = gdp_to_dp(composed, eps).delta;
    CHECK(realized <= 1e-5 * (1.0 + 1e-9));
    CHECK(plan.delta_slack >= 0.0);
    // Derived noise multipliers spend exactly the assigned share.
    CHECK(subsampled_mu(plan.spec_f).mu ==
          doctest::Approx(plan.mu_f.mu).epsilon(1e-9));
    CHECK(subsampled_mu(plan.spec_e).mu ==
          doctest::Approx(plan.mu_e.mu).epsilon(1e-9));
  }
}

TEST_CASE("allocate is monotone in the fixed components") {
  SamplingPlan matching{0.0256, 2000};
  SamplingPlan expert{0.1, 500};
  DpBudget total(10.0, 1e-5);
  AllocationPlan base =
      allocate(total, GdpBudget(0.27), GdpBudget(1.30), matching, expert);
  AllocationPlan more_g =
      allocate(total, GdpBudget(0.40), GdpBudget(1.30), matching, expert);
  AllocationPlan more_e =
      allocate(total, GdpBudget(0.27), GdpBudget(1.50), matching, expert);
  CHECK(more_g.mu_f.mu < base.mu_f.mu);
  CHECK(more_e.mu_f.mu < base.mu_f.mu);
  CHECK(more_g.sigma_f > base.sigma_f);
  CHECK(more_e.sigma_f > base.sigma_f);
}

TEST_CASE("allocate refuses overspent budgets") {
  CHECK_THROWS_WITH_AS(
      allocate(DpBudget(10.0, 1e-5), GdpBudget(2.0), GdpBudget(2.0), 0.1, 100),
      doctest::Contains("mu_g = 2"), InfeasibleBudgetError);
  CHECK_THROWS_AS(
      allocate(DpBudget(10.0, 1e-5), GdpBudget(0.0), GdpBudget(1.0), 0.1, 100),
      std::domain_error);
}

TEST_CASE("search_noise_for_target finds analytic crossings") {
  UtilityProbe inverse{[](double s) { return 1.0 / s; }, 2.0,
                       Direction::kMinimize};
  CHECK(search_noise_for_target(inverse, SearchBracket{0.1, 10.0}, 1e-9) ==
        doctest::Approx(0.5).epsilon(1e-7));

  UtilityProbe square{[](double s) { return s * s; }, 9.0,
                      Direction::kMaximize};
  CHECK(search_noise_for_target(square, SearchBracket{1.0, 5.0}, 1e-9) ==
        doctest::Approx(3.0).epsilon(1e-7));
}

TEST_CASE("search_noise_for_target is deterministic") {
  auto run = [] {
    UtilityProbe probe{[](double s) { return std::exp(-s) * 100.0; }, 30.0,
                       Direction::kMaximize};
    return search_noise_for_target(probe, SearchBracket{0.2, 4.0}, 1e-10);
  };
  double first = run();
  double second = run();
  CHECK(first == second);  // bit identical
}

TEST_CASE("search_noise_for_target reports unbracketed targets") {
  UtilityProbe probe{[](double s) { return s; }, 100.0, Direction::kMaximize};
  try {
    search_noise_for_target(probe, SearchBracket{1.0, 2.0}, 1e-6);
    FAIL("expected a bracket error");
  } catch (const BracketError& e) {
    CHECK(e.lo_score == doctest::Approx(1.0));
    CHECK(e.hi_score == doctest::Approx(2.0));
  }
  CHECK_THROWS_AS(
      search_noise_for_target(probe, SearchBracket{2.0, 1.0}, 1e-6),
      std::domain_error);
}

TEST_CASE("allocation_report lists every component") {
  AllocationPlan plan =
      allocate(DpBudget(10.0, 1e-5), GdpBudget(0.27), GdpBudget(1.30),
               SamplingPlan{0.0256, 2000}, SamplingPlan{0.1, 500});
  std::string report = allocation_report(plan);
  CHECK(report.find("generator moments") != std::string::npos);
  CHECK(report.find("expert fine-tune") != std::string::npos);
  CHECK(report.find("feature matching") != std::string::npos);
  CHECK(report.find("delta slack") != std::string::npos);
  CHECK(report.find("0.27") != std::string::npos);
  CHECK(report.find("1.3") != std::string::npos);
}
