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

#include "dpdistill/gdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpdistill/errors.hpp"

namespace dpdistill::gdp {
namespace {

constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))
constexpr double kInf = std::numeric_limits<double>::infinity();

double normal_pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }

// Rational approximation for the normal quantile (Acklam). Relative error
// ~1e-9 before refinement.
double quantile_estimate(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

GdpBudget::GdpBudget(double mu_value) : mu(mu_value) {
  if (std::isnan(mu_value) || mu_value < 0.0) {
    throw std::domain_error("GDP parameter mu must be >= 0, got " +
                            std::to_string(mu_value));
  }
}

DpBudget::DpBudget(double epsilon_value, double delta_value)
    : epsilon(epsilon_value), delta(delta_value) {
  if (std::isnan(epsilon_value) || epsilon_value < 0.0) {
    throw std::domain_error("epsilon must be >= 0, got " +
                            std::to_string(epsilon_value));
  }
  if (std::isnan(delta_value) || delta_value < 0.0 || delta_value > 1.0) {
    throw std::domain_error("delta must be in [0, 1], got " +
                            std::to_string(delta_value));
  }
}

SubsamplingSpec::SubsamplingSpec(double p_value, long iteration_count,
                                 double sigma_value)
    : p(p_value), iterations(iteration_count), sigma(sigma_value) {
  if (std::isnan(p_value) || p_value < 0.0 || p_value > 1.0) {
    throw std::domain_error("sampling probability must be in [0, 1], got " +
                            std::to_string(p_value));
  }
  if (iteration_count < 0) {
    throw std::domain_error("iteration count must be >= 0, got " +
                            std::to_string(iteration_count));
  }
  if (std::isnan(sigma_value) || sigma_value <= 0.0) {
    throw std::domain_error("noise multiplier must be > 0, got " +
                            std::to_string(sigma_value));
  }
}

double normal_cdf(double x) {
  // erfc keeps full relative precision in the lower tail, unlike
  // 0.5 * (1 + erf(x / sqrt(2))).
  return 0.5 * std::erfc(-x / kSqrt2);
}

double normal_quantile(double p) {
  if (std::isnan(p) || p < 0.0 || p > 1.0) {
    throw std::domain_error("quantile argument must be in [0, 1], got " +
                            std::to_string(p));
  }
  if (p == 0.0) return -kInf;
  if (p == 1.0) return kInf;

  double x = quantile_estimate(p);
  // One Halley step pushes the error to the target's rounding level.
  for (int i = 0; i < 2; ++i) {
    double e = normal_cdf(x) - p;
    double u = e / normal_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double log_normal_cdf(double x) {
  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  if (x >= -8.0) {
    // erfc is accurate here and 0.5*erfc does not underflow until x ~ -37,
    // but the log of it loses precision well before that; -8 keeps both
    // branches comfortably inside their sweet spots.
    return std::log(normal_cdf(x));
  }
  // Asymptotic expansion of Mills' ratio:
  //   Phi(x) ~ phi(x)/(-x) * (1 - 1/x^2 + 3/x^4 - 15/x^6 + ...)
  // Terms are added while they keep shrinking; at |x| >= 8 the truncation
  // error is far below double precision.
  double inv_x2 = 1.0 / (x * x);
  double term = 1.0;
  double series = 1.0;
  double coeff = 1.0;
  for (int k = 1; k < 40; ++k) {
    coeff *= static_cast<double>(2 * k - 1);
    double next = coeff * std::pow(inv_x2, k);
    if (next >= std::abs(term)) break;
    term = (k % 2 == 0) ? next : -next;
    series += term;
    if (next < 1e-18 * series) break;
  }
  return -0.5 * x * x - kLogSqrt2Pi - std::log(-x) + std::log(series);
}

GdpBudget gaussian_mechanism_mu(double sensitivity, double sigma_noise) {
  if (std::isnan(sensitivity) || sensitivity < 0.0) {
    throw std::domain_error("sensitivity must be >= 0, got " +
                            std::to_string(sensitivity));
  }
  if (std::isnan(sigma_noise) || sigma_noise < 0.0) {
    throw std::domain_error("noise stddev must be >= 0, got " +
                            std::to_string(sigma_noise));
  }
  if (sigma_noise == 0.0) {
    if (sensitivity == 0.0) return GdpBudget(0.0);
    GdpBudget unbounded;
    unbounded.mu = kInf;
    return unbounded;
  }
  return GdpBudget(sensitivity / sigma_noise);
}

GdpBudget compose(std::span<const GdpBudget> budgets) {
  double sum_sq = 0.0;
  for (const GdpBudget& b : budgets) {
    if (std::isinf(b.mu)) {
      GdpBudget unbounded;
      unbounded.mu = kInf;
      return unbounded;
    }
    sum_sq += b.mu * b.mu;
  }
  return GdpBudget(std::sqrt(sum_sq));
}

GdpBudget compose(std::initializer_list<double> mus) {
  std::vector<GdpBudget> budgets;
  budgets.reserve(mus.size());
  for (double m : mus) budgets.push_back(GdpBudget(m));
  return compose(std::span<const GdpBudget>(budgets));
}

GdpBudget compose_parallel(std::span<const GdpBudget> budgets) {
  double worst = 0.0;
  for (const GdpBudget& b : budgets) worst = std::max(worst, b.mu);
  GdpBudget result;
  result.mu = worst;
  return result;
}

GdpBudget compose_parallel(std::initializer_list<double> mus) {
  std::vector<GdpBudget> budgets;
  budgets.reserve(mus.size());
  for (double m : mus) budgets.push_back(GdpBudget(m));
  return compose_parallel(std::span<const GdpBudget>(budgets));
}

DpBudget gdp_to_dp(GdpBudget mu, double epsilon) {
  if (std::isnan(epsilon) || epsilon < 0.0) {
    throw std::domain_error("epsilon must be >= 0, got " +
                            std::to_string(epsilon));
  }
  if (mu.mu == 0.0) return DpBudget(epsilon, 0.0);
  if (std::isinf(mu.mu)) return DpBudget(epsilon, 1.0);

  double a = -epsilon / mu.mu + 0.5 * mu.mu;
  double b = -epsilon / mu.mu - 0.5 * mu.mu;
  // The subtracted term is exp(eps) * Phi(b); both factors overflow or
  // underflow on their own long before their product does.
  double delta = normal_cdf(a) - std::exp(epsilon + log_normal_cdf(b));
  delta = std::clamp(delta, 0.0, 1.0);
  return DpBudget(epsilon, delta);
}

GdpBudget dp_to_gdp(const DpBudget& target) {
  if (target.delta <= 0.0) {
    throw std::domain_error(
        "conversion to GDP needs delta > 0; delta = 0 admits no finite mu");
  }
  if (target.delta >= 1.0) {
    throw std::domain_error("delta >= 1 places no constraint on mu");
  }
  double eps = target.epsilon;
  auto delta_of = [eps](double mu) {
    return gdp_to_dp(GdpBudget(mu), eps).delta;
  };

  double lo = 1e-6;
  double hi = 1e3;
  if (delta_of(lo) > target.delta) {
    throw BracketError(
        "requested delta is below the delta of the smallest bracketed mu",
        delta_of(lo), delta_of(hi));
  }
  if (delta_of(hi) < target.delta) {
    throw BracketError("requested delta exceeds the delta at mu = 1e3",
                       delta_of(lo), delta_of(hi));
  }

  // delta(mu) is strictly increasing in mu, so plain bisection cannot fail.
  for (int i = 0; i < 120 && hi - lo > 1e-9 * std::max(1.0, lo); ++i) {
    double mid = 0.5 * (lo + hi);
    (delta_of(mid) < target.delta ? lo : hi) = mid;
  }

  // d(delta)/d(mu) = phi(mu/2 - eps/mu); two Newton steps polish the root
  // to the last ulp or so.
  double mu = 0.5 * (lo + hi);
  for (int i = 0; i < 2; ++i) {
    double slope = normal_pdf(0.5 * mu - eps / mu);
    if (slope <= 0.0) break;
    double step = (delta_of(mu) - target.delta) / slope;
    double candidate = mu - step;
    if (candidate > 0.0 && std::isfinite(candidate)) mu = candidate;
  }

  // Round toward the private side: the returned mu must never convert back
  // to a delta above the request.
  for (int i = 0; i < 64 && delta_of(mu) > target.delta; ++i) {
    mu = std::nextafter(mu, 0.0);
  }
  if (delta_of(mu) > target.delta || mu <= 0.0) {
    // Deep in the lower tail the closed form subtracts two nearly equal
    // terms, and the computed delta jitters over windows wider than 64 ulps
    // of mu. The bisection kept delta_of(lo) <= target throughout, so lo is
    // a safe answer within the bisection tolerance.
    mu = lo;
  }
  return GdpBudget(mu);
}

GdpBudget subsampled_mu(const SubsamplingSpec& spec) {
  if (spec.sigma < kMinSubsamplingSigma) {
    throw std::domain_error(
        "noise multiplier " + std::to_string(spec.sigma) +
        " is below the supported minimum " +
        std::to_string(kMinSubsamplingSigma) +
        "; exp(1/sigma^2) overflows and the closed form is meaningless there");
  }
  double t = static_cast<double>(spec.iterations);
  return GdpBudget(spec.p * std::sqrt(t * std::expm1(1.0 / (spec.sigma * spec.sigma))));
}

double tradeoff_gmu(GdpBudget mu, double x) {
  if (std::isnan(x) || x < 0.0 || x > 1.0) {
    throw std::domain_error("trade-off input must be in [0, 1], got " +
                            std::to_string(x));
  }
  if (x == 0.0) return std::isinf(mu.mu) ? 0.0 : 1.0;
  if (x == 1.0) return 0.0;
  if (std::isinf(mu.mu)) return 0.0;
  return normal_cdf(normal_quantile(1.0 - x) - mu.mu);
}

}  // namespace dpdistill::gdp
