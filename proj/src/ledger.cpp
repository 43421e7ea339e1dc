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

#include "dpdistill/ledger.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "dpdistill/errors.hpp"

namespace dpdistill::ledger {

namespace {

double rss(const std::vector<double>& mus) {
  double sum_sq = 0.0;
  for (double m : mus) {
    if (std::isinf(m)) return std::numeric_limits<double>::infinity();
    sum_sq += m * m;
  }
  return std::sqrt(sum_sq);
}

double max_of(const std::vector<double>& mus) {
  double best = 0.0;
  for (double m : mus) best = std::max(best, m);
  return best;
}

const char* component_name(Component c) {
  switch (c) {
    case Component::kGeneration:
      return "generation";
    case Component::kExpert:
      return "expert";
    case Component::kMatching:
      return "matching";
  }
  return "?";
}

const char* component_rule(Component c) {
  switch (c) {
    case Component::kGeneration:
      return "sequential within class, parallel across classes";
    case Component::kExpert:
      return "sequential";
    case Component::kMatching:
      return "parallel within iteration, sequential across iterations";
  }
  return "?";
}

}  // namespace

void BudgetLedger::record(Component component, const std::string& mechanism,
                          long group, double sigma, double sensitivity,
                          double mu) {
  if (std::isnan(mu) || mu < 0.0) {
    throw std::invalid_argument("ledger entry needs mu >= 0");
  }
  if (std::isnan(sigma) || sigma < 0.0) {
    throw std::invalid_argument("ledger entry needs sigma >= 0");
  }
  if (std::isnan(sensitivity) || sensitivity < 0.0) {
    throw std::invalid_argument("ledger entry needs sensitivity >= 0");
  }
  entries_.push_back(Entry{component, mechanism, group, sigma, sensitivity, mu});
}

bool BudgetLedger::has_component(Component component) const {
  for (const Entry& e : entries_) {
    if (e.component == component) return true;
  }
  return false;
}

double BudgetLedger::component_mu(Component component) const {
  std::map<long, std::vector<double>> groups;
  for (const Entry& e : entries_) {
    if (e.component == component) groups[e.group].push_back(e.mu);
  }
  if (groups.empty()) return 0.0;

  std::vector<double> per_group;
  per_group.reserve(groups.size());
  for (const auto& [group, mus] : groups) {
    switch (component) {
      case Component::kGeneration:
        per_group.push_back(rss(mus));
        break;
      case Component::kMatching:
        per_group.push_back(max_of(mus));
        break;
      case Component::kExpert:
        // no disjointness to exploit; treat groups as a flat sequence
        per_group.push_back(rss(mus));
        break;
    }
  }
  switch (component) {
    case Component::kGeneration:
      return max_of(per_group);
    case Component::kMatching:
      return rss(per_group);
    case Component::kExpert:
      return rss(per_group);
  }
  return 0.0;
}

double BudgetLedger::total_mu() const {
  return rss({component_mu(Component::kGeneration),
              component_mu(Component::kExpert),
              component_mu(Component::kMatching)});
}

void BudgetLedger::set_budget(double mu_budget) {
  if (std::isnan(mu_budget) || mu_budget < 0.0) {
    throw std::invalid_argument("budget must be a nonnegative mu");
  }
  budget_ = mu_budget;
}

void BudgetLedger::enforce() const {
  if (budget_ < 0.0) return;
  const double total = total_mu();
  const double tolerance = budget_ * (1.0 + 1e-9) + 1e-12;
  if (total > tolerance) {
    std::ostringstream msg;
    msg << std::setprecision(12) << "ledger total mu = " << total
        << " exceeds budget mu = " << budget_;
    throw BudgetBreachError(msg.str());
  }
}

std::string BudgetLedger::to_text() const {
  std::ostringstream out;
  out << std::setprecision(6);
  out << "privacy ledger\n";
  if (budget_ >= 0.0) {
    out << "budget mu = " << budget_ << "\n";
  } else {
    out << "budget mu = none\n";
  }
  out << "total mu = " << total_mu() << "\n";
  for (Component c : {Component::kGeneration, Component::kExpert,
                      Component::kMatching}) {
    if (!has_component(c)) continue;
    out << "\n[" << component_name(c) << "] rule: " << component_rule(c)
        << "\n";
    out << "subtotal mu = " << component_mu(c) << "\n";
    for (const Entry& e : entries_) {
      if (e.component != c) continue;
      out << "  group " << e.group << "  " << e.mechanism
          << "  sigma=" << e.sigma << "  sensitivity=" << e.sensitivity
          << "  mu=" << e.mu << "\n";
    }
  }
  return out.str();
}

}  // namespace dpdistill::ledger
