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

#ifndef DPDISTILL_LEDGER_HPP_
#define DPDISTILL_LEDGER_HPP_

#include <string>
#include <vector>

namespace dpdistill::ledger {

enum class Component { kGeneration, kExpert, kMatching };

// One mechanism invocation. `group` partitions invocations for composition:
// generation groups by class (sequential within a class, parallel across,
// because classes are disjoint shards), matching groups by iteration
// (parallel across classes inside one iteration, sequential across
// iterations), the expert composes sequentially.
struct Entry {
  Component component;
  std::string mechanism;
  long group = 0;
  double sigma = 0.0;
  double sensitivity = 0.0;
  double mu = 0.0;
};

// Audit trail of every privacy-consuming invocation, with the composition
// arithmetic to turn it into a total GDP cost.
class BudgetLedger {
 public:
  void record(Component component, const std::string& mechanism, long group,
              double sigma, double sensitivity, double mu);

  bool has_component(Component component) const;
  // GDP cost of one component after applying its composition rules.
  double component_mu(Component component) const;
  // Sequential composition of the three component costs.
  double total_mu() const;

  // Declared ceiling; enforce() throws BudgetBreachError beyond it.
  void set_budget(double mu_budget);
  double budget() const { return budget_; }
  void enforce() const;

  const std::vector<Entry>& entries() const { return entries_; }

  // The audit artifact: every invocation, per-component subtotals with the
  // rules applied, the total, and the declared budget.
  std::string to_text() const;

 private:
  std::vector<Entry> entries_;
  double budget_ = -1.0;  // negative = no ceiling declared
};

}  // namespace dpdistill::ledger

#endif  // DPDISTILL_LEDGER_HPP_
