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

#ifndef DPDISTILL_ERRORS_HPP_
#define DPDISTILL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dpdistill {

// Requested (mu_G, mu_E) do not fit inside the total budget, or a component
// budget is non-positive where a positive one is required.
class InfeasibleBudgetError : public std::domain_error {
 public:
  explicit InfeasibleBudgetError(const std::string& what)
      : std::domain_error(what) {}
};

// A bracketed search was called with endpoints that do not straddle the
// target value.
class BracketError : public std::runtime_error {
 public:
  BracketError(const std::string& what, double lo_score, double hi_score)
      : std::runtime_error(what), lo_score(lo_score), hi_score(hi_score) {}
  double lo_score;
  double hi_score;
};

// An iterative solver exhausted its bracket or iteration budget.
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what)
      : std::runtime_error(what) {}
};

// The running privacy ledger exceeded the declared total budget.
class BudgetBreachError : public std::runtime_error {
 public:
  explicit BudgetBreachError(const std::string& what)
      : std::runtime_error(what) {}
};

// Optimization produced a non-finite coordinate.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long iteration)
      : std::runtime_error(what), iteration(iteration) {}
  long iteration;
};

// Malformed input file; `line` is 1-based, 0 when not line-addressable.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long line = 0)
      : std::runtime_error(what), line(line) {}
  long line;
};

// Tensor/vector dimension mismatch.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what)
      : std::invalid_argument(what) {}
};

}  // namespace dpdistill

#endif  // DPDISTILL_ERRORS_HPP_
