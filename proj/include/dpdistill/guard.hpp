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

#ifndef DPDISTILL_GUARD_HPP_
#define DPDISTILL_GUARD_HPP_

#include <array>
#include <utility>

#include "dpdistill/dataset.hpp"

namespace dpdistill::data {

// The mechanisms that are allowed to read private rows. Anything else goes
// through kUndeclared, which audits must find at zero.
enum class Mechanism : int {
  kMomentRelease = 0,
  kExpertFineTune = 1,
  kFeatureMatching = 2,
  kUndeclared = 3,
};

inline constexpr int kMechanismCount = 4;

// Instrumented wrapper around the private set. Row data is only reachable
// through access(mechanism), and every call is counted; shape metadata
// (sizes, dimension, class counts) is free, matching the convention that
// these are public facts about the task, not the records.
class PrivateDataset {
 public:
  explicit PrivateDataset(LabeledSet set) : set_(std::move(set)) {}

  const LabeledSet& access(Mechanism m) {
    ++reads_[static_cast<size_t>(m)];
    return set_;
  }

  // Undeclared escape hatch; audited to zero in any honest run.
  const LabeledSet& raw() { return access(Mechanism::kUndeclared); }

  long size() const { return set_.size(); }
  long dim() const { return set_.dim(); }
  int num_classes() const { return set_.num_classes(); }
  long class_count(int label) const { return set_.class_count(label); }

  long reads(Mechanism m) const { return reads_[static_cast<size_t>(m)]; }
  long undeclared_reads() const { return reads(Mechanism::kUndeclared); }
  long total_reads() const {
    long total = 0;
    for (long r : reads_) total += r;
    return total;
  }

 private:
  LabeledSet set_;
  std::array<long, kMechanismCount> reads_{};
};

}  // namespace dpdistill::data

#endif  // DPDISTILL_GUARD_HPP_
