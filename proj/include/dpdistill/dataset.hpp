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

#ifndef DPDISTILL_DATASET_HPP_
#define DPDISTILL_DATASET_HPP_

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

namespace dpdistill::data {

// A labeled point cloud. Rows of X are points; y holds class indices in
// [0, num_classes). Storage over-allocates and doubles, so add() stays
// amortized constant; X() exposes exactly the filled rows.
class LabeledSet {
 public:
  LabeledSet() = default;
  LabeledSet(long dim, int num_classes);

  void add(const Eigen::VectorXd& x, int label);

  long size() const { return n_; }
  long dim() const { return buf_.cols(); }
  int num_classes() const { return num_classes_; }
  bool empty() const { return n_ == 0; }

  Eigen::Block<const Eigen::MatrixXd> X() const { return buf_.topRows(n_); }
  Eigen::Block<Eigen::MatrixXd> X() { return buf_.topRows(n_); }
  const std::vector<int>& y() const { return y_; }

  Eigen::VectorXd point(long i) const { return buf_.row(i); }
  int label(long i) const { return y_[static_cast<size_t>(i)]; }

  // Row indices of every point with the given label, in insertion order.
  std::vector<long> class_index(int label) const;
  long class_count(int label) const;

  LabeledSet subset(const std::vector<long>& rows) const;

 private:
  Eigen::MatrixXd buf_;
  long n_ = 0;
  std::vector<int> y_;
  int num_classes_ = 0;
};

// Header is `y,x0,x1,...,x{d-1}`; floats round-trip exactly (shortest
// representation that parses back to the same double).
void write_csv(const LabeledSet& set, std::ostream& out);
void write_csv_file(const LabeledSet& set, const std::string& path);

// Throws ParseError with a 1-based line number on malformed input. The class
// count is inferred as max(label) + 1 unless a larger floor is given.
LabeledSet read_csv(std::istream& in, int min_classes = 0);
LabeledSet read_csv_file(const std::string& path, int min_classes = 0);

}  // namespace dpdistill::data

#endif  // DPDISTILL_DATASET_HPP_
