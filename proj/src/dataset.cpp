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

#include "dpdistill/dataset.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "dpdistill/errors.hpp"

namespace dpdistill::data {
namespace {

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("double formatting failed");
  return std::string(buf, ptr);
}

double parse_double(const std::string& field, long line) {
  double v = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("not a number: '" + field + "'", line);
  }
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace

LabeledSet::LabeledSet(long dim, int num_classes) : num_classes_(num_classes) {
  if (dim <= 0) throw std::domain_error("dimension must be positive");
  if (num_classes <= 0) throw std::domain_error("need at least one class");
  buf_.resize(0, dim);
}

void LabeledSet::add(const Eigen::VectorXd& x, int label) {
  if (buf_.cols() == 0 && n_ == 0 && x.size() > 0) {
    buf_.resize(0, x.size());
  }
  if (x.size() != buf_.cols()) {
    throw ShapeError("point has dimension " + std::to_string(x.size()) +
                     ", set has dimension " + std::to_string(buf_.cols()));
  }
  if (label < 0) {
    throw std::domain_error("label must be non-negative, got " +
                            std::to_string(label));
  }
  if (n_ == buf_.rows()) {
    buf_.conservativeResize(std::max<long>(8, buf_.rows() * 2),
                            Eigen::NoChange);
  }
  buf_.row(n_) = x;
  ++n_;
  y_.push_back(label);
  if (label >= num_classes_) num_classes_ = label + 1;
}

std::vector<long> LabeledSet::class_index(int label) const {
  std::vector<long> rows;
  for (long i = 0; i < size(); ++i) {
    if (y_[static_cast<size_t>(i)] == label) rows.push_back(i);
  }
  return rows;
}

long LabeledSet::class_count(int label) const {
  long n = 0;
  for (int l : y_) {
    if (l == label) ++n;
  }
  return n;
}

LabeledSet LabeledSet::subset(const std::vector<long>& rows) const {
  LabeledSet out(std::max<long>(dim(), 1), std::max(num_classes_, 1));
  for (long r : rows) {
    if (r < 0 || r >= size()) {
      throw std::out_of_range("row " + std::to_string(r) +
                              " outside set of size " + std::to_string(size()));
    }
    out.add(buf_.row(r), y_[static_cast<size_t>(r)]);
  }
  out.num_classes_ = num_classes_;
  return out;
}

void write_csv(const LabeledSet& set, std::ostream& out) {
  out << "y";
  for (long j = 0; j < set.dim(); ++j) out << ",x" << j;
  out << "\n";
  for (long i = 0; i < set.size(); ++i) {
    out << set.label(i);
    for (long j = 0; j < set.dim(); ++j) {
      out << "," << format_double(set.X()(i, j));
    }
    out << "\n";
  }
}

void write_csv_file(const LabeledSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_csv(set, out);
}

LabeledSet read_csv(std::istream& in, int min_classes) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file", 0);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_csv_line(line);
  if (header.empty() || header[0] != "y") {
    throw ParseError("header must start with 'y'", 1);
  }
  long dim = static_cast<long>(header.size()) - 1;
  if (dim <= 0) throw ParseError("header declares no feature columns", 1);
  for (long j = 0; j < dim; ++j) {
    if (header[static_cast<size_t>(j) + 1] != "x" + std::to_string(j)) {
      throw ParseError("expected column x" + std::to_string(j) + ", got '" +
                           header[static_cast<size_t>(j) + 1] + "'",
                       1);
    }
  }

  LabeledSet set(dim, std::max(min_classes, 1));
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (static_cast<long>(fields.size()) != dim + 1) {
      throw ParseError("expected " + std::to_string(dim + 1) +
                           " fields, got " + std::to_string(fields.size()),
                       line_no);
    }
    double label_value = parse_double(fields[0], line_no);
    int label = static_cast<int>(label_value);
    if (label_value != static_cast<double>(label) || label < 0) {
      throw ParseError("label must be a non-negative integer, got '" +
                           fields[0] + "'",
                       line_no);
    }
    Eigen::VectorXd x(dim);
    for (long j = 0; j < dim; ++j) {
      x[j] = parse_double(fields[static_cast<size_t>(j) + 1], line_no);
    }
    set.add(x, label);
  }
  if (set.empty()) throw ParseError("no data rows", line_no);
  return set;
}

LabeledSet read_csv_file(const std::string& path, int min_classes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return read_csv(in, min_classes);
}

}  // namespace dpdistill::data
