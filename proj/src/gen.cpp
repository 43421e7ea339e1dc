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

#include "dpdistill/gen.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "dpdistill/errors.hpp"

namespace dpdistill::gen {
namespace {

Eigen::VectorXd clip_to_radius(const Eigen::VectorXd& x, double radius) {
  double norm = x.norm();
  if (norm <= radius || norm == 0.0) return x;
  return x * (radius / norm);
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("double formatting failed");
  return std::string(buf, ptr);
}

double parse_double_token(std::istream& in, const char* what) {
  std::string token;
  if (!(in >> token)) throw ParseError(std::string("missing ") + what);
  double v = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  if (token == "inf") return std::numeric_limits<double>::infinity();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(std::string("bad ") + what + ": '" + token + "'");
  }
  return v;
}

long parse_long_token(std::istream& in, const char* what) {
  long v = 0;
  if (!(in >> v)) throw ParseError(std::string("missing ") + what);
  return v;
}

void expect_word(std::istream& in, const std::string& want) {
  std::string got;
  if (!(in >> got) || got != want) {
    throw ParseError("expected '" + want + "', got '" + got + "'");
  }
}

}  // namespace

Eigen::VectorXd DpMoments::variance(int label) const {
  const ClassMoments& c = classes.at(static_cast<size_t>(label));
  Eigen::VectorXd var = c.second_moment - c.mean.cwiseProduct(c.mean);
  return var.cwiseMax(kVarianceFloor);
}

DpMoments release_moments(const data::LabeledSet& private_set, double sigma_g,
                          double clip_radius, Rng& rng) {
  if (clip_radius <= 0.0) {
    throw std::domain_error("clip radius must be positive");
  }
  if (sigma_g < 0.0) {
    throw std::domain_error("noise multiplier must be >= 0");
  }
  if (private_set.empty()) {
    throw std::domain_error("cannot release moments of an empty set");
  }

  DpMoments out;
  out.sigma_g = sigma_g;
  out.clip_radius = clip_radius;
  out.dim = private_set.dim();

  const int num_classes = private_set.num_classes();
  for (int c = 0; c < num_classes; ++c) {
    std::vector<long> rows = private_set.class_index(c);
    if (rows.empty()) {
      throw std::domain_error("class " + std::to_string(c) +
                              " has no points; moments undefined");
    }
    const double n_c = static_cast<double>(rows.size());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(out.dim);
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(out.dim);
    for (long r : rows) {
      Eigen::VectorXd clipped = clip_to_radius(private_set.point(r), clip_radius);
      mean += clipped;
      m2 += clipped.cwiseProduct(clipped);
    }
    mean /= n_c;
    m2 /= n_c;

    const double mean_sensitivity = 2.0 * clip_radius / n_c;
    const double m2_sensitivity = 2.0 * clip_radius * clip_radius / n_c;
    Rng class_rng = rng.child(static_cast<std::uint64_t>(c));
    if (sigma_g > 0.0) {
      for (long j = 0; j < out.dim; ++j) {
        mean[j] += class_rng.normal(0.0, sigma_g * mean_sensitivity);
      }
      for (long j = 0; j < out.dim; ++j) {
        m2[j] += class_rng.normal(0.0, sigma_g * m2_sensitivity);
      }
    }
    out.classes.push_back(ClassMoments{mean, m2});
  }

  // Budget: two sequential releases per class, disjoint classes in parallel.
  // Every class costs the same, so the parallel max is just one class's cost.
  gdp::GdpBudget per_release =
      (sigma_g > 0.0) ? gdp::GdpBudget(1.0 / sigma_g)
                      : gdp::gaussian_mechanism_mu(1.0, 0.0);
  out.mu_total = gdp::compose({per_release.mu, per_release.mu});

  for (const ClassMoments& c : out.classes) {
    Eigen::VectorXd raw_var = c.second_moment - c.mean.cwiseProduct(c.mean);
    if ((raw_var.array() < kVarianceFloor).any()) out.clamp_applied = true;
  }
  return out;
}

data::LabeledSet sample_synthetic(const DpMoments& moments,
                                  long count_per_class, Rng& rng) {
  if (count_per_class < 0) {
    throw std::domain_error("count_per_class must be >= 0");
  }
  data::LabeledSet out(moments.dim,
                       static_cast<int>(moments.classes.size()));
  for (size_t c = 0; c < moments.classes.size(); ++c) {
    Rng class_rng = rng.child(static_cast<std::uint64_t>(c));
    Eigen::VectorXd mean = moments.classes[c].mean;
    Eigen::VectorXd std_dev =
        moments.variance(static_cast<int>(c)).cwiseSqrt();
    for (long i = 0; i < count_per_class; ++i) {
      Eigen::VectorXd x(moments.dim);
      for (long j = 0; j < moments.dim; ++j) {
        x[j] = mean[j] + std_dev[j] * class_rng.normal();
      }
      out.add(x, static_cast<int>(c));
    }
  }
  return out;
}

namespace {

// k-means++ seeding followed by Lloyd iterations on precomputed feature rows.
std::vector<Eigen::VectorXd> run_kmeans(const std::vector<Eigen::VectorXd>& xs,
                                        long k, Rng& rng) {
  const long n = static_cast<long>(xs.size());
  std::vector<Eigen::VectorXd> centroids;
  centroids.reserve(static_cast<size_t>(k));

  // Seeding: first uniform, then proportional to squared distance.
  centroids.push_back(xs[rng.index(static_cast<size_t>(n))]);
  std::vector<double> d2(static_cast<size_t>(n));
  while (static_cast<long>(centroids.size()) < k) {
    double total = 0.0;
    for (long i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const Eigen::VectorXd& c : centroids) {
        best = std::min(best, (xs[static_cast<size_t>(i)] - c).squaredNorm());
      }
      d2[static_cast<size_t>(i)] = best;
      total += best;
    }
    if (total == 0.0) {
      // All remaining points coincide with centroids; reuse the first point.
      centroids.push_back(xs[0]);
      continue;
    }
    double target = rng.uniform() * total;
    double cumulative = 0.0;
    long chosen = n - 1;
    for (long i = 0; i < n; ++i) {
      cumulative += d2[static_cast<size_t>(i)];
      if (cumulative >= target) {
        chosen = i;
        break;
      }
    }
    centroids.push_back(xs[static_cast<size_t>(chosen)]);
  }

  std::vector<long> assignment(static_cast<size_t>(n), -1);
  for (int round = 0; round < 50; ++round) {
    bool changed = false;
    for (long i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      long best_c = 0;
      for (long c = 0; c < k; ++c) {
        double d = (xs[static_cast<size_t>(i)] - centroids[static_cast<size_t>(c)])
                       .squaredNorm();
        if (d < best) {  // strict: ties stay with the lower index
          best = d;
          best_c = c;
        }
      }
      if (assignment[static_cast<size_t>(i)] != best_c) {
        assignment[static_cast<size_t>(i)] = best_c;
        changed = true;
      }
    }
    if (!changed) break;
    for (long c = 0; c < k; ++c) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(xs[0].size());
      long count = 0;
      for (long i = 0; i < n; ++i) {
        if (assignment[static_cast<size_t>(i)] == c) {
          sum += xs[static_cast<size_t>(i)];
          ++count;
        }
      }
      if (count > 0) centroids[static_cast<size_t>(c)] = sum / count;
    }
  }
  return centroids;
}

}  // namespace

data::LabeledSet kmeans_sample(const data::LabeledSet& data, long ipc,
                               const nn::ModelParams& extractor, Rng& rng) {
  if (ipc <= 0) throw std::domain_error("ipc must be positive");
  data::LabeledSet out(data.dim(), data.num_classes());
  for (int c = 0; c < data.num_classes(); ++c) {
    std::vector<long> rows = data.class_index(c);
    if (static_cast<long>(rows.size()) < ipc) {
      throw std::domain_error("class " + std::to_string(c) + " has " +
                              std::to_string(rows.size()) +
                              " points, fewer than ipc = " +
                              std::to_string(ipc));
    }
    std::vector<Eigen::VectorXd> features;
    features.reserve(rows.size());
    for (long r : rows) {
      features.push_back(nn::forward_features(extractor, data.point(r)));
    }
    Rng class_rng = rng.child(static_cast<std::uint64_t>(c));
    std::vector<Eigen::VectorXd> centroids =
        run_kmeans(features, ipc, class_rng);
    for (const Eigen::VectorXd& centroid : centroids) {
      double best = std::numeric_limits<double>::infinity();
      size_t best_i = 0;
      for (size_t i = 0; i < features.size(); ++i) {
        double d = (features[i] - centroid).squaredNorm();
        if (d < best) {
          best = d;
          best_i = i;
        }
      }
      out.add(data.point(rows[best_i]), c);
    }
  }
  return out;
}

std::string moments_to_text(const DpMoments& moments) {
  std::ostringstream out;
  out << "dp-moments v1\n";
  out << "classes " << moments.classes.size() << " dim " << moments.dim
      << "\n";
  out << "sigma_g " << format_double(moments.sigma_g) << " clip_radius "
      << format_double(moments.clip_radius) << " mu "
      << (std::isinf(moments.mu_total.mu) ? std::string("inf")
                                          : format_double(moments.mu_total.mu))
      << "\n";
  out << "clamped " << (moments.clamp_applied ? 1 : 0) << "\n";
  for (size_t c = 0; c < moments.classes.size(); ++c) {
    out << "class " << c << "\n";
    out << "mean";
    for (long j = 0; j < moments.dim; ++j) {
      out << " " << format_double(moments.classes[c].mean[j]);
    }
    out << "\nm2";
    for (long j = 0; j < moments.dim; ++j) {
      out << " " << format_double(moments.classes[c].second_moment[j]);
    }
    out << "\n";
  }
  return out.str();
}

DpMoments moments_from_text(const std::string& text) {
  std::istringstream in(text);
  expect_word(in, "dp-moments");
  expect_word(in, "v1");
  DpMoments out;
  expect_word(in, "classes");
  long num_classes = parse_long_token(in, "class count");
  expect_word(in, "dim");
  out.dim = parse_long_token(in, "dimension");
  if (num_classes <= 0 || out.dim <= 0) {
    throw ParseError("class count and dimension must be positive");
  }
  expect_word(in, "sigma_g");
  out.sigma_g = parse_double_token(in, "sigma_g");
  expect_word(in, "clip_radius");
  out.clip_radius = parse_double_token(in, "clip radius");
  expect_word(in, "mu");
  out.mu_total.mu = parse_double_token(in, "mu");
  expect_word(in, "clamped");
  out.clamp_applied = parse_long_token(in, "clamp flag") != 0;
  for (long c = 0; c < num_classes; ++c) {
    expect_word(in, "class");
    long index = parse_long_token(in, "class index");
    if (index != c) throw ParseError("classes out of order");
    ClassMoments cm;
    cm.mean.resize(out.dim);
    cm.second_moment.resize(out.dim);
    expect_word(in, "mean");
    for (long j = 0; j < out.dim; ++j) {
      cm.mean[j] = parse_double_token(in, "mean value");
    }
    expect_word(in, "m2");
    for (long j = 0; j < out.dim; ++j) {
      cm.second_moment[j] = parse_double_token(in, "m2 value");
    }
    out.classes.push_back(std::move(cm));
  }
  return out;
}

}  // namespace dpdistill::gen
