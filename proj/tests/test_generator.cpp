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
#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "dpdistill/dataset.hpp"
#include "dpdistill/errors.hpp"
#include "dpdistill/gen.hpp"
#include "dpdistill/nn.hpp"
#include "dpdistill/rng.hpp"

using dpdistill::ParseError;
using dpdistill::Rng;
using dpdistill::data::LabeledSet;
using dpdistill::gen::DpMoments;
using dpdistill::gen::kmeans_sample;
using dpdistill::gen::kVarianceFloor;
using dpdistill::gen::moments_from_text;
using dpdistill::gen::moments_to_text;
using dpdistill::gen::release_moments;
using dpdistill::gen::sample_synthetic;
namespace nn = dpdistill::nn;

namespace {

Eigen::VectorXd clip(const Eigen::VectorXd& x, double r) {
  double n = x.norm();
  return (n <= r) ? x : Eigen::VectorXd(x * (r / n));
}

nn::ModelParams identity_extractor(long dim) {
  nn::ModelParams m;
  nn::Layer trunk;
  trunk.W = Eigen::MatrixXd::Identity(dim, dim);
  trunk.b = Eigen::VectorXd::Zero(dim);
  m.feature_layers.push_back(trunk);
  m.head.W = Eigen::MatrixXd::Zero(1, dim);
  m.head.b = Eigen::VectorXd::Zero(1);
  return m;
}

}  // namespace

TEST_CASE("noiseless release returns the exact clipped means") {
  LabeledSet set(2, 2);
  set.add(Eigen::Vector2d(1.0, 0.0), 0);
  set.add(Eigen::Vector2d(3.0, 0.0), 0);  // clipped to (2, 0) at R = 2
  set.add(Eigen::Vector2d(0.0, 1.0), 1);
  Rng rng(1);
  DpMoments m = release_moments(set, 0.0, 2.0, rng);

  CHECK(m.classes[0].mean[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(m.classes[0].mean[1] == 0.0);
  CHECK(m.classes[0].second_moment[0] == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(m.classes[1].mean[1] == doctest::Approx(1.0));
  CHECK(std::isinf(m.mu_total.mu));  // no noise, no guarantee
}

TEST_CASE("symmetric points release a zero mean") {
  LabeledSet set(3, 1);
  Eigen::Vector3d v(0.5, -1.0, 0.25);
  set.add(v, 0);
  set.add(-v, 0);
  Rng rng(2);
  DpMoments m = release_moments(set, 0.0, 5.0, rng);
  CHECK(m.classes[0].mean.norm() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("release budget composes the two per-class releases") {
  LabeledSet set(2, 2);
  set.add(Eigen::Vector2d(1.0, 0.0), 0);
  set.add(Eigen::Vector2d(0.0, 1.0), 1);
  Rng rng(3);
  DpMoments m = release_moments(set, 0.5, 1.0, rng);
  // Each release is (1/sigma)-GDP; two of them compose to sqrt(2)/sigma;
  // the per-class costs are equal, so the parallel max changes nothing.
  CHECK(m.mu_total.mu ==
        doctest::Approx(std::sqrt(2.0) / 0.5).epsilon(1e-12));
}

TEST_CASE("release is deterministic per seed and varies across seeds") {
  LabeledSet set(2, 1);
  set.add(Eigen::Vector2d(1.0, 2.0), 0);
  set.add(Eigen::Vector2d(-1.0, 0.5), 0);
  Rng r1(10), r2(10), r3(11);
  DpMoments a = release_moments(set, 1.0, 3.0, r1);
  DpMoments b = release_moments(set, 1.0, 3.0, r2);
  DpMoments c = release_moments(set, 1.0, 3.0, r3);
  CHECK(a.classes[0].mean == b.classes[0].mean);
  CHECK(a.classes[0].second_moment == b.classes[0].second_moment);
  CHECK(a.classes[0].mean != c.classes[0].mean);
}

TEST_CASE("release rejects empty classes by name") {
  LabeledSet set(2, 3);
  set.add(Eigen::Vector2d(1.0, 0.0), 0);
  set.add(Eigen::Vector2d(0.0, 1.0), 2);  // class 1 stays empty
  Rng rng(4);
  CHECK_THROWS_WITH_AS(release_moments(set, 0.0, 1.0, rng),
                       doctest::Contains("class 1"), std::domain_error);
}

TEST_CASE("brute-force sensitivity audit of the released statistics") {
  // 5 points in one class, R = 2. Enumerate single-point replacements from a
  // candidate grid (including the worst cases) and measure the largest shift
  // of the clipped mean and clipped second moment.
  const double R = 2.0;
  const long n = 5;
  std::vector<Eigen::Vector2d> base{{R, 0.0}, {0.3, 0.4}, {-1.0, 0.2},
                                    {0.0, -0.7}, {1.4, 1.4}};
  std::vector<Eigen::Vector2d> candidates{
      {R, 0.0},  {-R, 0.0},  {0.0, R},   {0.0, -R}, {3.0, 3.0},
      {-5.0, 1.0}, {0.1, 0.1}, {-0.2, 0.6}, {R / 2, -R / 2}, {10.0, 0.0}};

  auto stats = [&](const std::vector<Eigen::Vector2d>& pts) {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Vector2d m2 = Eigen::Vector2d::Zero();
    for (const Eigen::Vector2d& p : pts) {
      Eigen::VectorXd cp = clip(p, R);
      mean += cp;
      m2 += cp.cwiseProduct(cp);
    }
    return std::make_pair(Eigen::Vector2d(mean / n), Eigen::Vector2d(m2 / n));
  };

  auto [mean0, m20] = stats(base);
  double worst_mean_shift = 0.0;
  double worst_m2_shift = 0.0;
  for (size_t i = 0; i < base.size(); ++i) {
    for (const Eigen::Vector2d& cand : candidates) {
      std::vector<Eigen::Vector2d> mutated = base;
      mutated[i] = cand;
      auto [mean1, m21] = stats(mutated);
      worst_mean_shift = std::max(worst_mean_shift, (mean1 - mean0).norm());
      worst_m2_shift = std::max(worst_m2_shift, (m21 - m20).norm());
    }
  }

  const double mean_bound = 2.0 * R / n;
  const double m2_bound = 2.0 * R * R / n;
  CHECK(worst_mean_shift <= mean_bound + 1e-12);
  CHECK(worst_m2_shift <= m2_bound + 1e-12);
  // The mean bound is tight: replacing the point at R*e1 by -R*e1 moves the
  // clipped mean by exactly 2R/n.
  CHECK(worst_mean_shift == doctest::Approx(mean_bound).epsilon(1e-12));
  // The second-moment bound is attained only up to sqrt(2)/2: squares are
  // non-negative, so opposite displacements cannot add. The calibration
  // stays valid (noise is never under-scaled), just conservative.
  CHECK(worst_m2_shift == doctest::Approx(m2_bound / std::sqrt(2.0))
                              .epsilon(1e-12));
}

TEST_CASE("outliers never contribute unclipped (metamorphic)") {
  const double R = 1.5;
  LabeledSet set(2, 1);
  set.add(Eigen::Vector2d(0.5, 0.5), 0);
  set.add(Eigen::Vector2d(2.0, 0.0), 0);  // already outside the ball
  set.add(Eigen::Vector2d(-0.25, 1.0), 0);
  Rng r1(5);
  DpMoments before = release_moments(set, 0.0, R, r1);

  // Scaling an already-clipped outlier by 10 changes nothing at all.
  LabeledSet scaled(2, 1);
  scaled.add(Eigen::Vector2d(0.5, 0.5), 0);
  scaled.add(Eigen::Vector2d(20.0, 0.0), 0);
  scaled.add(Eigen::Vector2d(-0.25, 1.0), 0);
  Rng r2(5);
  DpMoments after = release_moments(scaled, 0.0, R, r2);
  CHECK(before.classes[0].mean.isApprox(after.classes[0].mean, 1e-14));
  CHECK(before.classes[0].second_moment.isApprox(
      after.classes[0].second_moment, 1e-14));

  // Blowing up an interior point moves the moments by at most one point's
  // sensitivity.
  LabeledSet blown(2, 1);
  blown.add(Eigen::Vector2d(5.0, 5.0), 0);
  blown.add(Eigen::Vector2d(2.0, 0.0), 0);
  blown.add(Eigen::Vector2d(-0.25, 1.0), 0);
  Rng r3(5);
  DpMoments moved = release_moments(blown, 0.0, R, r3);
  CHECK((moved.classes[0].mean - before.classes[0].mean).norm() <=
        2.0 * R / 3.0 + 1e-12);
  CHECK((moved.classes[0].second_moment - before.classes[0].second_moment)
            .norm() <= 2.0 * R * R / 3.0 + 1e-12);
}

TEST_CASE("sample_synthetic: zero count gives an empty set with shape intact") {
  LabeledSet set(2, 2);
  set.add(Eigen::Vector2d(1.0, 0.0), 0);
  set.add(Eigen::Vector2d(0.0, 1.0), 1);
  Rng rng(6);
  DpMoments m = release_moments(set, 0.0, 2.0, rng);
  LabeledSet synth = sample_synthetic(m, 0, rng);
  CHECK(synth.size() == 0);
  CHECK(synth.dim() == 2);
  CHECK(synth.num_classes() == 2);
}

TEST_CASE("sample_synthetic: clamped variance keeps samples near the mean") {
  DpMoments m;
  m.dim = 2;
  m.sigma_g = 0.0;
  m.clip_radius = 1.0;
  Eigen::Vector2d mean(0.5, -0.5);
  dpdistill::gen::ClassMoments cm;
  cm.mean = mean;
  cm.second_moment = mean.cwiseProduct(mean);  // variance exactly 0 -> floor
  m.classes.push_back(cm);

  Rng rng(7);
  LabeledSet synth = sample_synthetic(m, 500, rng);
  double bound = 6.0 * std::sqrt(kVarianceFloor);
  for (long i = 0; i < synth.size(); ++i) {
    CHECK((synth.point(i) - Eigen::VectorXd(mean)).cwiseAbs().maxCoeff() <=
          bound);
  }
}

TEST_CASE("sample_synthetic: empirical moments converge to the released ones") {
  DpMoments m;
  m.dim = 3;
  m.sigma_g = 0.0;
  m.clip_radius = 10.0;
  dpdistill::gen::ClassMoments cm;
  cm.mean = Eigen::Vector3d(1.0, -2.0, 0.5);
  Eigen::Vector3d var(0.5, 2.0, 1.0);
  cm.second_moment = cm.mean.cwiseProduct(cm.mean) + var;
  m.classes.push_back(cm);

  Rng rng(8);
  const long n = 100000;
  LabeledSet synth = sample_synthetic(m, n, rng);
  REQUIRE(synth.size() == n);
  Eigen::Vector3d emp = synth.X().colwise().mean();
  for (int j = 0; j < 3; ++j) {
    double tol = 3.0 * std::sqrt(var[j] / static_cast<double>(n));
    CHECK(std::abs(emp[j] - cm.mean[j]) <= tol);
  }
}

TEST_CASE("kmeans_sample: ipc equal to the class size returns the class") {
  LabeledSet set(2, 1);
  std::vector<Eigen::Vector2d> pts{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0},
                                   {5.0, 5.0}, {-3.0, 2.0}};
  for (const Eigen::Vector2d& p : pts) set.add(p, 0);
  Rng rng(9);
  LabeledSet picked = kmeans_sample(set, 5, identity_extractor(2), rng);
  REQUIRE(picked.size() == 5);

  auto key = [](const Eigen::VectorXd& v) {
    return std::make_pair(v[0], v[1]);
  };
  std::set<std::pair<double, double>> want, got;
  for (const Eigen::Vector2d& p : pts) want.insert(key(p));
  for (long i = 0; i < picked.size(); ++i) got.insert(key(picked.point(i)));
  CHECK(want == got);
}

TEST_CASE("kmeans_sample: ipc 1 returns the point nearest the class mean") {
  LabeledSet set(2, 1);
  std::vector<Eigen::Vector2d> pts{{0.0, 0.0}, {1.0, 0.2}, {2.0, -0.1},
                                   {0.9, 0.9}, {1.1, -0.8}, {3.0, 0.4}};
  for (const Eigen::Vector2d& p : pts) set.add(p, 0);

  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const Eigen::Vector2d& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  size_t want = 0;
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < pts.size(); ++i) {
    double d = (pts[i] - mean).squaredNorm();
    if (d < best) {
      best = d;
      want = i;
    }
  }

  Rng rng(10);
  LabeledSet picked = kmeans_sample(set, 1, identity_extractor(2), rng);
  REQUIRE(picked.size() == 1);
  CHECK(picked.point(0) == Eigen::VectorXd(pts[want]));
}

TEST_CASE("kmeans_sample: one representative per well-separated blob") {
  LabeledSet set(2, 1);
  Rng data_rng(11);
  for (int i = 0; i < 20; ++i) {
    set.add(Eigen::Vector2d(data_rng.normal(0.0, 0.5),
                            data_rng.normal(0.0, 0.5)),
            0);
  }
  for (int i = 0; i < 20; ++i) {
    set.add(Eigen::Vector2d(100.0 + data_rng.normal(0.0, 0.5),
                            data_rng.normal(0.0, 0.5)),
            0);
  }
  Rng rng(12);
  LabeledSet picked = kmeans_sample(set, 2, identity_extractor(2), rng);
  REQUIRE(picked.size() == 2);
  double a = picked.point(0)[0];
  double b = picked.point(1)[0];
  CHECK(std::min(a, b) < 50.0);
  CHECK(std::max(a, b) > 50.0);
}

TEST_CASE("kmeans_sample respects the extractor's feature space") {
  // The extractor keeps only coordinate 1, so clustering must split along
  // it even though coordinate 0 has larger raw spread.
  LabeledSet set(2, 1);
  Rng data_rng(13);
  for (int i = 0; i < 30; ++i) {
    double noise0 = data_rng.normal(0.0, 30.0);
    double side = (i % 2 == 0) ? -4.0 : 4.0;
    set.add(Eigen::Vector2d(noise0, side + data_rng.normal(0.0, 0.2)), 0);
  }
  nn::ModelParams proj;
  nn::Layer trunk;
  trunk.W = Eigen::MatrixXd::Zero(1, 2);
  trunk.W(0, 1) = 1.0;
  trunk.b = Eigen::VectorXd::Zero(1);
  proj.feature_layers.push_back(trunk);
  proj.head.W = Eigen::MatrixXd::Zero(1, 1);
  proj.head.b = Eigen::VectorXd::Zero(1);

  Rng rng(14);
  LabeledSet picked = kmeans_sample(set, 2, proj, rng);
  REQUIRE(picked.size() == 2);
  CHECK(picked.point(0)[1] * picked.point(1)[1] < 0.0);  // opposite sides
}

TEST_CASE("kmeans_sample checks ipc against class sizes") {
  LabeledSet set(2, 1);
  set.add(Eigen::Vector2d(0.0, 0.0), 0);
  set.add(Eigen::Vector2d(1.0, 1.0), 0);
  Rng rng(15);
  CHECK_THROWS_AS(kmeans_sample(set, 3, identity_extractor(2), rng),
                  std::domain_error);
  CHECK_THROWS_AS(kmeans_sample(set, 0, identity_extractor(2), rng),
                  std::domain_error);
}

TEST_CASE("kmeans_sample is deterministic") {
  LabeledSet set(2, 2);
  Rng data_rng(16);
  for (int i = 0; i < 40; ++i) {
    set.add(Eigen::Vector2d(data_rng.normal(), data_rng.normal()), i % 2);
  }
  Rng r1(17), r2(17);
  LabeledSet a = kmeans_sample(set, 4, identity_extractor(2), r1);
  LabeledSet b = kmeans_sample(set, 4, identity_extractor(2), r2);
  REQUIRE(a.size() == b.size());
  CHECK(a.X() == b.X());
  CHECK(a.y() == b.y());
}

TEST_CASE("moments text round-trips exactly") {
  LabeledSet set(3, 2);
  Rng data_rng(18);
  for (int i = 0; i < 20; ++i) {
    set.add(Eigen::Vector3d(data_rng.normal(), data_rng.normal(),
                            data_rng.normal()),
            i % 2);
  }
  Rng rng(19);
  DpMoments m = release_moments(set, 0.7, 2.5, rng);
  std::string text = moments_to_text(m);
  DpMoments back = moments_from_text(text);

  CHECK(back.sigma_g == m.sigma_g);
  CHECK(back.clip_radius == m.clip_radius);
  CHECK(back.mu_total.mu == m.mu_total.mu);
  CHECK(back.clamp_applied == m.clamp_applied);
  CHECK(back.dim == m.dim);
  REQUIRE(back.classes.size() == m.classes.size());
  for (size_t c = 0; c < m.classes.size(); ++c) {
    CHECK(back.classes[c].mean == m.classes[c].mean);
    CHECK(back.classes[c].second_moment == m.classes[c].second_moment);
  }
  CHECK(moments_to_text(back) == text);

  CHECK_THROWS_AS(moments_from_text("not moments"), ParseError);
  CHECK_THROWS_AS(moments_from_text("dp-moments v1\nclasses 1 dim 2\n"),
                  ParseError);
}

TEST_CASE("infinite mu survives the text format") {
  LabeledSet set(2, 1);
  set.add(Eigen::Vector2d(1.0, 0.0), 0);
  Rng rng(20);
  DpMoments m = release_moments(set, 0.0, 1.0, rng);
  REQUIRE(std::isinf(m.mu_total.mu));
  DpMoments back = moments_from_text(moments_to_text(m));
  CHECK(std::isinf(back.mu_total.mu));
}
