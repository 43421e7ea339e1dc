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

#ifndef DPDISTILL_GEN_HPP_
#define DPDISTILL_GEN_HPP_

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "dpdistill/dataset.hpp"
#include "dpdistill/gdp.hpp"
#include "dpdistill/nn.hpp"
#include "dpdistill/rng.hpp"

namespace dpdistill::gen {

// Noisy second moments can dip below zero; sampling clamps the derived
// variance here.
inline constexpr double kVarianceFloor = 1e-6;

struct ClassMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd second_moment;  // diagonal, as released (may be < 0)
};

// Differentially private per-class Gaussian moments of a dataset, the
// generator's entire knowledge of the private records.
struct DpMoments {
  std::vector<ClassMoments> classes;
  double sigma_g = 0.0;      // noise multiplier used per release
  double clip_radius = 0.0;  // every point was clipped to this L2 norm
  bool clamp_applied = false;
  gdp::GdpBudget mu_total;   // spent by the release (infinite at sigma_g = 0)
  long dim = 0;

  // max(second_moment - mean^2, floor), coordinatewise.
  Eigen::VectorXd variance(int label) const;
};

// Releases per-class clipped mean and diagonal second moment under the
// Gaussian mechanism. Each class issues two releases (mean with sensitivity
// 2R/n_c, second moment with sensitivity 2R^2/n_c), composed sequentially;
// classes are disjoint shards, so the total is the worst class. Noise is
// drawn from per-class child streams of rng, so class order and thread
// scheduling cannot change the output.
DpMoments release_moments(const data::LabeledSet& private_set, double sigma_g,
                          double clip_radius, Rng& rng);

// Draws count_per_class points per class from N(mean, diag(variance)).
// Post-processing of the released moments: touches no private data.
data::LabeledSet sample_synthetic(const DpMoments& moments,
                                  long count_per_class, Rng& rng);

// Per class: k-means (k-means++ seeding, Lloyd, at most 50 rounds) on the
// extractor's features, then the data point nearest each centroid, ties to
// the lowest index. Deterministic given the rng seed.
data::LabeledSet kmeans_sample(const data::LabeledSet& data, long ipc,
                               const nn::ModelParams& extractor, Rng& rng);

// Plain-text serialization, lossless for doubles.
std::string moments_to_text(const DpMoments& moments);
DpMoments moments_from_text(const std::string& text);

}  // namespace dpdistill::gen

#endif  // DPDISTILL_GEN_HPP_
