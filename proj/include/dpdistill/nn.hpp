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

#ifndef DPDISTILL_NN_HPP_
#define DPDISTILL_NN_HPP_

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dpdistill/dataset.hpp"
#include "dpdistill/rng.hpp"

namespace dpdistill::nn {

struct Layer {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

// MLP split into a feature trunk and a linear classification head. ReLU is
// applied between feature layers but not after the last one, so the feature
// vector is the last trunk layer's affine output; a single identity trunk
// layer therefore computes phi(x) = x exactly. An empty trunk means
// phi(x) = x with the head acting directly on the input.
struct ModelParams {
  std::vector<Layer> feature_layers;
  Layer head;

  long input_dim() const;
  long feature_dim() const;
  int num_classes() const { return static_cast<int>(head.W.rows()); }
};

// He-initialized trunk (one layer per entry of hidden), zero biases, head
// included. Deterministic for a given rng state.
ModelParams make_mlp(long input_dim, const std::vector<long>& hidden,
                     int num_classes, Rng& rng);

// Intermediate activations captured by a forward pass, needed for backward.
struct ForwardCache {
  std::vector<Eigen::VectorXd> inputs;  // inputs[i] feeds feature layer i
  std::vector<Eigen::VectorXd> pre;     // affine output of feature layer i
  Eigen::VectorXd features;
  Eigen::VectorXd logits;
};

Eigen::VectorXd forward_features(const ModelParams& model,
                                 const Eigen::VectorXd& x,
                                 ForwardCache* cache = nullptr);
Eigen::VectorXd forward_logits(const ModelParams& model,
                               const Eigen::VectorXd& x,
                               ForwardCache* cache = nullptr);

// Gradients shaped like the model, plus the gradient with respect to the
// input point (used when the optimization variable is the data itself).
struct GradBuffer {
  std::vector<Layer> feature;
  Layer head;
  Eigen::VectorXd input;

  static GradBuffer zeros_like(const ModelParams& model);
  double param_norm() const;
  void scale(double s);
  void accumulate(const GradBuffer& other);
};

// Reverse pass from a gradient at the logits; cache must come from a forward
// pass of the same model on the same point.
GradBuffer backward(const ModelParams& model, const ForwardCache& cache,
                    const Eigen::VectorXd& dlogits);
// Reverse pass from a gradient at the feature vector (head untouched).
GradBuffer backward_features(const ModelParams& model,
                             const ForwardCache& cache,
                             const Eigen::VectorXd& dfeatures);

void apply_update(ModelParams& model, const GradBuffer& grad, double lr);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
double logsumexp(const Eigen::VectorXd& v);

// Cross-entropy of softmax(logits) against the label; optional gradient
// w.r.t. logits (= softmax - onehot).
double cross_entropy(const Eigen::VectorXd& logits, int label,
                     Eigen::VectorXd* dlogits = nullptr);

// KL(softmax(logits) || softmax(ref_logits)); optional gradient w.r.t. the
// first argument.
double kl_softmax(const Eigen::VectorXd& logits,
                  const Eigen::VectorXd& ref_logits,
                  Eigen::VectorXd* dlogits = nullptr);

// Per-example clipped, averaged, noised gradient step:
//   g_hat = (1/b) * sum_i min(1, C/||g_i||) g_i + (sigma * C / b) * e
// with b the nominal batch_size below, not the realized row count, which
// under Poisson sampling varies round to round.
struct GradClipSpec {
  double clip_norm = 1.0;
  double noise_multiplier = 0.0;
  long batch_size = 1;
};

void dp_sgd_step(ModelParams& model, const data::LabeledSet& set,
                 const std::vector<long>& batch_rows, const GradClipSpec& spec,
                 double lr, Rng& rng);

enum class SamplingMode { kPoisson, kFixedBatch };

struct TrainOptions {
  long epochs = 1;
  double lr = 0.1;
  long batch_size = 32;
  std::optional<GradClipSpec> dp;  // engaged => clipped, noised updates
  SamplingMode sampling = SamplingMode::kPoisson;
  std::optional<long> max_steps;
};

struct EpochStats {
  long epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> trace;
  long steps = 0;
};

// Mutates the model in place; deterministic for a given rng seed.
TrainResult train(ModelParams& model, const data::LabeledSet& set,
                  const TrainOptions& options, Rng& rng);

double accuracy(const ModelParams& model, const data::LabeledSet& set);
double mean_loss(const ModelParams& model, const data::LabeledSet& set);

// Versioned binary checkpoint: magic, version, architecture, then raw
// little-endian doubles (host is assumed little-endian IEEE-754).
void save_model(const ModelParams& model, const std::string& path);
ModelParams load_model(const std::string& path);

// `epoch,loss,accuracy` rows.
void write_trace_csv(const std::vector<EpochStats>& trace, std::ostream& out);

}  // namespace dpdistill::nn

#endif  // DPDISTILL_NN_HPP_
