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

#include "dpdistill/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "dpdistill/errors.hpp"

namespace dpdistill::nn {
namespace {

constexpr char kMagic[4] = {'D', 'P', 'D', 'M'};
constexpr std::uint32_t kVersion = 1;

void add_noise_inplace(Eigen::MatrixXd& m, double std, Rng& rng) {
  double* p = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) p[i] += rng.normal(0.0, std);
}

void add_noise_inplace(Eigen::VectorXd& v, double std, Rng& rng) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += rng.normal(0.0, std);
}

// Mean CE gradient over the listed rows, each example's parameter gradient
// clipped to clip_norm first when clipping is engaged.
GradBuffer clipped_mean_grad(const ModelParams& model,
                             const data::LabeledSet& set,
                             const std::vector<long>& rows, double clip_norm,
                             double divisor) {
  GradBuffer sum = GradBuffer::zeros_like(model);
  for (long r : rows) {
    ForwardCache cache;
    forward_logits(model, set.point(r), &cache);
    Eigen::VectorXd dlogits;
    cross_entropy(cache.logits, set.label(r), &dlogits);
    GradBuffer g = backward(model, cache, dlogits);
    if (clip_norm > 0.0) {
      double norm = g.param_norm();
      if (norm > clip_norm) g.scale(clip_norm / norm);
    }
    sum.accumulate(g);
  }
  sum.scale(1.0 / divisor);
  return sum;
}

std::vector<long> poisson_batch(long n, double p, Rng& rng) {
  std::vector<long> rows;
  for (long i = 0; i < n; ++i) {
    if (rng.bernoulli(p)) rows.push_back(i);
  }
  return rows;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw ParseError("truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

void write_doubles(std::ostream& out, const double* p, Eigen::Index n) {
  out.write(reinterpret_cast<const char*>(p),
            static_cast<std::streamsize>(n) *
                static_cast<std::streamsize>(sizeof(double)));
}

void read_doubles(std::istream& in, double* p, Eigen::Index n) {
  in.read(reinterpret_cast<char*>(p),
          static_cast<std::streamsize>(n) *
              static_cast<std::streamsize>(sizeof(double)));
  if (!in) throw ParseError("truncated checkpoint payload");
}

void write_layer(std::ostream& out, const Layer& layer) {
  write_u32(out, static_cast<std::uint32_t>(layer.W.rows()));
  write_u32(out, static_cast<std::uint32_t>(layer.W.cols()));
  write_doubles(out, layer.W.data(), layer.W.size());
  write_doubles(out, layer.b.data(), layer.b.size());
}

Layer read_layer(std::istream& in) {
  Layer layer;
  std::uint32_t rows = read_u32(in);
  std::uint32_t cols = read_u32(in);
  if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20)) {
    throw ParseError("implausible layer shape in checkpoint");
  }
  layer.W.resize(rows, cols);
  read_doubles(in, layer.W.data(), layer.W.size());
  layer.b.resize(rows);
  read_doubles(in, layer.b.data(), layer.b.size());
  return layer;
}

}  // namespace

long ModelParams::input_dim() const {
  if (feature_layers.empty()) return head.W.cols();
  return feature_layers.front().W.cols();
}

long ModelParams::feature_dim() const {
  if (feature_layers.empty()) return head.W.cols();
  return feature_layers.back().W.rows();
}

ModelParams make_mlp(long input_dim, const std::vector<long>& hidden,
                     int num_classes, Rng& rng) {
  if (input_dim <= 0 || num_classes <= 0) {
    throw std::domain_error("model needs positive input dim and class count");
  }
  ModelParams model;
  long fan_in = input_dim;
  for (long width : hidden) {
    if (width <= 0) throw std::domain_error("hidden width must be positive");
    Layer layer;
    layer.W.resize(width, fan_in);
    double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < layer.W.size(); ++i) {
      layer.W.data()[i] = rng.normal(0.0, std);
    }
    layer.b = Eigen::VectorXd::Zero(width);
    model.feature_layers.push_back(std::move(layer));
    fan_in = width;
  }
  model.head.W.resize(num_classes, fan_in);
  double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < model.head.W.size(); ++i) {
    model.head.W.data()[i] = rng.normal(0.0, std);
  }
  model.head.b = Eigen::VectorXd::Zero(num_classes);
  return model;
}

Eigen::VectorXd forward_features(const ModelParams& model,
                                 const Eigen::VectorXd& x,
                                 ForwardCache* cache) {
  if (x.size() != model.input_dim()) {
    throw ShapeError("input has dimension " + std::to_string(x.size()) +
                     ", model expects " + std::to_string(model.input_dim()));
  }
  Eigen::VectorXd h = x;
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  const size_t n = model.feature_layers.size();
  for (size_t i = 0; i < n; ++i) {
    const Layer& layer = model.feature_layers[i];
    if (cache) cache->inputs.push_back(h);
    Eigen::VectorXd pre = layer.W * h + layer.b;
    if (cache) cache->pre.push_back(pre);
    h = (i + 1 < n) ? pre.cwiseMax(0.0).eval() : pre;
  }
  if (cache) cache->features = h;
  return h;
}

Eigen::VectorXd forward_logits(const ModelParams& model,
                               const Eigen::VectorXd& x, ForwardCache* cache) {
  Eigen::VectorXd features = forward_features(model, x, cache);
  Eigen::VectorXd logits = model.head.W * features + model.head.b;
  if (cache) cache->logits = logits;
  return logits;
}

GradBuffer GradBuffer::zeros_like(const ModelParams& model) {
  GradBuffer g;
  for (const Layer& layer : model.feature_layers) {
    g.feature.push_back(Layer{Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols()),
                              Eigen::VectorXd::Zero(layer.b.size())});
  }
  g.head.W = Eigen::MatrixXd::Zero(model.head.W.rows(), model.head.W.cols());
  g.head.b = Eigen::VectorXd::Zero(model.head.b.size());
  g.input = Eigen::VectorXd::Zero(model.input_dim());
  return g;
}

double GradBuffer::param_norm() const {
  double sum = head.W.squaredNorm() + head.b.squaredNorm();
  for (const Layer& layer : feature) {
    sum += layer.W.squaredNorm() + layer.b.squaredNorm();
  }
  return std::sqrt(sum);
}

void GradBuffer::scale(double s) {
  for (Layer& layer : feature) {
    layer.W *= s;
    layer.b *= s;
  }
  head.W *= s;
  head.b *= s;
  input *= s;
}

void GradBuffer::accumulate(const GradBuffer& other) {
  if (feature.size() != other.feature.size()) {
    throw ShapeError("gradient buffers have different layer counts");
  }
  for (size_t i = 0; i < feature.size(); ++i) {
    feature[i].W += other.feature[i].W;
    feature[i].b += other.feature[i].b;
  }
  head.W += other.head.W;
  head.b += other.head.b;
  if (input.size() == other.input.size()) input += other.input;
}

namespace {

// Shared trunk backward: delta is the gradient at the feature vector.
void backward_trunk(const ModelParams& model, const ForwardCache& cache,
                    Eigen::VectorXd delta, GradBuffer& g) {
  const size_t n = model.feature_layers.size();
  if (cache.inputs.size() != n || cache.pre.size() != n) {
    throw std::invalid_argument("forward cache does not match model");
  }
  for (size_t i = n; i-- > 0;) {
    // ReLU only sits after layers 0..n-2; the last trunk layer is affine.
    if (i + 1 < n) {
      for (Eigen::Index k = 0; k < delta.size(); ++k) {
        if (cache.pre[i][k] <= 0.0) delta[k] = 0.0;
      }
    }
    g.feature[i].W = delta * cache.inputs[i].transpose();
    g.feature[i].b = delta;
    delta = model.feature_layers[i].W.transpose() * delta;
  }
  g.input = delta;
}

}  // namespace

GradBuffer backward(const ModelParams& model, const ForwardCache& cache,
                    const Eigen::VectorXd& dlogits) {
  if (dlogits.size() != model.head.W.rows()) {
    throw ShapeError("logit gradient has wrong dimension");
  }
  GradBuffer g = GradBuffer::zeros_like(model);
  g.head.W = dlogits * cache.features.transpose();
  g.head.b = dlogits;
  Eigen::VectorXd delta = model.head.W.transpose() * dlogits;
  backward_trunk(model, cache, std::move(delta), g);
  return g;
}

GradBuffer backward_features(const ModelParams& model,
                             const ForwardCache& cache,
                             const Eigen::VectorXd& dfeatures) {
  if (dfeatures.size() != model.feature_dim()) {
    throw ShapeError("feature gradient has wrong dimension");
  }
  GradBuffer g = GradBuffer::zeros_like(model);
  backward_trunk(model, cache, dfeatures, g);
  return g;
}

void apply_update(ModelParams& model, const GradBuffer& grad, double lr) {
  if (grad.feature.size() != model.feature_layers.size()) {
    throw ShapeError("gradient does not match model architecture");
  }
  for (size_t i = 0; i < model.feature_layers.size(); ++i) {
    model.feature_layers[i].W -= lr * grad.feature[i].W;
    model.feature_layers[i].b -= lr * grad.feature[i].b;
  }
  model.head.W -= lr * grad.head.W;
  model.head.b -= lr * grad.head.b;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd shifted = logits.array() - logits.maxCoeff();
  Eigen::VectorXd e = shifted.array().exp();
  return e / e.sum();
}

double logsumexp(const Eigen::VectorXd& v) {
  double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

double cross_entropy(const Eigen::VectorXd& logits, int label,
                     Eigen::VectorXd* dlogits) {
  if (label < 0 || label >= logits.size()) {
    throw std::domain_error("label " + std::to_string(label) +
                            " outside logit range");
  }
  double loss = logsumexp(logits) - logits[label];
  if (dlogits) {
    *dlogits = softmax(logits);
    (*dlogits)[label] -= 1.0;
  }
  return loss;
}

double kl_softmax(const Eigen::VectorXd& logits,
                  const Eigen::VectorXd& ref_logits,
                  Eigen::VectorXd* dlogits) {
  if (logits.size() != ref_logits.size()) {
    throw ShapeError("KL arguments have different dimensions");
  }
  // Work with log-probabilities; exponentiating a shifted logit vector keeps
  // everything finite for any input scale.
  double lse_p = logsumexp(logits);
  double lse_q = logsumexp(ref_logits);
  Eigen::VectorXd log_p = logits.array() - lse_p;
  Eigen::VectorXd log_q = ref_logits.array() - lse_q;
  Eigen::VectorXd p = log_p.array().exp();
  Eigen::VectorXd log_ratio = log_p - log_q;
  double kl = (p.array() * log_ratio.array()).sum();
  if (dlogits) {
    // d/da_j = p_j * (log_ratio_j - KL)
    *dlogits = (p.array() * (log_ratio.array() - kl)).matrix();
  }
  return kl;
}

void dp_sgd_step(ModelParams& model, const data::LabeledSet& set,
                 const std::vector<long>& batch_rows, const GradClipSpec& spec,
                 double lr, Rng& rng) {
  if (batch_rows.empty()) {
    throw std::domain_error("dp_sgd_step needs a non-empty batch");
  }
  if (spec.clip_norm <= 0.0) {
    throw std::domain_error("clip norm must be positive");
  }
  if (spec.noise_multiplier < 0.0 || spec.batch_size < 1) {
    throw std::domain_error("bad noise multiplier or batch size");
  }
  double b = static_cast<double>(spec.batch_size);
  GradBuffer g = clipped_mean_grad(model, set, batch_rows, spec.clip_norm, b);
  double noise_std = spec.noise_multiplier * spec.clip_norm / b;
  if (noise_std > 0.0) {
    for (Layer& layer : g.feature) {
      add_noise_inplace(layer.W, noise_std, rng);
      add_noise_inplace(layer.b, noise_std, rng);
    }
    add_noise_inplace(g.head.W, noise_std, rng);
    add_noise_inplace(g.head.b, noise_std, rng);
  }
  apply_update(model, g, lr);
}

TrainResult train(ModelParams& model, const data::LabeledSet& set,
                  const TrainOptions& options, Rng& rng) {
  if (set.empty()) throw std::domain_error("cannot train on an empty set");
  if (options.batch_size < 1) throw std::domain_error("batch size must be >= 1");
  TrainResult result;
  const long n = set.size();
  const long steps_per_epoch =
      std::max<long>(1, (n + options.batch_size - 1) / options.batch_size);

  std::vector<long> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (long epoch = 0; epoch < options.epochs; ++epoch) {
    if (options.max_steps && result.steps >= *options.max_steps) break;
    bool poisson = options.dp && options.sampling == SamplingMode::kPoisson;
    if (!poisson) rng.shuffle(order);
    for (long s = 0; s < steps_per_epoch; ++s) {
      if (options.max_steps && result.steps >= *options.max_steps) break;
      std::vector<long> batch;
      if (poisson) {
        double p = std::min(
            1.0, static_cast<double>(options.batch_size) / static_cast<double>(n));
        batch = poisson_batch(n, p, rng);
        if (batch.empty()) {
          ++result.steps;  // a round happened; it just saw no data
          continue;
        }
      } else {
        long begin = s * options.batch_size;
        long end = std::min(n, begin + options.batch_size);
        if (begin >= end) break;
        batch.assign(order.begin() + begin, order.begin() + end);
      }
      if (options.dp) {
        dp_sgd_step(model, set, batch, *options.dp, options.lr, rng);
      } else {
        GradBuffer g = clipped_mean_grad(model, set, batch, 0.0,
                                         static_cast<double>(batch.size()));
        apply_update(model, g, options.lr);
      }
      ++result.steps;
    }
    result.trace.push_back(
        EpochStats{epoch, mean_loss(model, set), accuracy(model, set)});
  }
  return result;
}

double accuracy(const ModelParams& model, const data::LabeledSet& set) {
  if (set.empty()) throw std::domain_error("accuracy of an empty set");
  long correct = 0;
  for (long i = 0; i < set.size(); ++i) {
    Eigen::VectorXd logits = forward_logits(model, set.point(i));
    Eigen::Index best;
    logits.maxCoeff(&best);
    if (static_cast<int>(best) == set.label(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

double mean_loss(const ModelParams& model, const data::LabeledSet& set) {
  if (set.empty()) throw std::domain_error("loss of an empty set");
  double total = 0.0;
  for (long i = 0; i < set.size(); ++i) {
    total += cross_entropy(forward_logits(model, set.point(i)), set.label(i));
  }
  return total / static_cast<double>(set.size());
}

void save_model(const ModelParams& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(model.feature_layers.size()));
  for (const Layer& layer : model.feature_layers) write_layer(out, layer);
  write_layer(out, model.head);
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

ModelParams load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw ParseError("not a model checkpoint (bad magic)");
  }
  std::uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw ParseError("unsupported checkpoint version " +
                     std::to_string(version));
  }
  std::uint32_t trunk_layers = read_u32(in);
  if (trunk_layers > 64) throw ParseError("implausible trunk depth");
  ModelParams model;
  for (std::uint32_t i = 0; i < trunk_layers; ++i) {
    model.feature_layers.push_back(read_layer(in));
  }
  model.head = read_layer(in);
  return model;
}

void write_trace_csv(const std::vector<EpochStats>& trace, std::ostream& out) {
  out << "epoch,loss,accuracy\n";
  for (const EpochStats& row : trace) {
    out << row.epoch << "," << row.loss << "," << row.accuracy << "\n";
  }
}

}  // namespace dpdistill::nn
