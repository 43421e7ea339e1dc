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

#include "dpdistill/distill.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dpdistill/errors.hpp"
#include "dpdistill/gdp.hpp"
#include "dpdistill/gen.hpp"

namespace dpdistill::distill {

namespace {

Eigen::VectorXd clip_vector(const Eigen::VectorXd& v, double clip_norm) {
  const double norm = v.stableNorm();
  if (norm <= clip_norm) return v;
  return (clip_norm / norm) * v;
}

// Transposed Jacobian of v -> clip(v) applied to an upstream gradient.
Eigen::VectorXd clip_backward(const Eigen::VectorXd& v, double clip_norm,
                              const Eigen::VectorXd& g) {
  const double norm = v.stableNorm();
  if (norm <= clip_norm) return g;
  const Eigen::VectorXd unit = v / norm;
  return (clip_norm / norm) * (g - unit * unit.dot(g));
}

int single_label(const data::LabeledSet& slice, const char* what) {
  if (slice.size() == 0) {
    throw std::domain_error(std::string(what) + " must be non-empty");
  }
  const int label = slice.label(0);
  for (long i = 1; i < slice.size(); ++i) {
    if (slice.label(i) != label) {
      throw std::invalid_argument(std::string(what) +
                                  " mixes labels from different classes");
    }
  }
  return label;
}

// Applies -step, capped in Frobenius norm, to the rows of the distilled set
// listed in rows.
void apply_capped_update(data::LabeledSet& s, const std::vector<long>& rows,
                         const Eigen::MatrixXd& grad, double step, double cap,
                         long iteration) {
  Eigen::MatrixXd update = step * grad;
  if (!update.allFinite()) {
    throw DivergenceError("update step went non-finite", iteration);
  }
  // overflow-safe Frobenius cap: norm = peak * q with q in [1, sqrt(size)]
  const double peak = update.cwiseAbs().maxCoeff();
  if (peak > 0.0) {
    const double q = (update / peak).norm();
    if (peak > cap / q) update *= (cap / peak) / q;
  }
  auto x = s.X();
  for (size_t k = 0; k < rows.size(); ++k) {
    x.row(rows[k]) -= update.row(static_cast<long>(k));
    if (!x.row(rows[k]).allFinite()) {
      throw DivergenceError("distilled point went non-finite", iteration);
    }
  }
}

std::vector<long> poisson_rows(const std::vector<long>& candidates, double p,
                               Rng& rng) {
  std::vector<long> rows;
  for (long r : candidates) {
    if (rng.bernoulli(p)) rows.push_back(r);
  }
  return rows;
}

void validate_config(const DistillConfig& c) {
  if (c.ipc <= 0) throw std::domain_error("ipc must be positive");
  if (c.iterations < 0) throw std::domain_error("iterations must be >= 0");
  if (!(c.clip_norm > 0.0) || !std::isfinite(c.clip_norm)) {
    throw std::domain_error("clip_norm must be positive and finite");
  }
  if (!(c.sigma_f >= 0.0) || !std::isfinite(c.sigma_f)) {
    throw std::domain_error("sigma_f must be >= 0 and finite");
  }
  if (!(c.eta_f >= 0.0) || !(c.eta_e >= 0.0)) {
    throw std::domain_error("learning rates must be >= 0");
  }
  if (c.private_batch <= 0) throw std::domain_error("batch size must be positive");
  if (c.ref_batch <= 0) throw std::domain_error("reference batch must be positive");
  if (!(c.update_clip > 0.0)) throw std::domain_error("update cap must be positive");
}

}  // namespace

Eigen::VectorXd clipped_mean_feature(const nn::ModelParams& extractor,
                                     const data::LabeledSet& slice,
                                     double clip_norm) {
  if (slice.size() == 0) {
    throw std::domain_error("clipped mean needs a non-empty slice");
  }
  if (!(clip_norm > 0.0)) {
    throw std::domain_error("clip bound must be positive");
  }
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(extractor.feature_dim());
  for (long i = 0; i < slice.size(); ++i) {
    sum += clip_vector(nn::forward_features(extractor, slice.point(i)),
                       clip_norm);
  }
  return sum / static_cast<double>(slice.size());
}

double feature_matching_loss(const nn::ModelParams& extractor,
                             const data::LabeledSet& target_batch,
                             const data::LabeledSet& distilled_slice,
                             double clip_norm, double sigma_f, Rng& rng,
                             Eigen::MatrixXd* d_slice) {
  if (!(sigma_f >= 0.0) || !std::isfinite(sigma_f)) {
    throw std::domain_error("sigma_f must be >= 0 and finite");
  }
  const int batch_label = single_label(target_batch, "matching batch");
  const int slice_label = single_label(distilled_slice, "distilled slice");
  if (batch_label != slice_label) {
    throw std::invalid_argument("matching batch and distilled slice disagree on class");
  }

  Eigen::VectorXd target =
      clipped_mean_feature(extractor, target_batch, clip_norm);
  if (sigma_f > 0.0) {
    for (long k = 0; k < target.size(); ++k) {
      target[k] += rng.normal(0.0, sigma_f * clip_norm);
    }
  }

  const long m = distilled_slice.size();
  std::vector<nn::ForwardCache> caches(static_cast<size_t>(m));
  std::vector<Eigen::VectorXd> raw(static_cast<size_t>(m));
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(extractor.feature_dim());
  for (long i = 0; i < m; ++i) {
    raw[i] = nn::forward_features(extractor, distilled_slice.point(i),
                                  &caches[i]);
    mean += clip_vector(raw[i], clip_norm);
  }
  mean /= static_cast<double>(m);

  const Eigen::VectorXd diff = target - mean;
  const double loss = diff.squaredNorm();

  if (d_slice != nullptr) {
    d_slice->resize(m, distilled_slice.dim());
    const Eigen::VectorXd g_mean = -2.0 * diff;  // d loss / d mean
    for (long i = 0; i < m; ++i) {
      const Eigen::VectorXd up =
          clip_backward(raw[i], clip_norm, g_mean) / static_cast<double>(m);
      d_slice->row(i) =
          nn::backward_features(extractor, caches[i], up).input.transpose();
    }
  }
  return loss;
}

double expert_guidance_loss(const nn::ModelParams& expert,
                            const data::LabeledSet& distilled_slice,
                            const data::LabeledSet& references,
                            Eigen::MatrixXd* d_slice) {
  if (references.size() == 0) {
    throw std::domain_error("guidance needs at least one reference");
  }
  const int label = single_label(distilled_slice, "distilled slice");
  const int ref_label = single_label(references, "reference slice");
  if (label != ref_label) {
    throw std::invalid_argument("references and distilled slice disagree on class");
  }

  Eigen::VectorXd centroid = Eigen::VectorXd::Zero(expert.num_classes());
  for (long i = 0; i < references.size(); ++i) {
    centroid += nn::forward_logits(expert, references.point(i));
  }
  centroid /= static_cast<double>(references.size());

  const long m = distilled_slice.size();
  if (d_slice != nullptr) d_slice->resize(m, distilled_slice.dim());
  double loss = 0.0;
  for (long i = 0; i < m; ++i) {
    nn::ForwardCache cache;
    const Eigen::VectorXd logits =
        nn::forward_logits(expert, distilled_slice.point(i), &cache);
    Eigen::VectorXd d_ce, d_kl;
    loss += nn::cross_entropy(logits, label, d_slice ? &d_ce : nullptr);
    loss += nn::kl_softmax(logits, centroid, d_slice ? &d_kl : nullptr);
    if (d_slice != nullptr) {
      const Eigen::VectorXd dlogits = (d_ce + d_kl) / static_cast<double>(m);
      d_slice->row(i) =
          nn::backward(expert, cache, dlogits).input.transpose();
    }
  }
  return loss / static_cast<double>(m);
}

DistillResult distill(data::PrivateDataset& private_set,
                      const data::LabeledSet& synthetic,
                      const std::vector<nn::ModelParams>& extractor_pool,
                      const nn::ModelParams& expert,
                      const DistillConfig& config,
                      const alloc::AllocationPlan& plan,
                      const ledger::BudgetLedger* starting_ledger) {
  validate_config(config);
  if (extractor_pool.empty()) {
    throw std::domain_error("extractor pool is empty");
  }
  const int num_classes = synthetic.num_classes();
  if (num_classes <= 0) {
    throw std::domain_error("synthetic set declares no classes");
  }
  if (private_set.num_classes() != num_classes) {
    throw std::invalid_argument(
        "private and synthetic sets disagree on class count");
  }
  if (config.match_private && config.sigma_f > 0.0 &&
      std::abs(config.sigma_f - plan.sigma_f) >
          1e-9 * std::max(1.0, plan.sigma_f)) {
    throw std::invalid_argument("sigma_f disagrees with the allocation plan");
  }
  if (config.match_private && config.sigma_f > 0.0 &&
      config.sigma_f < gdp::kMinSubsamplingSigma) {
    throw std::domain_error("sigma_f below the supported subsampling range");
  }

  ledger::BudgetLedger audit;
  if (starting_ledger != nullptr) audit = *starting_ledger;
  if (!audit.has_component(ledger::Component::kGeneration)) {
    audit.record(ledger::Component::kGeneration, "moment release (plan summary)",
                 0, plan.sigma_g, 0.0, plan.mu_g.mu);
  }
  if (!audit.has_component(ledger::Component::kExpert)) {
    audit.record(ledger::Component::kExpert, "fine-tune (plan summary)", 0,
                 plan.sigma_e, 0.0, plan.mu_e.mu);
  }
  audit.set_budget(plan.mu_total.mu);

  const Rng master(config.seed);
  Rng init_rng = master.child(1);
  data::LabeledSet s =
      gen::kmeans_sample(synthetic, config.ipc, extractor_pool.front(),
                         init_rng);

  // Sampling rates per class against whichever side is matched.
  std::vector<double> rate(static_cast<size_t>(num_classes), 0.0);
  for (int j = 0; j < num_classes; ++j) {
    const long n = config.match_private ? private_set.class_count(j)
                                        : synthetic.class_count(j);
    if (n == 0) {
      throw std::domain_error("class " + std::to_string(j) +
                              " has no points to match");
    }
    rate[j] = std::min(
        1.0, static_cast<double>(config.private_batch) / static_cast<double>(n));
  }
  const double sensitivity =
      2.0 * config.clip_norm / static_cast<double>(config.private_batch);
  const double mu_per_round =
      config.sigma_f > 0.0
          ? std::sqrt(std::expm1(1.0 / (config.sigma_f * config.sigma_f)))
          : std::numeric_limits<double>::infinity();

  std::vector<double> matching_trace, guidance_trace;
  matching_trace.reserve(static_cast<size_t>(config.iterations));
  guidance_trace.reserve(static_cast<size_t>(config.iterations));

  for (long iter = 0; iter < config.iterations; ++iter) {
    Rng iter_rng = master.child(2, static_cast<std::uint64_t>(iter));
    const size_t pick = iter_rng.index(extractor_pool.size());
    const nn::ModelParams& extractor = extractor_pool[pick];

    double match_sum = 0.0, guide_sum = 0.0;
    long ran = 0;
    for (int j = 0; j < num_classes; ++j) {
      Rng class_rng = iter_rng.child(3, static_cast<std::uint64_t>(j));
      if (config.match_private) {
        audit.record(ledger::Component::kMatching,
                     "feature match class " + std::to_string(j), iter,
                     config.sigma_f, sensitivity, rate[j] * mu_per_round);
      }

      const data::LabeledSet& source =
          config.match_private
              ? private_set.access(data::Mechanism::kFeatureMatching)
              : synthetic;
      const std::vector<long> batch_rows =
          poisson_rows(source.class_index(j), rate[j], class_rng);
      if (batch_rows.empty()) continue;

      const std::vector<long> slice_rows = s.class_index(j);
      const data::LabeledSet batch = source.subset(batch_rows);
      const double noise = config.match_private ? config.sigma_f : 0.0;

      Eigen::MatrixXd d_match;
      const double match_loss = feature_matching_loss(
          extractor, batch, s.subset(slice_rows), config.clip_norm, noise,
          class_rng, &d_match);
      apply_capped_update(s, slice_rows, d_match, config.eta_f,
                          config.update_clip, iter);

      double guide_loss = 0.0;
      if (config.eta_e > 0.0) {
        std::vector<long> ref_rows = synthetic.class_index(j);
        class_rng.shuffle(ref_rows);
        ref_rows.resize(std::min<size_t>(ref_rows.size(),
                                         static_cast<size_t>(config.ref_batch)));
        Eigen::MatrixXd d_guide;
        guide_loss = expert_guidance_loss(expert, s.subset(slice_rows),
                                          synthetic.subset(ref_rows), &d_guide);
        apply_capped_update(s, slice_rows, d_guide, config.eta_e,
                            config.update_clip, iter);
      }
      match_sum += match_loss;
      guide_sum += guide_loss;
      ++ran;
    }
    matching_trace.push_back(ran > 0 ? match_sum / static_cast<double>(ran)
                                     : 0.0);
    guidance_trace.push_back(ran > 0 ? guide_sum / static_cast<double>(ran)
                                     : 0.0);
  }

  if (config.match_private && config.sigma_f > 0.0 && config.iterations > 0) {
    const double worst_rate = *std::max_element(rate.begin(), rate.end());
    const double closed_form =
        gdp::subsampled_mu(gdp::SubsamplingSpec(worst_rate, config.iterations,
                                                config.sigma_f))
            .mu;
    const double booked =
        audit.component_mu(ledger::Component::kMatching);
    if (std::abs(booked - closed_form) > 1e-9 * std::max(1.0, closed_form)) {
      std::ostringstream msg;
      msg << "matching ledger " << booked << " disagrees with closed form "
          << closed_form;
      throw std::logic_error(msg.str());
    }
  }
  audit.enforce();

  DistillResult result{std::move(s), std::move(audit),
                       std::move(matching_trace), std::move(guidance_trace)};
  return result;
}

}  // namespace dpdistill::distill
