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

#include "dpdistill/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dpdistill/errors.hpp"
#include "dpdistill/gdp.hpp"
#include "dpdistill/guard.hpp"
#include "dpdistill/nn.hpp"
#include "json.hpp"

namespace dpdistill::harness {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt2 = 1.4142135623730951;

using nlohmann::json;

void append_double(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
  (void)ec;
}

void validate_dataset(const DatasetSpec& d) {
  if (d.dim <= 0 || d.classes <= 0 || d.per_class <= 0 ||
      d.test_per_class <= 0) {
    throw std::domain_error("dataset spec needs positive sizes");
  }
  if (!(d.separation >= 0.0) || !(d.within_std > 0.0)) {
    throw std::domain_error("dataset spec needs separation >= 0 and std > 0");
  }
}

Eigen::VectorXd draw_point(const Eigen::VectorXd& mean, double spread,
                           long dim, Rng& rng) {
  Eigen::VectorXd x(dim);
  for (long k = 0; k < dim; ++k) x[k] = mean[k] + spread * rng.normal();
  return x;
}

}  // namespace

bool BudgetSpec::unlimited() const { return std::isinf(epsilon); }

Task make_task(const DatasetSpec& spec) {
  validate_dataset(spec);
  const Rng root(spec.seed);
  Rng mean_rng = root.child(1);
  std::vector<Eigen::VectorXd> means;
  for (int c = 0; c < spec.classes; ++c) {
    Eigen::VectorXd dir(spec.dim);
    for (long k = 0; k < spec.dim; ++k) dir[k] = mean_rng.normal();
    const double norm = dir.norm();
    if (norm > 0.0) {
      dir /= norm;
    } else {
      dir.setZero();
      dir[0] = 1.0;
    }
    means.push_back(spec.separation * dir);
  }

  Task task{data::LabeledSet(spec.dim, spec.classes),
            data::LabeledSet(spec.dim, spec.classes)};
  Rng train_rng = root.child(2);
  for (int c = 0; c < spec.classes; ++c) {
    for (long i = 0; i < spec.per_class; ++i) {
      task.train.add(draw_point(means[c], spec.within_std, spec.dim, train_rng),
                     c);
    }
  }
  Rng test_rng = root.child(3);
  for (int c = 0; c < spec.classes; ++c) {
    for (long i = 0; i < spec.test_per_class; ++i) {
      task.test.add(draw_point(means[c], spec.within_std, spec.dim, test_rng),
                    c);
    }
  }
  return task;
}

double moment_w2(const gen::DpMoments& a, const gen::DpMoments& b) {
  if (a.classes.size() != b.classes.size() || a.dim != b.dim) {
    throw std::invalid_argument("moment releases have different shapes");
  }
  if (a.classes.empty()) {
    throw std::domain_error("moment releases are empty");
  }
  double sum = 0.0;
  for (size_t c = 0; c < a.classes.size(); ++c) {
    const int label = static_cast<int>(c);
    const double dm =
        (a.classes[c].mean - b.classes[c].mean).squaredNorm();
    const Eigen::VectorXd sa = a.variance(label).cwiseSqrt();
    const Eigen::VectorXd sb = b.variance(label).cwiseSqrt();
    sum += std::sqrt(dm + (sa - sb).squaredNorm());
  }
  return sum / static_cast<double>(a.classes.size());
}

data::LabeledSet random_subset_per_class(const data::LabeledSet& set,
                                         long per_class, Rng& rng) {
  if (per_class <= 0) throw std::domain_error("subset size must be positive");
  std::vector<long> rows;
  for (int c = 0; c < set.num_classes(); ++c) {
    std::vector<long> idx = set.class_index(c);
    if (static_cast<long>(idx.size()) < per_class) {
      throw std::domain_error("class " + std::to_string(c) +
                              " has fewer points than requested");
    }
    rng.shuffle(idx);
    rows.insert(rows.end(), idx.begin(), idx.begin() + per_class);
  }
  return set.subset(rows);
}

EvalResult evaluate_distilled(const data::LabeledSet& distilled,
                              const data::LabeledSet& test,
                              const EvalSpec& spec) {
  if (distilled.empty()) throw std::domain_error("distilled set is empty");
  if (test.empty()) throw std::domain_error("test set is empty");
  if (distilled.dim() != test.dim()) {
    throw ShapeError("distilled and test sets have different dimensions");
  }
  if (spec.seeds <= 0) throw std::domain_error("need at least one eval seed");

  const int classes = std::max(distilled.num_classes(), test.num_classes());
  const Rng root(spec.seed);
  auto run_one = [&](int i) {
    Rng model_rng = root.child(100, static_cast<std::uint64_t>(i));
    nn::ModelParams model =
        nn::make_mlp(distilled.dim(), spec.hidden, classes, model_rng);
    nn::TrainOptions options;
    options.epochs = spec.epochs;
    options.lr = spec.lr;
    options.batch_size = spec.batch;
    Rng train_rng = root.child(200, static_cast<std::uint64_t>(i));
    nn::train(model, distilled, options, train_rng);
    return nn::accuracy(model, test);
  };

  std::vector<std::future<double>> futures;
  futures.reserve(static_cast<size_t>(spec.seeds));
  for (int i = 0; i < spec.seeds; ++i) {
    futures.push_back(std::async(std::launch::async, run_one, i));
  }
  EvalResult result;
  for (auto& f : futures) result.per_seed.push_back(f.get());

  double sum = 0.0;
  for (double a : result.per_seed) sum += a;
  result.mean = sum / static_cast<double>(result.per_seed.size());
  double var = 0.0;
  for (double a : result.per_seed) {
    var += (a - result.mean) * (a - result.mean);
  }
  result.stddev = std::sqrt(var / static_cast<double>(result.per_seed.size()));
  return result;
}

namespace {

// Searched sigma_g: released-moment distance hits multiplier times the
// distance at the full-budget noise level. All probe draws reuse one child
// stream so the score is monotone in sigma and exactly repeatable.
double probe_mu_g(data::PrivateDataset& priv, const gen::DpMoments& exact,
                     double clip_radius, double mu_total,
                     const AllocationKnobs& knobs, const Rng& master) {
  const double sigma_ref = kSqrt2 / mu_total;
  auto evaluate = [&](double sigma) {
    Rng probe_rng = master.child(20);
    const data::LabeledSet& t = priv.access(data::Mechanism::kMomentRelease);
    return moment_w2(gen::release_moments(t, sigma, clip_radius, probe_rng),
                     exact);
  };
  const double target = knobs.moment_multiplier * evaluate(sigma_ref);
  double hi = 2.0 * sigma_ref;
  while (evaluate(hi) <= target && hi < 1e6 * sigma_ref) hi *= 2.0;
  alloc::UtilityProbe probe{evaluate, target, alloc::Direction::kMinimize};
  const double sigma = alloc::search_noise_for_target(
      probe, alloc::SearchBracket{sigma_ref, hi}, 1e-4 * sigma_ref);
  return kSqrt2 / sigma;  // the mu spent by a two-release run at that sigma
}

// Searched sigma_e: fine-tuned accuracy hits fraction of the accuracy at the
// sigma that would spend the whole budget on the expert.
double probe_mu_e(data::PrivateDataset& priv, const nn::ModelParams& pretrained,
                  const data::LabeledSet& test, const ExpertSpec& expert,
                  double p_e, long t_e, double mu_total,
                  const AllocationKnobs& knobs, const Rng& master) {
  const double sigma_full =
      alloc::sigma_for_budget(gdp::GdpBudget(mu_total), p_e, t_e);
  auto evaluate = [&](double sigma) {
    nn::ModelParams model = pretrained;
    nn::TrainOptions options;
    options.epochs = expert.finetune_epochs;
    options.lr = expert.lr;
    options.batch_size = expert.batch;
    options.dp = nn::GradClipSpec{expert.clip_norm, sigma, expert.batch};
    Rng train_rng = master.child(24);
    nn::train(model, priv.access(data::Mechanism::kExpertFineTune), options,
              train_rng);
    return nn::accuracy(model, test);
  };
  const double target = knobs.accuracy_fraction * evaluate(sigma_full);
  double hi = 2.0 * sigma_full;
  while (evaluate(hi) >= target && hi < 4096.0 * sigma_full) hi *= 2.0;
  alloc::UtilityProbe probe{evaluate, target, alloc::Direction::kMaximize};
  const double sigma = alloc::search_noise_for_target(
      probe, alloc::SearchBracket{sigma_full, hi}, 1e-3 * sigma_full);
  return gdp::subsampled_mu(gdp::SubsamplingSpec(p_e, t_e, sigma)).mu;
}

}  // namespace

PipelineResult run_pipeline(const ExperimentConfig& config) {
  validate_dataset(config.dataset);
  if (!(config.clip_radius > 0.0)) {
    throw std::domain_error("clip radius must be positive");
  }
  if (config.synthetic_per_class < config.distill.ipc) {
    throw std::domain_error("synthetic set smaller than ipc");
  }
  const bool unlimited = config.budget.unlimited();
  if (!unlimited) {
    gdp::DpBudget(config.budget.epsilon, config.budget.delta);  // validates
  }

  Task task = make_task(config.dataset);
  data::LabeledSet test = std::move(task.test);
  data::PrivateDataset priv(std::move(task.train));
  const Rng master(config.seed);
  const long dim = priv.dim();
  const int classes = priv.num_classes();

  ledger::BudgetLedger audit;
  RunReport report;
  report.epsilon = config.budget.epsilon;
  report.delta = config.budget.delta;

  // noiseless reference moments, used by the probe and the distance metric
  Rng exact_rng(0);
  const gen::DpMoments exact =
      gen::release_moments(priv.access(data::Mechanism::kMomentRelease), 0.0,
                           config.clip_radius, exact_rng);

  double mu_total = kInf;
  double mu_g = kInf;
  if (!unlimited) {
    mu_total =
        gdp::dp_to_gdp(
            gdp::DpBudget(config.budget.epsilon, config.budget.delta))
            .mu;
    mu_g = config.knobs.probe
               ? probe_mu_g(priv, exact, config.clip_radius, mu_total,
                               config.knobs, master)
               : config.knobs.share_g * mu_total;
  }

  // moment release: two releases per class, so the per-release noise level
  // sqrt(2)/mu_g makes the composed generation spend exactly mu_g
  const double sigma_g_use = unlimited ? 0.0 : kSqrt2 / mu_g;
  Rng release_rng = master.child(21);
  const gen::DpMoments moments =
      gen::release_moments(priv.access(data::Mechanism::kMomentRelease),
                           sigma_g_use, config.clip_radius, release_rng);
  const double mu_release = sigma_g_use > 0.0 ? 1.0 / sigma_g_use : kInf;
  for (int c = 0; c < classes; ++c) {
    const double n_c = static_cast<double>(priv.class_count(c));
    audit.record(ledger::Component::kGeneration,
                 "mean release class " + std::to_string(c), c, sigma_g_use,
                 2.0 * config.clip_radius / n_c, mu_release);
    audit.record(ledger::Component::kGeneration,
                 "second-moment release class " + std::to_string(c), c,
                 sigma_g_use,
                 2.0 * config.clip_radius * config.clip_radius / n_c,
                 mu_release);
  }
  report.moment_distance = moment_w2(moments, exact);

  Rng synth_rng = master.child(22);
  data::LabeledSet synthetic =
      gen::sample_synthetic(moments, config.synthetic_per_class, synth_rng);

  // expert: public pre-training on the synthetic set
  Rng expert_init_rng = master.child(23);
  nn::ModelParams expert =
      nn::make_mlp(dim, config.expert.hidden, classes, expert_init_rng);
  {
    nn::TrainOptions pre;
    pre.epochs = config.expert.pretrain_epochs;
    pre.lr = config.expert.lr;
    pre.batch_size = config.expert.batch;
    Rng pre_rng = master.child(30);
    nn::train(expert, synthetic, pre, pre_rng);
  }

  const long n_total = priv.size();
  const long steps_per_epoch =
      (n_total + config.expert.batch - 1) / config.expert.batch;
  const long t_e = config.expert.finetune_epochs * steps_per_epoch;
  const double p_e = std::min(
      1.0, static_cast<double>(config.expert.batch) /
               static_cast<double>(n_total));

  double mu_e = kInf;
  if (!unlimited) {
    mu_e = config.knobs.probe
               ? probe_mu_e(priv, expert, test, config.expert, p_e, t_e,
                            mu_total, config.knobs, master)
               : config.knobs.share_e * mu_total;
  }

  long min_class = priv.class_count(0);
  for (int c = 1; c < classes; ++c) {
    min_class = std::min(min_class, priv.class_count(c));
  }
  const double p_match = std::min(
      1.0, static_cast<double>(config.distill.private_batch) /
               static_cast<double>(min_class));

  alloc::AllocationPlan plan;
  if (unlimited) {
    plan.mu_total = gdp::GdpBudget(kInf);
    plan.mu_g = gdp::GdpBudget(kInf);
    plan.mu_e = gdp::GdpBudget(kInf);
    plan.mu_f = gdp::GdpBudget(kInf);
  } else {
    plan = alloc::allocate(
        gdp::DpBudget(config.budget.epsilon, config.budget.delta),
        gdp::GdpBudget(mu_g), gdp::GdpBudget(mu_e),
        alloc::SamplingPlan{p_match, config.distill.iterations},
        alloc::SamplingPlan{p_e, t_e});
  }

  // private fine-tune at the allocated noise level
  {
    nn::TrainOptions ft;
    ft.epochs = config.expert.finetune_epochs;
    ft.lr = config.expert.lr;
    ft.batch_size = config.expert.batch;
    if (!unlimited) {
      ft.dp = nn::GradClipSpec{config.expert.clip_norm, plan.sigma_e,
                               config.expert.batch};
    }
    Rng ft_rng = master.child(25);
    const nn::TrainResult ft_result = nn::train(
        expert, priv.access(data::Mechanism::kExpertFineTune), ft, ft_rng);
    if (ft_result.steps != t_e) {
      throw std::logic_error("fine-tune step count disagrees with accounting");
    }
    audit.record(ledger::Component::kExpert,
                 "dp-sgd fine-tune (" + std::to_string(t_e) + " steps)", 0,
                 unlimited ? 0.0 : plan.sigma_e, config.expert.clip_norm,
                 unlimited ? kInf : plan.mu_e.mu);
  }
  report.expert_accuracy = nn::accuracy(expert, test);

  Rng pool_rng = master.child(26);
  std::vector<nn::ModelParams> pool;
  const long pool_size = std::max<long>(1, config.distill.pool_size);
  pool.reserve(static_cast<size_t>(pool_size));
  for (long i = 0; i < pool_size; ++i) {
    pool.push_back(nn::make_mlp(dim, config.extractor_hidden, classes,
                                pool_rng));
  }

  distill::DistillConfig dc = config.distill;
  dc.sigma_f = unlimited ? 0.0 : plan.sigma_f;
  dc.seed = master.child(27).seed();
  distill::DistillResult dres =
      distill::distill(priv, synthetic, pool, expert, dc, plan, &audit);

  const EvalResult eval = evaluate_distilled(dres.distilled, test, config.eval);

  report.mu_total = plan.mu_total.mu;
  report.mu_g = unlimited ? kInf : plan.mu_g.mu;
  report.mu_e = unlimited ? kInf : plan.mu_e.mu;
  report.mu_f = unlimited ? kInf : plan.mu_f.mu;
  report.sigma_g = sigma_g_use;
  report.sigma_e = unlimited ? 0.0 : plan.sigma_e;
  report.sigma_f = dc.sigma_f;
  report.ledger_mu = dres.audit.total_mu();
  if (unlimited) {
    report.delta_spent = 0.0;
    report.budget_ok = true;
  } else {
    report.delta_spent =
        gdp::gdp_to_dp(gdp::GdpBudget(report.ledger_mu),
                       config.budget.epsilon)
            .delta;
    report.budget_ok = report.delta_spent <=
                       config.budget.delta * (1.0 + 1e-9) + 1e-18;
  }
  report.accuracy_mean = eval.mean;
  report.accuracy_std = eval.stddev;
  report.accuracy_per_seed = eval.per_seed;
  report.matching_loss = dres.matching_loss;
  report.guidance_loss = dres.guidance_loss;
  report.undeclared_reads = priv.undeclared_reads();
  report.ledger_text = dres.audit.to_text();

  PipelineResult result{std::move(dres.distilled), std::move(synthetic),
                        std::move(dres.audit), plan, std::move(report)};
  return result;
}

namespace {

json num(double v) {
  if (std::isnan(v)) return json("nan");
  if (std::isinf(v)) return json(v > 0.0 ? "inf" : "-inf");
  return json(v);
}

double num_from(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ParseError("unrecognized numeric string '" + s + "'");
  }
  return j.get<double>();
}

json arr(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["dataset"] = {{"dim", c.dataset.dim},
                  {"classes", c.dataset.classes},
                  {"per_class", c.dataset.per_class},
                  {"test_per_class", c.dataset.test_per_class},
                  {"separation", c.dataset.separation},
                  {"within_std", c.dataset.within_std},
                  {"seed", c.dataset.seed}};
  j["budget"] = {{"epsilon", num(c.budget.epsilon)},
                 {"delta", c.budget.delta}};
  j["knobs"] = {{"probe", c.knobs.probe},
                {"share_g", c.knobs.share_g},
                {"share_e", c.knobs.share_e},
                {"moment_multiplier", c.knobs.moment_multiplier},
                {"accuracy_fraction", c.knobs.accuracy_fraction}};
  j["distill"] = {{"ipc", c.distill.ipc},
                  {"iterations", c.distill.iterations},
                  {"clip_norm", c.distill.clip_norm},
                  {"eta_f", c.distill.eta_f},
                  {"eta_e", c.distill.eta_e},
                  {"private_batch", c.distill.private_batch},
                  {"ref_batch", c.distill.ref_batch},
                  {"pool_size", c.distill.pool_size},
                  {"match_private", c.distill.match_private},
                  {"update_clip", c.distill.update_clip}};
  j["expert"] = {{"hidden", c.expert.hidden},
                 {"pretrain_epochs", c.expert.pretrain_epochs},
                 {"finetune_epochs", c.expert.finetune_epochs},
                 {"lr", c.expert.lr},
                 {"batch", c.expert.batch},
                 {"clip_norm", c.expert.clip_norm}};
  j["eval"] = {{"hidden", c.eval.hidden},
               {"epochs", c.eval.epochs},
               {"lr", c.eval.lr},
               {"batch", c.eval.batch},
               {"seeds", c.eval.seeds},
               {"seed", c.eval.seed}};
  j["clip_radius"] = c.clip_radius;
  j["synthetic_per_class"] = c.synthetic_per_class;
  j["extractor_hidden"] = c.extractor_hidden;
  j["seed"] = c.seed;
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  ExperimentConfig c;
  try {
    const json j = json::parse(text);
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      c.dataset.dim = d.value("dim", c.dataset.dim);
      c.dataset.classes = d.value("classes", c.dataset.classes);
      c.dataset.per_class = d.value("per_class", c.dataset.per_class);
      c.dataset.test_per_class =
          d.value("test_per_class", c.dataset.test_per_class);
      c.dataset.separation = d.value("separation", c.dataset.separation);
      c.dataset.within_std = d.value("within_std", c.dataset.within_std);
      c.dataset.seed = d.value("seed", c.dataset.seed);
    }
    if (j.contains("budget")) {
      const json& b = j.at("budget");
      if (b.contains("epsilon")) c.budget.epsilon = num_from(b.at("epsilon"));
      c.budget.delta = b.value("delta", c.budget.delta);
    }
    if (j.contains("knobs")) {
      const json& k = j.at("knobs");
      c.knobs.probe = k.value("probe", c.knobs.probe);
      c.knobs.share_g = k.value("share_g", c.knobs.share_g);
      c.knobs.share_e = k.value("share_e", c.knobs.share_e);
      c.knobs.moment_multiplier =
          k.value("moment_multiplier", c.knobs.moment_multiplier);
      c.knobs.accuracy_fraction =
          k.value("accuracy_fraction", c.knobs.accuracy_fraction);
    }
    if (j.contains("distill")) {
      const json& d = j.at("distill");
      c.distill.ipc = d.value("ipc", c.distill.ipc);
      c.distill.iterations = d.value("iterations", c.distill.iterations);
      c.distill.clip_norm = d.value("clip_norm", c.distill.clip_norm);
      c.distill.eta_f = d.value("eta_f", c.distill.eta_f);
      c.distill.eta_e = d.value("eta_e", c.distill.eta_e);
      c.distill.private_batch =
          d.value("private_batch", c.distill.private_batch);
      c.distill.ref_batch = d.value("ref_batch", c.distill.ref_batch);
      c.distill.pool_size = d.value("pool_size", c.distill.pool_size);
      c.distill.match_private =
          d.value("match_private", c.distill.match_private);
      c.distill.update_clip = d.value("update_clip", c.distill.update_clip);
    }
    if (j.contains("expert")) {
      const json& e = j.at("expert");
      c.expert.hidden = e.value("hidden", c.expert.hidden);
      c.expert.pretrain_epochs =
          e.value("pretrain_epochs", c.expert.pretrain_epochs);
      c.expert.finetune_epochs =
          e.value("finetune_epochs", c.expert.finetune_epochs);
      c.expert.lr = e.value("lr", c.expert.lr);
      c.expert.batch = e.value("batch", c.expert.batch);
      c.expert.clip_norm = e.value("clip_norm", c.expert.clip_norm);
    }
    if (j.contains("eval")) {
      const json& e = j.at("eval");
      c.eval.hidden = e.value("hidden", c.eval.hidden);
      c.eval.epochs = e.value("epochs", c.eval.epochs);
      c.eval.lr = e.value("lr", c.eval.lr);
      c.eval.batch = e.value("batch", c.eval.batch);
      c.eval.seeds = e.value("seeds", c.eval.seeds);
      c.eval.seed = e.value("seed", c.eval.seed);
    }
    c.clip_radius = j.value("clip_radius", c.clip_radius);
    c.synthetic_per_class =
        j.value("synthetic_per_class", c.synthetic_per_class);
    c.extractor_hidden = j.value("extractor_hidden", c.extractor_hidden);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config parse failed: ") + e.what());
  }
  return c;
}

std::string report_to_json(const RunReport& r) {
  json j;
  j["epsilon"] = num(r.epsilon);
  j["delta"] = r.delta;
  j["mu_total"] = num(r.mu_total);
  j["mu_g"] = num(r.mu_g);
  j["mu_e"] = num(r.mu_e);
  j["mu_f"] = num(r.mu_f);
  j["sigma_g"] = r.sigma_g;
  j["sigma_e"] = r.sigma_e;
  j["sigma_f"] = r.sigma_f;
  j["ledger_mu"] = num(r.ledger_mu);
  j["delta_spent"] = r.delta_spent;
  j["budget_ok"] = r.budget_ok;
  j["moment_distance"] = r.moment_distance;
  j["expert_accuracy"] = r.expert_accuracy;
  j["accuracy_mean"] = r.accuracy_mean;
  j["accuracy_std"] = r.accuracy_std;
  j["accuracy_per_seed"] = arr(r.accuracy_per_seed);
  j["matching_loss"] = arr(r.matching_loss);
  j["guidance_loss"] = arr(r.guidance_loss);
  j["undeclared_reads"] = r.undeclared_reads;
  return j.dump(2) + "\n";
}

void write_artifacts(const std::string& dir, const ExperimentConfig& config,
                     const PipelineResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base(dir);

  std::ofstream cfg(base / "config.json");
  cfg << config_to_json(config);

  data::write_csv_file(result.distilled, (base / "distilled.csv").string());

  std::ofstream led(base / "ledger.txt");
  led << result.audit.to_text();

  std::ofstream rep(base / "report.json");
  rep << report_to_json(result.report);

  std::string trace = "iteration,matching,guidance\n";
  for (size_t i = 0; i < result.report.matching_loss.size(); ++i) {
    trace += std::to_string(i);
    trace += ',';
    append_double(trace, result.report.matching_loss[i]);
    trace += ',';
    const double g = i < result.report.guidance_loss.size()
                         ? result.report.guidance_loss[i]
                         : 0.0;
    append_double(trace, g);
    trace += '\n';
  }
  std::ofstream tr(base / "trace.csv");
  tr << trace;
}

}  // namespace dpdistill::harness
