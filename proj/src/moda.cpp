// Copyright 2026 The modafm Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "modafm/moda.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace modafm::moda {

MixtureWeights::MixtureWeights(std::size_t num_sources, Rng& rng) {
  if (num_sources == 0) throw std::invalid_argument("mixture: need at least one source");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> beta(num_sources);
  for (double& b : beta) b = u(rng);
  beta_ = ad::parameter(Tensor::vector(std::move(beta)), "mixture.beta");
}

MixtureWeights MixtureWeights::from_beta(std::vector<double> beta) {
  if (beta.empty()) throw std::invalid_argument("mixture: need at least one source");
  MixtureWeights w;
  w.beta_ = ad::parameter(Tensor::vector(std::move(beta)), "mixture.beta");
  return w;
}

std::vector<double> MixtureWeights::alpha() const {
  const auto b = beta_->value().data();
  const double top = *std::max_element(b.begin(), b.end());
  std::vector<double> a(b.size());
  double z = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j) z += a[j] = std::exp(b[j] - top);
  for (double& v : a) v /= z;
  return a;
}

ad::NodePtr MixtureWeights::alpha_node() const { return ad::softmax(beta_); }

namespace {

std::vector<std::size_t> with_output(std::vector<std::size_t> hidden, std::size_t out) {
  hidden.push_back(out);
  return hidden;
}

}  // namespace

ModaModel::ModaModel(const ModelSpec& spec, Rng& rng) : spec_(spec) {
  if (spec.extractor_widths.empty()) throw ConfigError("model: extractor needs at least one layer");
  if (spec.num_classes < 2) throw ConfigError("model: need at least two classes");
  extractor = nn::Mlp(spec.input_dim, spec.extractor_widths, rng, "extractor", nn::Activation::kRelu);
  const std::size_t feat = spec.extractor_widths.back();
  classifier = nn::Mlp(feat, with_output(spec.classifier_hidden, spec.num_classes), rng, "classifier");
  discriminator = nn::Mlp(feat, with_output(spec.discriminator_hidden, 2), rng, "discriminator");
  mixture = MixtureWeights(spec.num_sources, rng);
}

std::vector<ad::NodePtr> ModaModel::network_parameters() const {
  std::vector<ad::NodePtr> out = extractor.parameters();
  for (const auto& p : classifier.parameters()) out.push_back(p);
  for (const auto& p : discriminator.parameters()) out.push_back(p);
  return out;
}

std::vector<ad::NodePtr> ModaModel::parameters() const {
  auto out = network_parameters();
  out.push_back(mixture.beta());
  return out;
}

Tensor ModaModel::predict_logits(const Tensor& x) const {
  ad::NoGradGuard guard;
  return nn::mlp_forward(classifier, nn::mlp_forward(extractor, ad::constant(x)))->value();
}

std::vector<int> ModaModel::predict(const Tensor& x) const {
  const Tensor logits = predict_logits(x);
  std::vector<int> out(logits.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto row = logits.row(i);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double ModaModel::accuracy(const Tensor& x, const std::vector<int>& labels) const {
  const auto pred = predict(x);
  if (pred.size() != labels.size()) throw std::invalid_argument("accuracy: label count mismatch");
  if (pred.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

ad::NodePtr cross_entropy(const ad::NodePtr& logits, const std::vector<std::size_t>& labels) {
  const Tensor& v = logits->value();
  if (v.rank() != 2 || v.rows() != labels.size()) {
    throw ad::ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                         shape_string(v.shape()));
  }
  for (std::size_t y : labels) {
    if (y >= v.cols()) {
      throw std::invalid_argument("cross_entropy: label " + std::to_string(y) + " outside " +
                                  std::to_string(v.cols()) + " classes");
    }
  }
  auto picked = ad::gather_columns(ad::log_softmax(logits), labels);
  return ad::scale(ad::sum(picked), -1.0 / static_cast<double>(labels.size()));
}

BatchFeatures extract_features(const ModaModel& model, const data::BatchBundle& batches) {
  BatchFeatures f;
  for (const auto& x : batches.source_x) f.source.push_back(nn::mlp_forward(model.extractor, ad::constant(x)));
  f.target = nn::mlp_forward(model.extractor, ad::constant(batches.target_x));
  return f;
}

namespace {

void check_alpha(const ad::NodePtr& alpha, std::size_t m) {
  if (alpha->value().size() != m) {
    throw ad::ShapeError("mixture has " + std::to_string(alpha->value().size()) + " weights for " +
                         std::to_string(m) + " source batches");
  }
}

}  // namespace

ClassLoss class_loss(const ModaModel& model, const BatchFeatures& features, const data::BatchBundle& batches,
                     const ad::NodePtr& alpha) {
  check_alpha(alpha, features.source.size());
  if (batches.source_y.size() != features.source.size()) throw std::invalid_argument("class_loss: sources lack labels");
  ClassLoss out;
  std::vector<ad::NodePtr> terms;
  for (std::size_t j = 0; j < features.source.size(); ++j) {
    auto ce = cross_entropy(nn::mlp_forward(model.classifier, features.source[j]), batches.source_y[j]);
    out.per_domain.push_back(ce->value().item());
    terms.push_back(ce);
  }
  out.loss = ad::sum(ad::mul(alpha, ad::concat_rows(terms)));
  return out;
}

ClassLoss class_loss(const ModaModel& model, const data::BatchBundle& batches, const ad::NodePtr& alpha) {
  return class_loss(model, extract_features(model, batches), batches, alpha ? alpha : model.mixture.alpha_node());
}

ad::NodePtr disc_loss(const ModaModel& model, const BatchFeatures& features, const ad::NodePtr& alpha,
                      std::optional<double> reversal) {
  check_alpha(alpha, features.source.size());
  auto through = [&](const ad::NodePtr& x) { return reversal ? ad::gradient_reversal(x, *reversal) : x; };
  std::vector<ad::NodePtr> terms;
  for (const auto& f : features.source) {
    auto logits = nn::mlp_forward(model.discriminator, through(f));
    terms.push_back(cross_entropy(logits, std::vector<std::size_t>(f->value().rows(), 0)));
  }
  auto target_logits = nn::mlp_forward(model.discriminator, through(features.target));
  auto target_term = cross_entropy(target_logits, std::vector<std::size_t>(features.target->value().rows(), 1));
  return ad::add(ad::sum(ad::mul(through(alpha), ad::concat_rows(terms))), target_term);
}

ad::NodePtr disc_loss(const ModaModel& model, const data::BatchBundle& batches, const ad::NodePtr& alpha,
                      std::optional<double> reversal) {
  return disc_loss(model, extract_features(model, batches), alpha ? alpha : model.mixture.alpha_node(), reversal);
}

namespace {

struct PseudoLabels {
  std::vector<std::size_t> labels;
  std::vector<std::size_t> passing;
};

PseudoLabels pseudo_labels(const Tensor& logits, double tau) {
  if (logits.rank() != 2) throw ad::ShapeError("pseudo labels: logits must be rank 2");
  PseudoLabels out;
  out.labels.resize(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    const auto top = std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - *top);
    out.labels[i] = static_cast<std::size_t>(top - row.begin());
    if (1.0 / z > tau) out.passing.push_back(i);
  }
  return out;
}

}  // namespace

double masked_fraction(const Tensor& clean_logits, double tau) {
  const auto pl = pseudo_labels(clean_logits, tau);
  return pl.labels.empty() ? 0.0 : static_cast<double>(pl.passing.size()) / static_cast<double>(pl.labels.size());
}

ConsistencyResult fixmatch_loss(const Tensor& clean_logits, const ad::NodePtr& aug_logits, double tau) {
  if (aug_logits && aug_logits->value().shape() != clean_logits.shape()) {
    throw ad::ShapeError("consistency: augmented logits " + shape_string(aug_logits->value().shape()) +
                         " vs clean " + shape_string(clean_logits.shape()));
  }
  auto pl = pseudo_labels(clean_logits, tau);
  ConsistencyResult out;
  const std::size_t m = pl.labels.size();
  out.masked_fraction = m == 0 ? 0.0 : static_cast<double>(pl.passing.size()) / static_cast<double>(m);
  if (pl.passing.empty()) {
    out.loss = ad::constant(Tensor::scalar(0.0));
  } else {
    std::vector<std::size_t> targets;
    for (std::size_t i : pl.passing) targets.push_back(pl.labels[i]);
    auto picked = ad::gather_columns(ad::select_rows(ad::log_softmax(aug_logits), pl.passing), targets);
    out.loss = ad::scale(ad::sum(picked), -1.0 / static_cast<double>(m));
  }
  out.pseudo_labels = std::move(pl.labels);
  out.passing = std::move(pl.passing);
  return out;
}

ConsistencyResult consistency_loss(const ModaModel& model, const Tensor& target_x, const augment::AugmentSpec& spec,
                                   double tau, Rng& rng) {
  const Tensor clean = model.predict_logits(target_x);
  if (masked_fraction(clean, tau) == 0.0) return fixmatch_loss(clean, nullptr, tau);
  const augment::Augmented aug = augment::augment_batch(target_x, spec, rng);
  std::optional<std::vector<double>> ext_rates;
  std::optional<std::vector<double>> cls_rates;
  if (aug.dropout_rate) {
    const double p = *aug.dropout_rate;
    ext_rates = std::vector<double>(model.extractor.layers().size(), p);
    if (!spec.input_dropout) (*ext_rates)[0] = 0.0;
    cls_rates = std::vector<double>(model.classifier.layers().size(), p);
  }
  auto feats = nn::mlp_forward(model.extractor, ad::constant(aug.input), ext_rates, &rng);
  auto logits = nn::mlp_forward(model.classifier, feats, cls_rates, &rng);
  return fixmatch_loss(clean, logits, tau);
}

ad::NodePtr sparsity_term(const ad::NodePtr& alpha, double mu_s) {
  if (!(mu_s >= 0.0)) throw std::invalid_argument("sparsity: mu_s must be non-negative");
  return ad::scale(ad::sum(ad::mul(alpha, alpha)), mu_s);
}

ad::NodePtr sparsity_term(const MixtureWeights& mixture, double mu_s) {
  return sparsity_term(mixture.alpha_node(), mu_s);
}

Objective build_objective(const ModaModel& model, const data::BatchBundle& batches, const ObjectiveConfig& config,
                          Rng& rng) {
  const std::size_t m_sources = batches.num_sources();
  ad::NodePtr alpha = config.learn_alpha
                          ? model.mixture.alpha_node()
                          : ad::constant(Tensor::vector(std::vector<double>(m_sources, 1.0 / m_sources)));
  const BatchFeatures features = extract_features(model, batches);

  Objective obj;
  LossBreakdown& b = obj.breakdown;
  ClassLoss cl = class_loss(model, features, batches, alpha);
  b.class_loss = cl.loss->value().item();
  b.per_domain_class_losses = std::move(cl.per_domain);
  obj.optimized = cl.loss;

  if (config.use_discriminator) {
    auto d = disc_loss(model, features, alpha, config.reversal);
    b.disc_loss = d->value().item();
    obj.optimized = ad::add(obj.optimized, ad::scale(d, config.mu_d));
  }

  if (config.use_consistency && config.mu_c > 0.0) {
    ConsistencyResult c = consistency_loss(model, batches.target_x, config.augment, config.tau, rng);
    b.cons_loss = c.loss->value().item();
    b.masked_fraction = c.masked_fraction;
    obj.optimized = ad::add(obj.optimized, ad::scale(c.loss, config.mu_c));
  } else {
    b.masked_fraction = masked_fraction(model.predict_logits(batches.target_x), config.tau);
  }

  auto sp = sparsity_term(alpha, config.mu_s);
  b.sparsity_term = sp->value().item();
  obj.optimized = ad::add(obj.optimized, sp);

  b.total = b.class_loss + config.mu_c * b.cons_loss - config.mu_d * b.disc_loss + b.sparsity_term;
  return obj;
}

std::vector<ad::NodePtr> trainable_parameters(const ModaModel& model, const ObjectiveConfig& config) {
  std::vector<ad::NodePtr> out = model.extractor.parameters();
  for (const auto& p : model.classifier.parameters()) out.push_back(p);
  if (config.use_discriminator) {
    for (const auto& p : model.discriminator.parameters()) out.push_back(p);
  }
  if (config.learn_alpha) out.push_back(model.mixture.beta());
  return out;
}

LossBreakdown train_step(ModaModel& model, nn::Optimizer& optimizer, const data::BatchBundle& batches,
                         const ObjectiveConfig& config, Rng& rng) {
  Objective obj = build_objective(model, batches, config, rng);
  const LossBreakdown& b = obj.breakdown;
  const std::pair<const char*, double> terms[] = {{"class_loss", b.class_loss},
                                                  {"disc_loss", b.disc_loss},
                                                  {"cons_loss", b.cons_loss},
                                                  {"sparsity_term", b.sparsity_term}};
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value)) throw NumericalError(std::string("non-finite ") + name + "; step aborted");
  }
  for (const auto& p : model.parameters()) p->zero_grad();
  ad::backward(obj.optimized);
  optimizer.step();
  return obj.breakdown;
}

void AlphaTrajectory::record(std::vector<double> alpha) {
  double s = 0.0;
  for (double a : alpha) {
    if (!(a > 0.0)) throw NumericalError("alpha left the simplex (non-positive component)");
    s += a;
  }
  if (std::abs(s - 1.0) > 1e-10) throw NumericalError("alpha left the simplex (sum != 1)");
  if (!rows_.empty() && rows_.front().size() != alpha.size()) throw std::invalid_argument("alpha width changed");
  rows_.push_back(std::move(alpha));
}

double AlphaTrajectory::max_deviation_from_uniform(std::size_t from) const {
  double worst = 0.0;
  for (std::size_t e = from; e < rows_.size(); ++e) {
    const double u = 1.0 / static_cast<double>(rows_[e].size());
    for (double a : rows_[e]) worst = std::max(worst, std::abs(a - u));
  }
  return worst;
}

}  // namespace modafm::moda
