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

#ifndef MODAFM_MODA_HPP
#define MODAFM_MODA_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "modafm/augment.hpp"
#include "modafm/autodiff.hpp"
#include "modafm/common.hpp"
#include "modafm/data.hpp"
#include "modafm/nn.hpp"

namespace modafm::moda {

/// Trainable logits beta over M sources; alpha = softmax(beta) is derived on
/// every read.
class MixtureWeights {
 public:
  MixtureWeights() = default;
  // beta ~ U[0, 1]^M.
  MixtureWeights(std::size_t num_sources, Rng& rng);
  static MixtureWeights from_beta(std::vector<double> beta);

  std::size_t size() const { return beta_->value().size(); }
  const ad::NodePtr& beta() const { return beta_; }
  std::vector<double> alpha() const;
  ad::NodePtr alpha_node() const;  // softmax(beta) in the graph

 private:
  ad::NodePtr beta_;
};

struct ModelSpec {
  std::size_t input_dim = 2;
  std::size_t num_classes = 2;
  std::size_t num_sources = 3;
  std::vector<std::size_t> extractor_widths{64, 64};
  std::vector<std::size_t> classifier_hidden{32};
  std::vector<std::size_t> discriminator_hidden{32};

  bool operator==(const ModelSpec&) const = default;
};

/// Feature extractor, label classifier, two-way domain discriminator and the
/// source mixture.
class ModaModel {
 public:
  ModaModel(const ModelSpec& spec, Rng& rng);

  const ModelSpec& spec() const { return spec_; }
  nn::Mlp extractor;
  nn::Mlp classifier;
  nn::Mlp discriminator;
  MixtureWeights mixture;

  // Registration order: extractor, classifier, discriminator, beta.
  std::vector<ad::NodePtr> parameters() const;
  std::vector<ad::NodePtr> network_parameters() const;  // without beta

  Tensor predict_logits(const Tensor& x) const;
  std::vector<int> predict(const Tensor& x) const;
  double accuracy(const Tensor& x, const std::vector<int>& labels) const;

 private:
  ModelSpec spec_;
};

// Mean cross-entropy of raw logits against integer labels.
ad::NodePtr cross_entropy(const ad::NodePtr& logits, const std::vector<std::size_t>& labels);

// Extractor outputs for one bundle, shared by the loss terms of a step.
struct BatchFeatures {
  std::vector<ad::NodePtr> source;
  ad::NodePtr target;
};
BatchFeatures extract_features(const ModaModel& model, const data::BatchBundle& batches);

struct ClassLoss {
  ad::NodePtr loss;
  std::vector<double> per_domain;
};

// sum_j alpha_j * CE(S_j). alpha defaults to the model mixture.
ClassLoss class_loss(const ModaModel& model, const data::BatchBundle& batches,
                     const ad::NodePtr& alpha = nullptr);
ClassLoss class_loss(const ModaModel& model, const BatchFeatures& features, const data::BatchBundle& batches,
                     const ad::NodePtr& alpha);

// sum_j alpha_j * CE(d(S_j), source) + CE(d(T), target), sources labeled 0
// and target 1. When reversal is set, the features entering the
// discriminator and alpha are passed through gradient reversal with that
// constant.
ad::NodePtr disc_loss(const ModaModel& model, const data::BatchBundle& batches, const ad::NodePtr& alpha = nullptr,
                      std::optional<double> reversal = std::nullopt);
ad::NodePtr disc_loss(const ModaModel& model, const BatchFeatures& features, const ad::NodePtr& alpha,
                      std::optional<double> reversal);

struct ConsistencyResult {
  ad::NodePtr loss;
  double masked_fraction = 0.0;
  std::vector<std::size_t> pseudo_labels;
  std::vector<std::size_t> passing;  // rows with confidence above tau
};

// Confidence-thresholded pseudo-label cross-entropy. clean_logits are the
// un-augmented predictions (treated as constants); aug_logits is the graph of
// the augmented pass. Normalized by the full batch size. When no row passes,
// the loss is the constant 0.
ConsistencyResult fixmatch_loss(const Tensor& clean_logits, const ad::NodePtr& aug_logits, double tau);

// Pseudo-label fraction above tau, without building an augmented pass.
double masked_fraction(const Tensor& clean_logits, double tau);

// Full consistency term for the target batch: deterministic pseudo-labels,
// then one augmented pass drawn from spec.
ConsistencyResult consistency_loss(const ModaModel& model, const Tensor& target_x,
                                   const augment::AugmentSpec& spec, double tau, Rng& rng);

// mu_s * sum_j alpha_j^2.
ad::NodePtr sparsity_term(const ad::NodePtr& alpha, double mu_s);
ad::NodePtr sparsity_term(const MixtureWeights& mixture, double mu_s);

struct ObjectiveConfig {
  double mu_d = 0.1;
  double mu_s = 1e-3;
  double mu_c = 1.0;
  double tau = 0.9;
  double reversal = 1.0;
  bool learn_alpha = true;       // false: alpha fixed uniform
  bool use_discriminator = true;
  bool use_consistency = true;   // also requires mu_c > 0
  augment::AugmentSpec augment;

  bool operator==(const ObjectiveConfig&) const = default;
};

struct LossBreakdown {
  double class_loss = 0.0;
  double disc_loss = 0.0;
  double cons_loss = 0.0;
  double sparsity_term = 0.0;
  double total = 0.0;
  std::vector<double> per_domain_class_losses;
  double masked_fraction = 0.0;
};

/// Graph for one step. `optimized` is the node backward runs on; with the
/// reversal sites in place its parameter gradients are those of the reported
/// total for extractor, classifier and beta, and of +mu_d * disc for the
/// discriminator.
struct Objective {
  ad::NodePtr optimized;
  LossBreakdown breakdown;
};

Objective build_objective(const ModaModel& model, const data::BatchBundle& batches, const ObjectiveConfig& config,
                          Rng& rng);

// Optimizer parameter set matching the config (beta only when learned).
std::vector<ad::NodePtr> trainable_parameters(const ModaModel& model, const ObjectiveConfig& config);

// One simultaneous update of every trainable parameter. On a non-finite loss
// or gradient nothing is modified and NumericalError names the term.
LossBreakdown train_step(ModaModel& model, nn::Optimizer& optimizer, const data::BatchBundle& batches,
                         const ObjectiveConfig& config, Rng& rng);

/// Epoch-indexed alpha rows; row 0 is the initial mixture.
class AlphaTrajectory {
 public:
  void record(std::vector<double> alpha);
  const std::vector<std::vector<double>>& rows() const { return rows_; }
  std::size_t epochs() const { return rows_.empty() ? 0 : rows_.size() - 1; }
  const std::vector<double>& at_epoch(std::size_t epoch) const { return rows_.at(epoch); }
  // Largest |alpha_j - 1/M| over the rows from epoch `from` on.
  double max_deviation_from_uniform(std::size_t from = 0) const;

 private:
  std::vector<std::vector<double>> rows_;
};

}  // namespace modafm::moda

#endif  // MODAFM_MODA_HPP
