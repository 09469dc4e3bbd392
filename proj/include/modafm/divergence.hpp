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

#ifndef MODAFM_DIVERGENCE_HPP
#define MODAFM_DIVERGENCE_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "modafm/common.hpp"
#include "modafm/data.hpp"
#include "modafm/nn.hpp"
#include "modafm/tensor.hpp"

namespace modafm::divergence {

// Raised when a quantity needs ground-truth target labels that are absent.
class OracleLabelsRequired : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Mixture complexity term: 2 sqrt(M (2d ln(2(n+1)) + ln(8/delta)) / n * sum alpha^2).
double compute_B(const std::vector<double>& alpha, std::size_t num_sources, double vc_dim, std::size_t n,
                 double delta);
// Single-domain complexity term: 2 sqrt((2d ln(2n) + ln(4/delta)) / n).
double compute_V(double vc_dim, std::size_t n, double delta);

struct ProbeConfig {
  std::vector<std::size_t> hidden{32};
  std::size_t epochs = 500;
  std::size_t batch_size = 64;
  nn::OptimizerConfig optimizer;
  double train_fraction = 0.7;

  bool operator==(const ProbeConfig&) const = default;
};

// Labeled rows with a loss weight, one per training group.
struct ProbeGroup {
  Tensor x;
  std::vector<std::size_t> y;
  double weight = 1.0;
};

// Fresh MLP minimizing sum_g weight_g * CE(group g). Each step draws one
// mini-batch per group; an epoch covers the largest group.
nn::Mlp train_probe(const std::vector<ProbeGroup>& groups, std::size_t num_classes, const ProbeConfig& config,
                    std::uint64_t seed);

double zero_one_error(const nn::Mlp& net, const Tensor& x, const std::vector<std::size_t>& y);

struct HDivergenceEstimate {
  double value = 0.0;       // in [0, 2]
  double test_error = 0.5;  // balanced
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
};

HDivergenceEstimate estimate_h_divergence_detailed(const Tensor& a, const Tensor& b, const ProbeConfig& config,
                                                   std::uint64_t seed);
double estimate_h_divergence(const Tensor& a, const Tensor& b, const ProbeConfig& config, std::uint64_t seed);

struct LambdaEstimate {
  double value = 0.0;
  double weighted_source_risk = 0.0;
  double target_risk = 0.0;
};

// Joint probe on the alpha-weighted sources and the target's ground truth.
LambdaEstimate estimate_lambda(const std::vector<data::DomainDataset>& sources, const data::DomainDataset& target,
                               const std::vector<double>& alpha, const ProbeConfig& config, std::uint64_t seed);

// Square root of the Jensen-Shannon divergence, natural log.
double js_distance(const std::vector<double>& p, const std::vector<double>& q);

std::vector<double> label_distribution(const data::DomainDataset& dataset);
std::vector<double> label_histogram(const std::vector<int>& labels, std::size_t num_classes);

// Rows drawn i.i.d. from the alpha-mixture of the sources.
Tensor sample_mixture(const std::vector<data::DomainDataset>& sources, const std::vector<double>& alpha,
                      std::size_t n, std::uint64_t seed);

struct BoundReport {
  std::vector<double> alpha;
  std::size_t num_sources = 0;
  double vc_dim = 5.0;  // surrogate
  std::size_t n = 0;
  double delta = 0.05;
  double B_alpha = 0.0;
  double V = 0.0;
  double h_divergence_estimate = 0.0;
  std::optional<double> lambda_hat;
  double weighted_source_risk = 0.0;
  std::optional<double> measured_target_error;
  double bound_total = 0.0;
  std::string alpha_source;
  std::string hypothesis;
  std::uint64_t seed = 0;
  ProbeConfig probe;
  std::vector<std::vector<double>> source_label_distributions;
  std::optional<std::vector<double>> target_label_distribution;
  std::vector<double> js_source_target;

  // weighted risk + h/2 + lambda + B + V; lambda counts as 0 when absent.
  double assemble_total() const;
};

BoundReport make_bound_report(std::vector<double> alpha, double vc_dim, std::size_t n, double delta,
                              double h_divergence, std::optional<double> lambda_hat, double weighted_source_risk);

std::string bound_report_json(const BoundReport& report);

}  // namespace modafm::divergence

#endif  // MODAFM_DIVERGENCE_HPP
