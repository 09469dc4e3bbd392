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

#ifndef MODAFM_NN_HPP
#define MODAFM_NN_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "modafm/autodiff.hpp"
#include "modafm/common.hpp"

namespace modafm::nn {

enum class Activation { kRelu, kIdentity };

struct DenseLayer {
  ad::NodePtr weight;  // out x in
  ad::NodePtr bias;    // out
  Activation activation = Activation::kRelu;

  std::size_t in_dim() const { return weight->value().shape()[1]; }
  std::size_t out_dim() const { return weight->value().shape()[0]; }
};

/// Fully connected stack. Hidden layers use ReLU and the last layer emits raw
/// values (logits for classifier heads). Each layer input is a dropout site
/// whose default rate is zero.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t input_dim, const std::vector<std::size_t>& widths, Rng& rng,
      const std::string& name, Activation output_activation = Activation::kIdentity);

  std::size_t input_dim() const { return layers_.front().in_dim(); }
  std::size_t output_dim() const { return layers_.back().out_dim(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  const std::vector<double>& dropout_sites() const { return dropout_sites_; }
  void set_dropout_sites(std::vector<double> rates);

  std::vector<ad::NodePtr> parameters() const;
  std::size_t parameter_count() const;

  // Deep copy of parameter values into fresh leaves.
  Mlp clone() const;

 private:
  std::vector<DenseLayer> layers_;
  std::vector<double> dropout_sites_;
};

// Applies the network to x (batch x input_dim). When dropout_rates is set it
// overrides the per-site rates (one entry per layer); sites with rate 0 are
// skipped entirely. rng is required whenever a positive rate is in effect.
ad::NodePtr mlp_forward(const Mlp& net, const ad::NodePtr& x,
                        const std::optional<std::vector<double>>& dropout_rates = std::nullopt,
                        Rng* rng = nullptr);

// Gradient-free forward pass on a raw batch.
Tensor mlp_infer(const Mlp& net, const Tensor& x);

// Bernoulli keep-mask with keep probability 1 - rate.
Tensor sample_dropout_mask(const Shape& shape, double rate, Rng& rng);

enum class OptimizerKind { kSgd, kAdaDelta };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdaDelta;
  double learning_rate = 1.0;
  double rho = 0.9;
  double eps = 1e-6;

  bool operator==(const OptimizerConfig&) const = default;
};

/// Owns per-parameter state for SGD or AdaDelta.
///
/// AdaDelta follows the common learning-rate-scaled form:
///   E[g^2]  <- rho E[g^2] + (1 - rho) g^2
///   delta    = sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
///   E[dx^2] <- rho E[dx^2] + (1 - rho) delta^2
///   theta   <- theta - lr * delta
class Optimizer {
 public:
  Optimizer(std::vector<ad::NodePtr> params, OptimizerConfig config);

  // Validates every gradient before touching any parameter; a non-finite
  // gradient aborts the step with NumericalError naming the parameter. Grads
  // are zeroed in both cases.
  void step();
  void zero_grad();

  const OptimizerConfig& config() const { return config_; }
  const std::vector<ad::NodePtr>& params() const { return params_; }
  const Tensor& sq_grad_avg(std::size_t i) const { return sq_grad_avg_[i]; }
  const Tensor& sq_delta_avg(std::size_t i) const { return sq_delta_avg_[i]; }

 private:
  std::vector<ad::NodePtr> params_;
  OptimizerConfig config_;
  std::vector<Tensor> sq_grad_avg_;
  std::vector<Tensor> sq_delta_avg_;
};

std::string optimizer_kind_name(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& name);

// Flat binary checkpoint:
//   "MODAFMCK" | u32 version | u64 count |
//   per parameter: u32 name_len | name | u32 rank | u64 dims[rank] | f64 data[]
// All integers and floats little-endian, parameters in registration order.
void save_checkpoint(const std::string& path, const std::vector<ad::NodePtr>& params);

struct NamedTensor {
  std::string name;
  Tensor value;
};
std::vector<NamedTensor> read_checkpoint(const std::string& path);

// Loads values into params, requiring identical names, order and shapes.
void load_checkpoint(const std::string& path, const std::vector<ad::NodePtr>& params);

}  // namespace modafm::nn

#endif  // MODAFM_NN_HPP
