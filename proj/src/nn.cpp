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

#include "modafm/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "modafm/kernels.hpp"

namespace modafm::nn {

Mlp::Mlp(std::size_t input_dim, const std::vector<std::size_t>& widths, Rng& rng,
         const std::string& name, Activation output_activation) {
  if (widths.empty()) throw std::invalid_argument("mlp '" + name + "': no layers");
  if (input_dim == 0) throw std::invalid_argument("mlp '" + name + "': zero input dimension");
  std::size_t in = input_dim;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::size_t out = widths[i];
    if (out == 0) throw std::invalid_argument("mlp '" + name + "': zero-width layer");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> init(-limit, limit);
    Tensor w({out, in});
    for (double& v : w.data()) v = init(rng);
    const std::string prefix = name + ".layer" + std::to_string(i);
    DenseLayer layer{ad::parameter(std::move(w), prefix + ".weight"),
                     ad::parameter(Tensor({out}), prefix + ".bias"),
                     i + 1 == widths.size() ? output_activation : Activation::kRelu};
    layers_.push_back(std::move(layer));
    in = out;
  }
  dropout_sites_.assign(layers_.size(), 0.0);
}

void Mlp::set_dropout_sites(std::vector<double> rates) {
  if (rates.size() != layers_.size()) {
    throw std::invalid_argument("dropout sites: expected " + std::to_string(layers_.size()) + " rates");
  }
  for (double r : rates) {
    if (!(r >= 0.0 && r < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
  }
  dropout_sites_ = std::move(rates);
}

std::vector<ad::NodePtr> Mlp::parameters() const {
  std::vector<ad::NodePtr> out;
  out.reserve(layers_.size() * 2);
  for (const auto& layer : layers_) {
    out.push_back(layer.weight);
    out.push_back(layer.bias);
  }
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p->value().size();
  return n;
}

Mlp Mlp::clone() const {
  Mlp copy;
  copy.dropout_sites_ = dropout_sites_;
  for (const auto& layer : layers_) {
    copy.layers_.push_back({ad::parameter(layer.weight->value(), layer.weight->name()),
                            ad::parameter(layer.bias->value(), layer.bias->name()), layer.activation});
  }
  return copy;
}

Tensor sample_dropout_mask(const Shape& shape, double rate, Rng& rng) {
  Tensor mask(shape);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : mask.data()) v = u(rng) >= rate ? 1.0 : 0.0;
  return mask;
}

ad::NodePtr mlp_forward(const Mlp& net, const ad::NodePtr& x,
                        const std::optional<std::vector<double>>& dropout_rates, Rng* rng) {
  const Tensor& in = x->value();
  if (in.rank() != 2 || in.shape()[1] != net.input_dim()) {
    throw ad::ShapeError("mlp: expected batch x " + std::to_string(net.input_dim()) + " input, got " +
                         shape_string(in.shape()));
  }
  const auto& layers = net.layers();
  if (dropout_rates && dropout_rates->size() != 1 && dropout_rates->size() != layers.size()) {
    throw std::invalid_argument("mlp: dropout override needs 1 or " + std::to_string(layers.size()) +
                                " rates");
  }
  ad::NodePtr h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    double rate = net.dropout_sites()[i];
    if (dropout_rates) rate = dropout_rates->size() == 1 ? (*dropout_rates)[0] : (*dropout_rates)[i];
    if (rate > 0.0) {
      if (rng == nullptr) throw std::invalid_argument("mlp: dropout requested without a generator");
      h = ad::apply_dropout_mask(h, sample_dropout_mask(h->value().shape(), rate, *rng), rate);
    }
    h = ad::add(ad::matmul_bt(h, layers[i].weight), layers[i].bias);
    if (layers[i].activation == Activation::kRelu) h = ad::relu(h);
  }
  return h;
}

Tensor mlp_infer(const Mlp& net, const Tensor& x) {
  ad::NoGradGuard guard;
  return mlp_forward(net, ad::constant(x))->value();
}

Optimizer::Optimizer(std::vector<ad::NodePtr> params, OptimizerConfig config)
    : params_(std::move(params)), config_(config) {
  if (!(config_.learning_rate > 0.0)) throw std::invalid_argument("optimizer: learning rate must be positive");
  if (config_.kind == OptimizerKind::kAdaDelta) {
    if (!(config_.rho >= 0.0 && config_.rho < 1.0)) throw std::invalid_argument("adadelta: rho must lie in [0, 1)");
    if (!(config_.eps > 0.0)) throw std::invalid_argument("adadelta: eps must be positive");
    for (const auto& p : params_) {
      sq_grad_avg_.emplace_back(p->value().shape());
      sq_delta_avg_.emplace_back(p->value().shape());
    }
  }
}

void Optimizer::zero_grad() {
  for (const auto& p : params_) p->zero_grad();
}

void Optimizer::step() {
  for (const auto& p : params_) {
    if (!p->grad().all_finite()) {
      zero_grad();
      throw NumericalError("non-finite gradient in parameter '" + p->name() + "'");
    }
  }
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& value = params_[i]->mutable_value();
    const Tensor& grad = params_[i]->grad();
    if (config_.kind == OptimizerKind::kSgd) {
      k.axpy(-config_.learning_rate, grad.ptr(), value.ptr(), value.size());
    } else {
      k.adadelta(value.ptr(), grad.ptr(), sq_grad_avg_[i].ptr(), sq_delta_avg_[i].ptr(), value.size(),
                 config_.learning_rate, config_.rho, config_.eps);
    }
  }
  zero_grad();
}

std::string optimizer_kind_name(OptimizerKind kind) {
  return kind == OptimizerKind::kSgd ? "sgd" : "adadelta";
}

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adadelta") return OptimizerKind::kAdaDelta;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd or adadelta)");
}

}  // namespace modafm::nn
