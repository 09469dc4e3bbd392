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

#ifndef MODAFM_AUGMENT_HPP
#define MODAFM_AUGMENT_HPP

#include <optional>
#include <string>

#include "modafm/common.hpp"
#include "modafm/tensor.hpp"

// Label-preserving perturbations for the consistency branch.
namespace modafm::augment {

enum class AugmentKind { kNone, kGaussianNoise, kDropout };

struct AugmentSpec {
  AugmentKind kind = AugmentKind::kDropout;
  double sigma_min = 0.0;
  double sigma_max = 0.5;
  double p_min = 0.2;
  double p_max = 0.8;
  // Whether the raw input is a dropout site in addition to the hidden layers.
  bool input_dropout = false;

  void validate() const;  // throws ConfigError
  bool operator==(const AugmentSpec&) const = default;
};

struct Augmented {
  Tensor input;                        // x, or x + noise
  std::optional<double> dropout_rate;  // set for kDropout
  double sigma = 0.0;                  // noise scale drawn for this batch
};

// Noise: one sigma per call, fresh N(0, sigma^2) per element. Dropout: one
// rate per call, applied by the caller to the augmented forward pass only.
Augmented augment_batch(const Tensor& x, const AugmentSpec& spec, Rng& rng);

std::string augment_kind_name(AugmentKind kind);
AugmentKind parse_augment_kind(const std::string& name);

}  // namespace modafm::augment

#endif  // MODAFM_AUGMENT_HPP
