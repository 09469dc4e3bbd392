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

#include "modafm/augment.hpp"

#include <cmath>
#include <random>

namespace modafm::augment {

void AugmentSpec::validate() const {
  if (!(p_min >= 0.0 && p_min <= p_max && p_max < 1.0)) {
    throw ConfigError("augment: need 0 <= p_min <= p_max < 1");
  }
  if (!(sigma_min >= 0.0 && sigma_min <= sigma_max && std::isfinite(sigma_max))) {
    throw ConfigError("augment: need 0 <= sigma_min <= sigma_max");
  }
}

Augmented augment_batch(const Tensor& x, const AugmentSpec& spec, Rng& rng) {
  Augmented out{x, std::nullopt, 0.0};
  switch (spec.kind) {
    case AugmentKind::kNone:
      break;
    case AugmentKind::kGaussianNoise: {
      out.sigma = spec.sigma_min == spec.sigma_max
                      ? spec.sigma_min
                      : std::uniform_real_distribution<double>(spec.sigma_min, spec.sigma_max)(rng);
      if (out.sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, out.sigma);
        for (double& v : out.input.data()) v += noise(rng);
      }
      break;
    }
    case AugmentKind::kDropout:
      out.dropout_rate = spec.p_min == spec.p_max
                             ? spec.p_min
                             : std::uniform_real_distribution<double>(spec.p_min, spec.p_max)(rng);
      break;
  }
  return out;
}

std::string augment_kind_name(AugmentKind kind) {
  switch (kind) {
    case AugmentKind::kNone:
      return "none";
    case AugmentKind::kGaussianNoise:
      return "gaussian_noise";
    case AugmentKind::kDropout:
      return "dropout";
  }
  return "none";
}

AugmentKind parse_augment_kind(const std::string& name) {
  if (name == "none") return AugmentKind::kNone;
  if (name == "gaussian_noise") return AugmentKind::kGaussianNoise;
  if (name == "dropout" || name == "dropout_rate") return AugmentKind::kDropout;
  throw ConfigError("unknown augment kind '" + name + "' (expected none, gaussian_noise, dropout)");
}

}  // namespace modafm::augment
