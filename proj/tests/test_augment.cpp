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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "modafm/augment.hpp"
#include "modafm/nn.hpp"

namespace aug = modafm::augment;
using modafm::Tensor;

namespace {

Tensor ramp(std::size_t rows, std::size_t cols) {
  Tensor x({rows, cols});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.01 * static_cast<double>(i) - 3.0;
  return x;
}

}  // namespace

TEST_CASE("zero noise is the identity") {
  aug::AugmentSpec spec;
  spec.kind = aug::AugmentKind::kGaussianNoise;
  spec.sigma_min = spec.sigma_max = 0.0;
  auto rng = modafm::make_rng(1);
  const Tensor x = ramp(20, 3);
  const auto out = aug::augment_batch(x, spec, rng);
  CHECK(out.input == x);
  CHECK_FALSE(out.dropout_rate.has_value());

  spec.kind = aug::AugmentKind::kNone;
  CHECK(aug::augment_batch(x, spec, rng).input == x);
}

TEST_CASE("noise variance matches the drawn sigma") {
  aug::AugmentSpec spec;
  spec.kind = aug::AugmentKind::kGaussianNoise;
  spec.sigma_min = spec.sigma_max = 0.3;
  auto rng = modafm::make_rng(7);
  const Tensor x({1000, 100}, 2.0);
  const auto out = aug::augment_batch(x, spec, rng);
  CHECK(out.sigma == 0.3);
  double mean = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mean += out.input[i] - x[i];
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) var += std::pow(out.input[i] - x[i] - mean, 2);
  var /= static_cast<double>(x.size() - 1);
  CHECK(std::abs(var - 0.09) / 0.09 < 0.03);
  CHECK(std::abs(mean) < 3.0 * 0.3 / std::sqrt(1e5));
}

TEST_CASE("sigma and dropout rate are drawn inside their ranges") {
  auto rng = modafm::make_rng(3);
  aug::AugmentSpec noise;
  noise.kind = aug::AugmentKind::kGaussianNoise;
  noise.sigma_min = 0.1;
  noise.sigma_max = 0.4;
  aug::AugmentSpec drop;
  drop.p_min = 0.25;
  drop.p_max = 0.5;
  const Tensor x = ramp(4, 2);
  bool spread = false;
  double first = -1.0;
  for (int i = 0; i < 200; ++i) {
    const auto a = aug::augment_batch(x, noise, rng);
    CHECK(a.sigma >= 0.1);
    CHECK(a.sigma <= 0.4);
    const auto d = aug::augment_batch(x, drop, rng);
    REQUIRE(d.dropout_rate.has_value());
    CHECK(*d.dropout_rate >= 0.25);
    CHECK(*d.dropout_rate <= 0.5);
    CHECK(d.input == x);
    if (first < 0) first = *d.dropout_rate;
    spread = spread || *d.dropout_rate != first;
  }
  CHECK(spread);
}

TEST_CASE("dropout keeps each unit with probability 1 - p") {
  auto rng = modafm::make_rng(5);
  const Tensor mask = modafm::nn::sample_dropout_mask({1000, 100}, 0.5, rng);
  const double kept = std::accumulate(mask.data().begin(), mask.data().end(), 0.0);
  const double n = 1e5;
  CHECK(std::abs(kept / n - 0.5) < 3.0 * std::sqrt(0.25 / n));
  CHECK(std::all_of(mask.data().begin(), mask.data().end(), [](double v) { return v == 0.0 || v == 1.0; }));
}

TEST_CASE("augmentation is deterministic in the rng state") {
  aug::AugmentSpec spec;
  spec.kind = aug::AugmentKind::kGaussianNoise;
  const Tensor x = ramp(10, 4);
  auto r1 = modafm::make_rng(9, 2);
  auto r2 = modafm::make_rng(9, 2);
  CHECK(aug::augment_batch(x, spec, r1).input == aug::augment_batch(x, spec, r2).input);
  CHECK(aug::augment_batch(x, spec, r1).input != aug::augment_batch(x, spec, r1).input);
}

TEST_CASE("spec validation and names") {
  aug::AugmentSpec spec;
  CHECK_NOTHROW(spec.validate());
  spec.p_min = 0.9;
  CHECK_THROWS_AS(spec.validate(), modafm::ConfigError);
  spec = {};
  spec.p_max = 1.0;
  CHECK_THROWS_AS(spec.validate(), modafm::ConfigError);
  spec = {};
  spec.sigma_min = -0.1;
  CHECK_THROWS_AS(spec.validate(), modafm::ConfigError);
  spec = {};
  spec.sigma_min = 0.6;
  CHECK_THROWS_AS(spec.validate(), modafm::ConfigError);

  for (auto k : {aug::AugmentKind::kNone, aug::AugmentKind::kGaussianNoise, aug::AugmentKind::kDropout}) {
    CHECK(aug::parse_augment_kind(aug::augment_kind_name(k)) == k);
  }
  CHECK(aug::parse_augment_kind("dropout_rate") == aug::AugmentKind::kDropout);
  CHECK_THROWS_AS(aug::parse_augment_kind("mixup"), modafm::ConfigError);
}
