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

#ifndef MODAFM_DATA_HPP
#define MODAFM_DATA_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "modafm/tensor.hpp"

namespace modafm::data {

enum class Split { kTrain, kTest };

/// Samples of one domain. Target datasets carry no public labels; when the
/// ground truth is known (synthetic data, labeled CSV) it is kept in a sealed
/// oracle field reachable only through oracle_labels().
class DomainDataset {
 public:
  DomainDataset(std::string domain_id, Tensor features, std::optional<std::vector<int>> labels,
                std::size_t num_classes, Split split = Split::kTrain);

  static DomainDataset unlabeled(std::string domain_id, Tensor features, std::size_t num_classes,
                                 Split split = Split::kTrain,
                                 std::optional<std::vector<int>> oracle_labels = std::nullopt);

  const std::string& domain_id() const { return domain_id_; }
  const Tensor& features() const { return features_; }
  std::size_t size() const { return features_.shape()[0]; }
  std::size_t dim() const { return features_.shape()[1]; }
  std::size_t num_classes() const { return num_classes_; }
  Split split() const { return split_; }

  bool has_labels() const { return labels_.has_value(); }
  const std::vector<int>& labels() const;

  // Ground truth withheld from training; for evaluation, the oracle baseline
  // and lambda estimation only.
  bool has_oracle_labels() const { return oracle_labels_.has_value() || labels_.has_value(); }
  const std::vector<int>& oracle_labels() const;

  // Labeled copy built from the oracle field.
  DomainDataset reveal_oracle_labels() const;

  DomainDataset subset(const std::vector<std::size_t>& rows) const;

 private:
  std::string domain_id_;
  Tensor features_;
  std::optional<std::vector<int>> labels_;
  std::optional<std::vector<int>> oracle_labels_;
  std::size_t num_classes_;
  Split split_;
};

/// Gaussian-mixture family with independent covariate-shift (rotation about
/// the origin) and target-shift (label prior) knobs per domain. Domain index
/// M is the target.
struct ShiftSpec {
  std::size_t num_sources = 3;
  std::size_t num_classes = 2;
  std::size_t dim = 2;
  std::size_t train_samples = 2000;  // per domain
  std::size_t test_samples = 1000;   // per domain
  // Default class means: equally spaced on a circle of this radius in the
  // first two coordinates.
  double class_radius = 2.0;
  double class_sigma = 0.5;
  std::vector<std::vector<double>> class_means;        // optional, C x D
  std::vector<std::vector<double>> class_covariances;  // optional, C x (D*D) row-major
  std::vector<double> rotations_deg;                   // M + 1 entries, empty = no rotation
  std::vector<std::vector<double>> label_priors;       // M + 1 rows, empty = uniform

  void validate() const;
  std::vector<double> prior(std::size_t domain) const;
  double rotation(std::size_t domain) const;
  std::vector<std::vector<double>> means() const;
  bool operator==(const ShiftSpec&) const = default;
};

struct DomainSet {
  std::vector<DomainDataset> sources;       // labeled, train split
  std::vector<DomainDataset> source_tests;  // labeled, test split
  DomainDataset target;                     // unlabeled, oracle labels sealed
  DomainDataset target_test;                // evaluation pool (oracle labels)
};

// Pure function of (spec, seed). With transductive set, target_test is the
// training pool itself.
DomainSet generate_domains(const ShiftSpec& spec, std::uint64_t seed, bool transductive = false);

// Draws one domain of the family.
DomainDataset sample_domain(const ShiftSpec& spec, std::size_t domain, std::size_t n, std::uint64_t seed,
                            Split split);

// CSV contract: header row, feature columns f0..f{D-1}, optional integer
// column "label", optional column "domain". Row numbers in errors count data
// rows from 1. num_classes = 0 infers max(label) + 1.
DomainDataset load_csv(const std::string& path, bool has_labels, std::size_t num_classes = 0);
std::vector<DomainDataset> load_csv_domains(const std::string& path, bool has_labels,
                                            std::size_t num_classes = 0);

enum class LabelColumn { kNone, kLabels, kOracle };
void write_csv(const std::string& path, const DomainDataset& dataset, LabelColumn labels,
               bool domain_column = false);

/// Per-domain mini-batches S_1..S_M and T, m rows each.
struct BatchBundle {
  std::vector<Tensor> source_x;
  std::vector<std::vector<std::size_t>> source_y;
  Tensor target_x;
  std::optional<Tensor> target_augmented;
  std::vector<std::vector<std::size_t>> source_indices;
  std::vector<std::size_t> target_indices;

  std::size_t batch_size() const { return target_indices.size(); }
  std::size_t num_sources() const { return source_x.size(); }
};

/// Uniform sampling without replacement within an epoch, reshuffled per
/// epoch. Each dataset cycles independently with floor(n / m) batches per
/// epoch; the batch for (seed, iteration) does not depend on call history.
class BatchSampler {
 public:
  BatchSampler(std::vector<const DomainDataset*> sources, const DomainDataset* target, std::size_t m,
               std::uint64_t seed);

  BatchBundle sample(std::uint64_t iteration);
  std::vector<std::size_t> indices(std::size_t dataset, std::uint64_t iteration);

  // Iterations that cover the largest dataset once.
  std::size_t iterations_per_epoch() const;
  std::size_t batch_size() const { return m_; }

 private:
  struct Cache {
    std::uint64_t epoch = ~std::uint64_t{0};
    std::vector<std::size_t> permutation;
  };
  const DomainDataset& dataset(std::size_t k) const;

  std::vector<const DomainDataset*> sources_;
  const DomainDataset* target_;
  std::size_t m_;
  std::uint64_t seed_;
  std::vector<Cache> cache_;
};

BatchBundle sample_batches(const std::vector<DomainDataset>& sources, const DomainDataset& target,
                           std::size_t m, std::uint64_t seed, std::uint64_t iteration);

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows);

}  // namespace modafm::data

#endif  // MODAFM_DATA_HPP
