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

#include "modafm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "modafm/common.hpp"

namespace modafm::data {

DomainDataset::DomainDataset(std::string domain_id, Tensor features, std::optional<std::vector<int>> labels,
                             std::size_t num_classes, Split split)
    : domain_id_(std::move(domain_id)),
      features_(std::move(features)),
      labels_(std::move(labels)),
      num_classes_(num_classes),
      split_(split) {
  if (features_.rank() != 2) throw std::invalid_argument("dataset '" + domain_id_ + "': features must be n x D");
  if (!features_.all_finite()) throw std::invalid_argument("dataset '" + domain_id_ + "': non-finite feature");
  if (labels_) {
    if (labels_->size() != size()) throw std::invalid_argument("dataset '" + domain_id_ + "': label count mismatch");
    for (int y : *labels_) {
      if (y < 0 || static_cast<std::size_t>(y) >= num_classes_) {
        throw std::invalid_argument("dataset '" + domain_id_ + "': label " + std::to_string(y) +
                                    " outside [0, " + std::to_string(num_classes_) + ")");
      }
    }
  }
}

DomainDataset DomainDataset::unlabeled(std::string domain_id, Tensor features, std::size_t num_classes, Split split,
                                       std::optional<std::vector<int>> oracle_labels) {
  DomainDataset ds(std::move(domain_id), std::move(features), std::nullopt, num_classes, split);
  if (oracle_labels) {
    // Validate through a throwaway labeled view.
    DomainDataset check(ds.domain_id_, Tensor({ds.size(), 1}), oracle_labels, num_classes, split);
    ds.oracle_labels_ = std::move(oracle_labels);
  }
  return ds;
}

const std::vector<int>& DomainDataset::labels() const {
  if (!labels_) throw std::logic_error("dataset '" + domain_id_ + "' is unlabeled");
  return *labels_;
}

const std::vector<int>& DomainDataset::oracle_labels() const {
  if (labels_) return *labels_;
  if (!oracle_labels_) {
    throw std::logic_error("dataset '" + domain_id_ + "' has no oracle labels (oracle-only quantity requested)");
  }
  return *oracle_labels_;
}

DomainDataset DomainDataset::reveal_oracle_labels() const {
  return DomainDataset(domain_id_, features_, oracle_labels(), num_classes_, split_);
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
  const std::size_t d = x.cols();
  Tensor out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(x.ptr() + rows[i] * d, d, out.ptr() + i * d);
  }
  return out;
}

DomainDataset DomainDataset::subset(const std::vector<std::size_t>& rows) const {
  auto pick = [&rows](const std::vector<int>& v) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(v.at(r));
    return out;
  };
  for (std::size_t r : rows) {
    if (r >= size()) throw std::out_of_range("dataset '" + domain_id_ + "': subset row out of range");
  }
  DomainDataset out(domain_id_, gather_rows(features_, rows),
                    labels_ ? std::optional<std::vector<int>>(pick(*labels_)) : std::nullopt, num_classes_, split_);
  if (oracle_labels_) out.oracle_labels_ = pick(*oracle_labels_);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic family

namespace {

// Lower Cholesky factor of a row-major D x D matrix; nullopt if not PD.
std::optional<std::vector<double>> cholesky(const std::vector<double>& a, std::size_t d) {
  std::vector<double> l(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * d + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * d + k] * l[j * d + k];
      if (i == j) {
        if (!(s > 0.0)) return std::nullopt;
        l[i * d + i] = std::sqrt(s);
      } else {
        l[i * d + j] = s / l[j * d + j];
      }
    }
  }
  return l;
}

}  // namespace

void ShiftSpec::validate() const {
  if (num_sources < 1) throw ConfigError("shift spec: need at least one source domain");
  if (num_classes < 2) throw ConfigError("shift spec: need at least two classes");
  if (dim < 1) throw ConfigError("shift spec: dimension must be positive");
  if (train_samples < 1 || test_samples < 1) throw ConfigError("shift spec: sample counts must be positive");
  const std::size_t domains = num_sources + 1;
  if (!rotations_deg.empty()) {
    if (rotations_deg.size() != domains) {
      throw ConfigError("shift spec: expected " + std::to_string(domains) + " rotation angles");
    }
    if (dim < 2 && std::any_of(rotations_deg.begin(), rotations_deg.end(), [](double r) { return r != 0.0; })) {
      throw ConfigError("shift spec: rotation needs at least two dimensions");
    }
  }
  if (!label_priors.empty()) {
    if (label_priors.size() != domains) {
      throw ConfigError("shift spec: expected " + std::to_string(domains) + " label priors");
    }
    for (const auto& p : label_priors) {
      if (p.size() != num_classes) throw ConfigError("shift spec: label prior has wrong class count");
      double s = 0.0;
      for (double v : p) {
        if (!(v >= 0.0)) throw ConfigError("shift spec: negative label prior");
        s += v;
      }
      if (std::abs(s - 1.0) > 1e-12) throw ConfigError("shift spec: label prior does not sum to 1");
    }
  }
  if (class_means.empty()) {
    if (dim < 2) throw ConfigError("shift spec: default class means need at least two dimensions");
  } else {
    if (class_means.size() != num_classes) throw ConfigError("shift spec: need one mean per class");
    for (const auto& m : class_means) {
      if (m.size() != dim) throw ConfigError("shift spec: class mean has wrong dimension");
    }
  }
  if (class_covariances.empty()) {
    if (!(class_sigma > 0.0)) throw ConfigError("shift spec: degenerate covariance (sigma must be positive)");
  } else {
    if (class_covariances.size() != num_classes) throw ConfigError("shift spec: need one covariance per class");
    for (const auto& c : class_covariances) {
      if (c.size() != dim * dim) throw ConfigError("shift spec: covariance has wrong size");
      for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
          if (c[i * dim + j] != c[j * dim + i]) throw ConfigError("shift spec: covariance is not symmetric");
        }
      }
      if (!cholesky(c, dim)) throw ConfigError("shift spec: degenerate covariance (not positive definite)");
    }
  }
}

std::vector<double> ShiftSpec::prior(std::size_t domain) const {
  if (label_priors.empty()) return std::vector<double>(num_classes, 1.0 / static_cast<double>(num_classes));
  return label_priors.at(domain);
}

double ShiftSpec::rotation(std::size_t domain) const {
  return rotations_deg.empty() ? 0.0 : rotations_deg.at(domain);
}

std::vector<std::vector<double>> ShiftSpec::means() const {
  if (!class_means.empty()) return class_means;
  std::vector<std::vector<double>> out(num_classes, std::vector<double>(dim, 0.0));
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(num_classes);
    out[c][0] = class_radius * std::cos(angle);
    out[c][1] = class_radius * std::sin(angle);
  }
  return out;
}

DomainDataset sample_domain(const ShiftSpec& spec, std::size_t domain, std::size_t n, std::uint64_t seed,
                            Split split) {
  const std::size_t d = spec.dim;
  const auto means = spec.means();
  std::vector<std::vector<double>> factors(spec.num_classes);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    if (spec.class_covariances.empty()) {
      factors[c].assign(d * d, 0.0);
      for (std::size_t i = 0; i < d; ++i) factors[c][i * d + i] = spec.class_sigma;
    } else {
      factors[c] = *cholesky(spec.class_covariances[c], d);
    }
  }
  const auto prior = spec.prior(domain);
  std::vector<double> cumulative(prior.size());
  std::partial_sum(prior.begin(), prior.end(), cumulative.begin());

  const double theta = spec.rotation(domain) * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);

  Rng rng = make_rng(seed, domain, split == Split::kTrain ? 0 : 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Tensor x({n, d});
  std::vector<int> y(n);
  std::vector<double> z(d);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = unif(rng);
    std::size_t c = 0;
    while (c + 1 < cumulative.size() && u >= cumulative[c]) ++c;
    y[i] = static_cast<int>(c);
    for (double& v : z) v = normal(rng);
    double* row = x.ptr() + i * d;
    for (std::size_t r = 0; r < d; ++r) {
      double v = means[c][r];
      for (std::size_t k = 0; k <= r; ++k) v += factors[c][r * d + k] * z[k];
      row[r] = v;
    }
    if (d >= 2) {
      const double a = row[0];
      const double b = row[1];
      row[0] = cs * a - sn * b;
      row[1] = sn * a + cs * b;
    }
  }
  const bool is_target = domain == spec.num_sources;
  const std::string id =
      (is_target ? std::string("target") : "source_" + std::to_string(domain)) + (split == Split::kTrain ? "" : "_test");
  if (is_target) return DomainDataset::unlabeled(id, std::move(x), spec.num_classes, split, std::move(y));
  return DomainDataset(id, std::move(x), std::move(y), spec.num_classes, split);
}

DomainSet generate_domains(const ShiftSpec& spec, std::uint64_t seed, bool transductive) {
  spec.validate();
  std::vector<DomainDataset> sources;
  std::vector<DomainDataset> tests;
  for (std::size_t j = 0; j < spec.num_sources; ++j) {
    sources.push_back(sample_domain(spec, j, spec.train_samples, seed, Split::kTrain));
    tests.push_back(sample_domain(spec, j, spec.test_samples, seed, Split::kTest));
  }
  DomainDataset target = sample_domain(spec, spec.num_sources, spec.train_samples, seed, Split::kTrain);
  DomainDataset target_test =
      transductive ? target : sample_domain(spec, spec.num_sources, spec.test_samples, seed, Split::kTest);
  return DomainSet{std::move(sources), std::move(tests), std::move(target), std::move(target_test)};
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

struct ParsedCsv {
  Tensor features;
  std::optional<std::vector<int>> labels;
  std::vector<std::string> domains;
};

ParsedCsv parse_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv '" + path + "': cannot open");
  std::string line;
  if (!std::getline(in, line) || line.find_first_not_of(" \t\r") == std::string::npos) {
    throw std::runtime_error("csv '" + path + "': empty file");
  }
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_fields(line);
  std::vector<std::ptrdiff_t> feature_col;
  std::ptrdiff_t label_col = -1;
  std::ptrdiff_t domain_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& h = header[i];
    if (h == "label") {
      label_col = static_cast<std::ptrdiff_t>(i);
    } else if (h == "domain") {
      domain_col = static_cast<std::ptrdiff_t>(i);
    } else if (h.size() >= 2 && h[0] == 'f') {
      std::size_t idx = 0;
      if (!parse_number(h.substr(1), idx)) throw std::runtime_error("csv '" + path + "': bad column '" + h + "'");
      if (feature_col.size() <= idx) feature_col.resize(idx + 1, -1);
      feature_col[idx] = static_cast<std::ptrdiff_t>(i);
    } else {
      throw std::runtime_error("csv '" + path + "': unexpected column '" + h + "'");
    }
  }
  if (feature_col.empty()) throw std::runtime_error("csv '" + path + "': no feature columns");
  for (std::size_t k = 0; k < feature_col.size(); ++k) {
    if (feature_col[k] < 0) throw std::runtime_error("csv '" + path + "': missing column f" + std::to_string(k));
  }
  const std::size_t d = feature_col.size();
  std::vector<double> values;
  std::vector<int> labels;
  std::vector<std::string> domains;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error("csv '" + path + "': row " + std::to_string(row) + " has " +
                               std::to_string(fields.size()) + " fields, header has " +
                               std::to_string(header.size()));
    }
    for (std::size_t k = 0; k < d; ++k) {
      double v = 0.0;
      if (!parse_number(fields[feature_col[k]], v) || !std::isfinite(v)) {
        throw std::runtime_error("csv '" + path + "': row " + std::to_string(row) + ": non-numeric value '" +
                                 fields[feature_col[k]] + "' in f" + std::to_string(k));
      }
      values.push_back(v);
    }
    if (label_col >= 0) {
      int y = 0;
      if (!parse_number(fields[label_col], y)) {
        throw std::runtime_error("csv '" + path + "': row " + std::to_string(row) + ": non-integer label '" +
                                 fields[label_col] + "'");
      }
      if (y < 0) throw std::runtime_error("csv '" + path + "': row " + std::to_string(row) + ": negative label");
      labels.push_back(y);
    }
    if (domain_col >= 0) domains.push_back(fields[domain_col]);
  }
  if (row == 0) throw std::runtime_error("csv '" + path + "': empty file (no data rows)");
  ParsedCsv out{Tensor({row, d}, std::move(values)), std::nullopt, std::move(domains)};
  if (label_col >= 0) out.labels = std::move(labels);
  return out;
}

std::size_t resolve_classes(const std::string& path, const std::optional<std::vector<int>>& labels,
                            std::size_t num_classes) {
  if (!labels) return num_classes;
  const int max_label = *std::max_element(labels->begin(), labels->end());
  if (num_classes == 0) return static_cast<std::size_t>(max_label) + 1;
  if (static_cast<std::size_t>(max_label) >= num_classes) {
    throw std::runtime_error("csv '" + path + "': label " + std::to_string(max_label) + " out of range for " +
                             std::to_string(num_classes) + " classes");
  }
  return num_classes;
}

DomainDataset make_dataset(const std::string& id, Tensor x, std::optional<std::vector<int>> labels,
                           bool has_labels, std::size_t classes, const std::string& path) {
  if (has_labels) {
    if (!labels) throw std::runtime_error("csv '" + path + "': labels requested but no 'label' column");
    return DomainDataset(id, std::move(x), std::move(labels), classes);
  }
  return DomainDataset::unlabeled(id, std::move(x), classes, Split::kTrain, std::move(labels));
}

std::string stem(const std::string& path) {
  auto slash = path.find_last_of('/');
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  auto dot = base.find_last_of('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}

void append_double(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

DomainDataset load_csv(const std::string& path, bool has_labels, std::size_t num_classes) {
  ParsedCsv parsed = parse_csv(path);
  std::string id = stem(path);
  if (!parsed.domains.empty()) {
    const auto& first = parsed.domains.front();
    if (std::any_of(parsed.domains.begin(), parsed.domains.end(), [&](const auto& s) { return s != first; })) {
      throw std::runtime_error("csv '" + path + "': multiple domains in file; load with load_csv_domains");
    }
    id = first;
  }
  const std::size_t classes = resolve_classes(path, parsed.labels, num_classes);
  return make_dataset(id, std::move(parsed.features), std::move(parsed.labels), has_labels, classes, path);
}

std::vector<DomainDataset> load_csv_domains(const std::string& path, bool has_labels, std::size_t num_classes) {
  ParsedCsv parsed = parse_csv(path);
  const std::size_t classes = resolve_classes(path, parsed.labels, num_classes);
  if (parsed.domains.empty()) {
    return {make_dataset(stem(path), std::move(parsed.features), std::move(parsed.labels), has_labels, classes, path)};
  }
  std::vector<std::string> order;
  for (const auto& dname : parsed.domains) {
    if (std::find(order.begin(), order.end(), dname) == order.end()) order.push_back(dname);
  }
  std::vector<DomainDataset> out;
  for (const auto& dname : order) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < parsed.domains.size(); ++i) {
      if (parsed.domains[i] == dname) rows.push_back(i);
    }
    std::optional<std::vector<int>> labels;
    if (parsed.labels) {
      labels.emplace();
      for (std::size_t r : rows) labels->push_back((*parsed.labels)[r]);
    }
    out.push_back(make_dataset(dname, gather_rows(parsed.features, rows), std::move(labels), has_labels, classes, path));
  }
  return out;
}

void write_csv(const std::string& path, const DomainDataset& dataset, LabelColumn labels, bool domain_column) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("csv '" + path + "': cannot open for writing");
  const std::vector<int>* y = nullptr;
  if (labels == LabelColumn::kLabels) y = &dataset.labels();
  if (labels == LabelColumn::kOracle) y = &dataset.oracle_labels();
  std::string text;
  for (std::size_t k = 0; k < dataset.dim(); ++k) {
    if (k) text += ',';
    text += "f" + std::to_string(k);
  }
  if (y) text += ",label";
  if (domain_column) text += ",domain";
  text += '\n';
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t k = 0; k < dataset.dim(); ++k) {
      if (k) text += ',';
      append_double(text, dataset.features().at(i, k));
    }
    if (y) text += "," + std::to_string((*y)[i]);
    if (domain_column) text += "," + dataset.domain_id();
    text += '\n';
  }
  out << text;
}

// ---------------------------------------------------------------------------
// Sampling

BatchSampler::BatchSampler(std::vector<const DomainDataset*> sources, const DomainDataset* target, std::size_t m,
                           std::uint64_t seed)
    : sources_(std::move(sources)), target_(target), m_(m), seed_(seed), cache_(sources_.size() + 1) {
  if (m_ == 0) throw std::invalid_argument("sampler: batch size must be positive");
  for (std::size_t k = 0; k <= sources_.size(); ++k) {
    const DomainDataset& ds = dataset(k);
    if (ds.size() < m_) {
      throw std::invalid_argument("sampler: batch size " + std::to_string(m_) + " exceeds dataset '" +
                                  ds.domain_id() + "' of " + std::to_string(ds.size()) + " rows");
    }
    if (k < sources_.size() && !ds.has_labels()) {
      throw std::invalid_argument("sampler: source '" + ds.domain_id() + "' is unlabeled");
    }
  }
}

const DomainDataset& BatchSampler::dataset(std::size_t k) const {
  return k < sources_.size() ? *sources_[k] : *target_;
}

std::size_t BatchSampler::iterations_per_epoch() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k <= sources_.size(); ++k) n = std::max(n, dataset(k).size());
  return n / m_;
}

std::vector<std::size_t> BatchSampler::indices(std::size_t k, std::uint64_t iteration) {
  const std::size_t n = dataset(k).size();
  const std::uint64_t per_epoch = n / m_;
  const std::uint64_t epoch = iteration / per_epoch;
  const std::uint64_t offset = iteration % per_epoch;
  Cache& c = cache_[k];
  if (c.epoch != epoch) {
    c.permutation.resize(n);
    std::iota(c.permutation.begin(), c.permutation.end(), std::size_t{0});
    Rng rng = make_rng(seed_, k, epoch, 0x5A4D504C);
    std::shuffle(c.permutation.begin(), c.permutation.end(), rng);
    c.epoch = epoch;
  }
  return std::vector<std::size_t>(c.permutation.begin() + static_cast<std::ptrdiff_t>(offset * m_),
                                  c.permutation.begin() + static_cast<std::ptrdiff_t>((offset + 1) * m_));
}

BatchBundle BatchSampler::sample(std::uint64_t iteration) {
  BatchBundle b;
  for (std::size_t j = 0; j < sources_.size(); ++j) {
    auto idx = indices(j, iteration);
    b.source_x.push_back(gather_rows(sources_[j]->features(), idx));
    std::vector<std::size_t> y;
    y.reserve(idx.size());
    for (std::size_t r : idx) y.push_back(static_cast<std::size_t>(sources_[j]->labels()[r]));
    b.source_y.push_back(std::move(y));
    b.source_indices.push_back(std::move(idx));
  }
  b.target_indices = indices(sources_.size(), iteration);
  b.target_x = gather_rows(target_->features(), b.target_indices);
  return b;
}

BatchBundle sample_batches(const std::vector<DomainDataset>& sources, const DomainDataset& target, std::size_t m,
                           std::uint64_t seed, std::uint64_t iteration) {
  std::vector<const DomainDataset*> ptrs;
  for (const auto& s : sources) ptrs.push_back(&s);
  BatchSampler sampler(std::move(ptrs), &target, m, seed);
  return sampler.sample(iteration);
}

}  // namespace modafm::data
