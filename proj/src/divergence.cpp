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

#include "modafm/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "modafm/moda.hpp"

namespace modafm::divergence {

namespace {

void check_budget(std::size_t n, double delta) {
  if (n == 0) throw std::invalid_argument("bound: sample count n must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("bound: delta must lie in (0, 1)");
}

void check_simplex(const std::vector<double>& p, const char* what) {
  if (p.empty()) throw std::invalid_argument(std::string(what) + ": empty distribution");
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw std::invalid_argument(std::string(what) + ": negative or non-finite entry");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument(std::string(what) + ": entries do not sum to 1");
}

}  // namespace

double compute_B(const std::vector<double>& alpha, std::size_t num_sources, double vc_dim, std::size_t n,
                 double delta) {
  check_budget(n, delta);
  check_simplex(alpha, "compute_B");
  if (alpha.size() != num_sources) throw std::invalid_argument("compute_B: alpha length differs from M");
  if (!(vc_dim >= 0.0)) throw std::invalid_argument("compute_B: dimension must be non-negative");
  double sq = 0.0;
  for (double a : alpha) sq += a * a;
  const double nn = static_cast<double>(n);
  const double inner = static_cast<double>(num_sources) *
                       (2.0 * vc_dim * std::log(2.0 * (nn + 1.0)) + std::log(8.0 / delta)) / nn;
  return 2.0 * std::sqrt(inner * sq);
}

double compute_V(double vc_dim, std::size_t n, double delta) {
  check_budget(n, delta);
  if (!(vc_dim >= 0.0)) throw std::invalid_argument("compute_V: dimension must be non-negative");
  const double nn = static_cast<double>(n);
  return 2.0 * std::sqrt((2.0 * vc_dim * std::log(2.0 * nn) + std::log(4.0 / delta)) / nn);
}

nn::Mlp train_probe(const std::vector<ProbeGroup>& groups, std::size_t num_classes, const ProbeConfig& config,
                    std::uint64_t seed) {
  if (groups.empty()) throw std::invalid_argument("probe: no training groups");
  if (config.batch_size == 0) throw std::invalid_argument("probe: batch size must be positive");
  const std::size_t dim = groups.front().x.cols();
  for (const auto& g : groups) {
    if (g.x.rank() != 2 || g.x.rows() == 0 || g.x.cols() != dim || g.y.size() != g.x.rows()) {
      throw std::invalid_argument("probe: malformed training group");
    }
  }
  Rng init = make_rng(seed, 0x50524F42);
  std::vector<std::size_t> widths = config.hidden;
  widths.push_back(num_classes);
  nn::Mlp net(dim, widths, init, "probe");
  nn::Optimizer opt(net.parameters(), config.optimizer);

  struct Cursor {
    std::vector<std::size_t> perm;
    std::size_t pos = 0;
    std::uint64_t epoch = 0;
  };
  std::vector<Cursor> cursors(groups.size());
  std::size_t iterations = 0;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const std::size_t n = groups[k].x.rows();
    cursors[k].perm.resize(n);
    cursors[k].pos = n;  // forces a shuffle on first use
    iterations = std::max(iterations, n / std::min(config.batch_size, n));
  }
  auto next_batch = [&](std::size_t k) {
    Cursor& c = cursors[k];
    const std::size_t n = c.perm.size();
    const std::size_t m = std::min(config.batch_size, n);
    if (c.pos + m > n) {
      std::iota(c.perm.begin(), c.perm.end(), std::size_t{0});
      Rng rng = make_rng(seed, k, c.epoch++, 0x53485546);
      std::shuffle(c.perm.begin(), c.perm.end(), rng);
      c.pos = 0;
    }
    std::vector<std::size_t> rows(c.perm.begin() + static_cast<std::ptrdiff_t>(c.pos),
                                  c.perm.begin() + static_cast<std::ptrdiff_t>(c.pos + m));
    c.pos += m;
    return rows;
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t it = 0; it < iterations; ++it) {
      ad::NodePtr loss;
      for (std::size_t k = 0; k < groups.size(); ++k) {
        const auto rows = next_batch(k);
        if (groups[k].weight == 0.0) continue;
        std::vector<std::size_t> y;
        for (std::size_t r : rows) y.push_back(groups[k].y[r]);
        auto logits = nn::mlp_forward(net, ad::constant(data::gather_rows(groups[k].x, rows)));
        auto term = ad::scale(moda::cross_entropy(logits, y), groups[k].weight);
        loss = loss ? ad::add(loss, term) : term;
      }
      if (!loss) throw std::invalid_argument("probe: all group weights are zero");
      if (!std::isfinite(loss->value().item())) throw NumericalError("probe: non-finite training loss");
      opt.zero_grad();
      ad::backward(loss);
      opt.step();
    }
  }
  return net;
}

double zero_one_error(const nn::Mlp& net, const Tensor& x, const std::vector<std::size_t>& y) {
  if (y.empty()) return 0.0;
  const Tensor logits = nn::mlp_infer(net, x);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto row = logits.row(i);
    wrong += static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()) != y[i];
  }
  return static_cast<double>(wrong) / static_cast<double>(y.size());
}

HDivergenceEstimate estimate_h_divergence_detailed(const Tensor& a, const Tensor& b, const ProbeConfig& config,
                                                   std::uint64_t seed) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
    throw std::invalid_argument("h-divergence: sample sets must be n x D with equal D");
  }
  const std::size_t n = std::min(a.rows(), b.rows());
  if (n < 2) throw std::invalid_argument("h-divergence: need at least two samples per set");
  if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0)) {
    throw std::invalid_argument("h-divergence: train fraction must lie in (0, 1)");
  }
  Rng rng = make_rng(seed, 0x48444956);
  auto balance = [&](const Tensor& x) {
    std::vector<std::size_t> rows(x.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    if (x.rows() > n) {
      std::shuffle(rows.begin(), rows.end(), rng);
      rows.resize(n);
      std::sort(rows.begin(), rows.end());
    }
    return data::gather_rows(x, rows);
  };
  const Tensor xa = balance(a);
  const Tensor xb = balance(b);

  // One permutation for both sets keeps the split symmetric.
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  const std::size_t n_train =
      std::clamp<std::size_t>(static_cast<std::size_t>(config.train_fraction * static_cast<double>(n)), 1, n - 1);
  const std::vector<std::size_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  const std::vector<std::size_t> test(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());

  std::vector<ProbeGroup> groups{{data::gather_rows(xa, train), std::vector<std::size_t>(n_train, 0), 1.0},
                                 {data::gather_rows(xb, train), std::vector<std::size_t>(n_train, 1), 1.0}};
  const nn::Mlp probe = train_probe(groups, 2, config, seed);
  const double err_a = zero_one_error(probe, data::gather_rows(xa, test), std::vector<std::size_t>(test.size(), 0));
  const double err_b = zero_one_error(probe, data::gather_rows(xb, test), std::vector<std::size_t>(test.size(), 1));

  HDivergenceEstimate out;
  out.test_error = 0.5 * (err_a + err_b);
  out.value = std::clamp(2.0 * (1.0 - 2.0 * out.test_error), 0.0, 2.0);
  out.train_rows = 2 * n_train;
  out.test_rows = 2 * test.size();
  return out;
}

double estimate_h_divergence(const Tensor& a, const Tensor& b, const ProbeConfig& config, std::uint64_t seed) {
  return estimate_h_divergence_detailed(a, b, config, seed).value;
}

namespace {

std::vector<std::size_t> as_indices(const std::vector<int>& labels) {
  return std::vector<std::size_t>(labels.begin(), labels.end());
}

}  // namespace

LambdaEstimate estimate_lambda(const std::vector<data::DomainDataset>& sources, const data::DomainDataset& target,
                               const std::vector<double>& alpha, const ProbeConfig& config, std::uint64_t seed) {
  if (!target.has_oracle_labels()) {
    throw OracleLabelsRequired("lambda estimate is oracle-only: target '" + target.domain_id() +
                               "' carries no ground-truth labels");
  }
  check_simplex(alpha, "estimate_lambda");
  if (alpha.size() != sources.size()) throw std::invalid_argument("estimate_lambda: alpha length differs from M");
  std::vector<ProbeGroup> groups;
  for (std::size_t j = 0; j < sources.size(); ++j) {
    groups.push_back({sources[j].features(), as_indices(sources[j].labels()), alpha[j]});
  }
  const auto target_y = as_indices(target.oracle_labels());
  groups.push_back({target.features(), target_y, 1.0});
  const nn::Mlp probe = train_probe(groups, target.num_classes(), config, seed);

  LambdaEstimate out;
  for (std::size_t j = 0; j < sources.size(); ++j) {
    out.weighted_source_risk += alpha[j] * zero_one_error(probe, groups[j].x, groups[j].y);
  }
  out.target_risk = zero_one_error(probe, target.features(), target_y);
  out.value = out.weighted_source_risk + out.target_risk;
  return out;
}

double js_distance(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("js_distance: histograms over " + std::to_string(p.size()) + " and " +
                                std::to_string(q.size()) + " classes");
  }
  check_simplex(p, "js_distance");
  check_simplex(q, "js_distance");
  auto term = [](double x, double mid) { return x > 0.0 ? x * std::log(x / mid) : 0.0; };
  double jsd = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double mid = 0.5 * (p[i] + q[i]);
    if (mid > 0.0) jsd += term(p[i], mid) + term(q[i], mid);
  }
  return std::sqrt(std::max(0.0, 0.5 * jsd));
}

std::vector<double> label_histogram(const std::vector<int>& labels, std::size_t num_classes) {
  if (labels.empty()) throw std::invalid_argument("label histogram: no labels");
  std::vector<double> h(num_classes, 0.0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) throw std::invalid_argument("label histogram: bad label");
    h[static_cast<std::size_t>(y)] += 1.0;
  }
  for (double& v : h) v /= static_cast<double>(labels.size());
  return h;
}

std::vector<double> label_distribution(const data::DomainDataset& dataset) {
  if (!dataset.has_labels()) {
    throw std::invalid_argument("label distribution: dataset '" + dataset.domain_id() + "' is unlabeled");
  }
  return label_histogram(dataset.labels(), dataset.num_classes());
}

Tensor sample_mixture(const std::vector<data::DomainDataset>& sources, const std::vector<double>& alpha,
                      std::size_t n, std::uint64_t seed) {
  check_simplex(alpha, "sample_mixture");
  if (alpha.size() != sources.size()) throw std::invalid_argument("sample_mixture: alpha length differs from M");
  Rng rng = make_rng(seed, 0x4D495858);
  std::discrete_distribution<std::size_t> pick(alpha.begin(), alpha.end());
  const std::size_t d = sources.front().dim();
  Tensor out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& src = sources[pick(rng)];
    const std::size_t r = std::uniform_int_distribution<std::size_t>(0, src.size() - 1)(rng);
    std::copy_n(src.features().ptr() + r * d, d, out.ptr() + i * d);
  }
  return out;
}

double BoundReport::assemble_total() const {
  return weighted_source_risk + 0.5 * h_divergence_estimate + lambda_hat.value_or(0.0) + B_alpha + V;
}

BoundReport make_bound_report(std::vector<double> alpha, double vc_dim, std::size_t n, double delta,
                              double h_divergence, std::optional<double> lambda_hat, double weighted_source_risk) {
  BoundReport r;
  r.num_sources = alpha.size();
  r.B_alpha = compute_B(alpha, alpha.size(), vc_dim, n, delta);
  r.V = compute_V(vc_dim, n, delta);
  r.alpha = std::move(alpha);
  r.vc_dim = vc_dim;
  r.n = n;
  r.delta = delta;
  r.h_divergence_estimate = std::clamp(h_divergence, 0.0, 2.0);
  r.lambda_hat = lambda_hat;
  r.weighted_source_risk = weighted_source_risk;
  r.bound_total = r.assemble_total();
  return r;
}

std::string bound_report_json(const BoundReport& r) {
  nlohmann::json j;
  j["alpha"] = r.alpha;
  j["alpha_source"] = r.alpha_source;
  j["M"] = r.num_sources;
  j["vc_dimension"] = {{"value", r.vc_dim}, {"kind", "surrogate"}};
  j["n"] = r.n;
  j["delta"] = r.delta;
  j["B_alpha"] = r.B_alpha;
  j["V"] = r.V;
  j["h_divergence_estimate"] = r.h_divergence_estimate;
  j["lambda_hat"] = r.lambda_hat ? nlohmann::json(*r.lambda_hat) : nlohmann::json(nullptr);
  j["bound_total_includes_lambda"] = r.lambda_hat.has_value();
  j["weighted_source_risk"] = r.weighted_source_risk;
  j["measured_target_error"] =
      r.measured_target_error ? nlohmann::json(*r.measured_target_error) : nlohmann::json(nullptr);
  j["bound_total"] = r.bound_total;
  j["hypothesis"] = r.hypothesis;
  j["source_label_distributions"] = r.source_label_distributions;
  j["target_label_distribution"] =
      r.target_label_distribution ? nlohmann::json(*r.target_label_distribution) : nlohmann::json(nullptr);
  j["js_source_target"] = r.js_source_target;
  j["provenance"] = {{"seed", r.seed},
                     {"probe",
                      {{"hidden", r.probe.hidden},
                       {"epochs", r.probe.epochs},
                       {"batch_size", r.probe.batch_size},
                       {"optimizer", nn::optimizer_kind_name(r.probe.optimizer.kind)},
                       {"learning_rate", r.probe.optimizer.learning_rate},
                       {"train_fraction", r.probe.train_fraction}}}};
  return j.dump(2) + "\n";
}

}  // namespace modafm::divergence
