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

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "modafm/divergence.hpp"

namespace dv = modafm::divergence;
namespace data = modafm::data;
using modafm::Tensor;
using hp = boost::multiprecision::cpp_bin_float_50;

namespace {

double B_oracle(const std::vector<double>& alpha, double m, double d, double n, double delta) {
  hp sq = 0;
  for (double a : alpha) sq += hp(a) * hp(a);
  const hp inner = hp(m) * (2 * hp(d) * log(2 * (hp(n) + 1)) + log(8 / hp(delta))) / hp(n);
  return static_cast<double>(2 * sqrt(inner * sq));
}

double V_oracle(double d, double n, double delta) {
  return static_cast<double>(2 * sqrt((2 * hp(d) * log(2 * hp(n)) + log(4 / hp(delta))) / hp(n)));
}

std::vector<double> random_simplex(std::size_t k, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(k);
  double s = 0.0;
  for (double& x : v) s += (x = e(rng));
  for (double& x : v) x /= s;
  return v;
}

Tensor gaussian(std::size_t n, double mean, double sigma, std::mt19937_64& rng, std::size_t dim = 2) {
  std::normal_distribution<double> g(mean, sigma);
  Tensor t({n, dim});
  for (double& x : t.data()) x = g(rng);
  return t;
}

dv::ProbeConfig quick_probe() {
  dv::ProbeConfig p;
  p.hidden = {16};
  p.epochs = 40;
  p.batch_size = 32;
  return p;
}

// Two separable clusters; `flip` swaps which cluster carries label 0.
data::DomainDataset cluster_domain(const std::string& id, bool flip, std::uint64_t seed, std::size_t n = 300) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  Tensor x({n, 2});
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % 2);
    x.at(i, 0) = (c == 0 ? -2.0 : 2.0) + g(rng);
    x.at(i, 1) = g(rng);
    y[i] = flip ? 1 - c : c;
  }
  return data::DomainDataset(id, x, y, 2);
}

}  // namespace

TEST_CASE("complexity terms match a 50-digit oracle") {
  const std::vector<std::size_t> ms{1, 2, 3, 5, 8};
  const std::vector<double> ds{0.0, 1.0, 5.0, 20.0, 100.0};
  const std::vector<std::size_t> ns{1, 300, 100000};
  const std::vector<double> deltas{1e-6, 0.05, 0.5, 0.999};
  std::mt19937_64 rng(1);
  std::size_t points = 0;
  for (std::size_t i = 0; i < 60; ++i) {
    const std::size_t m = ms[i % ms.size()];
    const double d = ds[(i / 5) % ds.size()];
    const std::size_t n = ns[i % ns.size()];
    const double delta = deltas[(i / 3) % deltas.size()];
    const auto alpha = random_simplex(m, rng);
    const double b = dv::compute_B(alpha, m, d, n, delta);
    const double bo = B_oracle(alpha, m, d, n, delta);
    CHECK(std::abs(b - bo) <= 1e-12 * std::max(1.0, bo));
    const double v = dv::compute_V(d, n, delta);
    const double vo = V_oracle(d, n, delta);
    CHECK(std::abs(v - vo) <= 1e-12 * std::max(1.0, vo));
    ++points;
  }
  CHECK(points >= 50);

  const std::vector<double> uniform(3, 1.0 / 3);
  CHECK(std::abs(dv::compute_B(uniform, 3, 5, 300, 0.05) - B_oracle(uniform, 3, 5, 300, 0.05)) < 1e-12);
  CHECK(std::abs(dv::compute_B(uniform, 3, 5, 300, 0.05) - 0.959707) < 1e-6);
  CHECK(std::abs(dv::compute_B({1.0, 0.0, 0.0}, 3, 5, 300, 0.05) - 1.662260) < 1e-6);
  CHECK(std::abs(dv::compute_V(5, 300, 0.05) - 0.954647) < 1e-6);
  // Commonly quoted four-figure values.
  CHECK(std::abs(dv::compute_B(uniform, 3, 5, 300, 0.05) - 0.95974) < 1e-4);
  CHECK(std::abs(dv::compute_B({1.0, 0.0, 0.0}, 3, 5, 300, 0.05) - 1.66232) < 1e-4);
  CHECK(std::abs(dv::compute_V(5, 300, 0.05) - 0.95463) < 1e-4);
}

TEST_CASE("one-hot over uniform complexity ratio is sqrt M") {
  for (std::size_t m = 1; m <= 10; ++m) {
    std::vector<double> one_hot(m, 0.0);
    one_hot[0] = 1.0;
    const std::vector<double> uniform(m, 1.0 / static_cast<double>(m));
    const double ratio = dv::compute_B(one_hot, m, 5, 300, 0.05) / dv::compute_B(uniform, m, 5, 300, 0.05);
    CHECK(std::abs(ratio - std::sqrt(static_cast<double>(m))) <= 4 * std::numeric_limits<double>::epsilon());
  }
}

TEST_CASE("uniform mixture minimizes the complexity term") {
  std::mt19937_64 rng(2);
  const std::vector<double> uniform(4, 0.25);
  const double bu = dv::compute_B(uniform, 4, 5, 500, 0.05);
  for (int i = 0; i < 1000; ++i) CHECK(bu < dv::compute_B(random_simplex(4, rng), 4, 5, 500, 0.05));
}

TEST_CASE("single-domain term is monotone") {
  double prev = dv::compute_V(5, 10, 0.05);
  for (std::size_t n = 20; n <= 100000; n *= 2) {
    const double v = dv::compute_V(5, n, 0.05);
    CHECK(v < prev);
    prev = v;
  }
  prev = dv::compute_V(5, 300, 0.9);
  for (double delta : {0.5, 0.1, 0.05, 0.01, 1e-4, 1e-8}) {
    const double v = dv::compute_V(5, 300, delta);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("complexity term argument checks") {
  CHECK_THROWS(dv::compute_V(5, 0, 0.05));
  CHECK_THROWS(dv::compute_V(5, 10, 0.0));
  CHECK_THROWS(dv::compute_V(5, 10, 1.0));
  CHECK_THROWS(dv::compute_B({0.5, 0.5}, 2, 5, 10, -0.1));
  CHECK_THROWS(dv::compute_B({0.5, 0.6}, 2, 5, 10, 0.05));
  CHECK_THROWS(dv::compute_B({0.5, 0.5}, 3, 5, 10, 0.05));
}

TEST_CASE("Jensen-Shannon distance") {
  CHECK(dv::js_distance({0.3, 0.7}, {0.3, 0.7}) == 0.0);
  CHECK(std::abs(dv::js_distance({1.0, 0.0}, {0.0, 1.0}) - std::sqrt(std::numbers::ln2)) < 1e-12);
  {
    // Direct KL sums at 50 digits.
    const hp m0 = hp(3) / 4, m1 = hp(1) / 4, half = hp(1) / 2;
    const hp jsd = half * (half * log(half / m0) + half * log(half / m1)) + half * log(1 / m0);
    CHECK(std::abs(dv::js_distance({0.5, 0.5}, {1.0, 0.0}) - static_cast<double>(sqrt(jsd))) < 1e-12);
    CHECK(std::abs(dv::js_distance({0.5, 0.5}, {1.0, 0.0}) - 0.46452) < 1e-4);
  }
  CHECK_THROWS(dv::js_distance({0.5, 0.5}, {1.0, 0.0, 0.0}));

  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 2 + static_cast<std::size_t>(i % 6);
    const auto p = random_simplex(k, rng);
    const auto q = random_simplex(k, rng);
    const auto r = random_simplex(k, rng);
    const double pq = dv::js_distance(p, q);
    CHECK(std::abs(pq - dv::js_distance(q, p)) <= 1e-15);
    CHECK(pq >= 0.0);
    CHECK(pq <= std::sqrt(std::numbers::ln2) + 1e-12);
    CHECK(pq > 0.0);
    CHECK(dv::js_distance(p, p) == 0.0);
    CHECK(pq <= dv::js_distance(p, r) + dv::js_distance(r, q) + 1e-12);
  }
}

TEST_CASE("label distribution") {
  const data::DomainDataset d("d", Tensor({4, 1}), std::vector<int>{0, 0, 1, 1}, 2);
  CHECK(dv::label_distribution(d) == std::vector<double>{0.5, 0.5});
  const data::DomainDataset single("s", Tensor({3, 1}), std::vector<int>{2, 2, 2}, 3);
  CHECK(dv::label_distribution(single) == std::vector<double>{0.0, 0.0, 1.0});
  CHECK_THROWS(dv::label_distribution(data::DomainDataset::unlabeled("u", Tensor({2, 1}), 2)));

  data::ShiftSpec spec;
  spec.num_sources = 1;
  spec.rotations_deg = {0, 0};
  spec.label_priors = {{0.7, 0.3}, {0.5, 0.5}};
  spec.train_samples = 10000;
  const auto dom = data::generate_domains(spec, 5);
  const auto h = dv::label_distribution(dom.sources[0]);
  CHECK(std::abs(h[0] - 0.7) < 3.0 * std::sqrt(0.21 / 10000));
}

TEST_CASE("H-divergence proxy") {
  const auto probe = quick_probe();
  std::mt19937_64 rng(4);
  SUBCASE("identical populations") {
    const Tensor a = gaussian(400, 0.0, 1.0, rng);
    const auto est = dv::estimate_h_divergence_detailed(a, a, probe, 1);
    CHECK(est.value < 0.1);
    CHECK(est.train_rows + est.test_rows == 800);
  }
  SUBCASE("separated clusters") {
    const Tensor a = gaussian(400, 0.0, 1.0, rng);
    const Tensor b = gaussian(400, 20.0, 1.0, rng);
    const double ab = dv::estimate_h_divergence(a, b, probe, 1);
    const double ba = dv::estimate_h_divergence(b, a, probe, 1);
    CHECK(ab > 1.9);
    CHECK(std::abs(ab - ba) < 0.1);
  }
  SUBCASE("the same mixture on both sides") {
    auto mix = [&](std::size_t n) {
      Tensor t = gaussian(n, 0.0, 1.0, rng);
      const Tensor far = gaussian(n, 20.0, 1.0, rng);
      for (std::size_t i = 0; i < n; i += 2) {
        t.at(i, 0) = far.at(i, 0);
        t.at(i, 1) = far.at(i, 1);
      }
      return t;
    };
    const Tensor a = mix(3000);
    const Tensor b = mix(3000);
    const double ab = dv::estimate_h_divergence(a, b, probe, 2);
    const double ba = dv::estimate_h_divergence(b, a, probe, 2);
    CHECK(ab < 0.15);
    CHECK(std::abs(ab - ba) < 0.1);
  }
  SUBCASE("unequal sizes are balanced") {
    const Tensor a = gaussian(100, 0.0, 1.0, rng);
    const Tensor b = gaussian(250, 0.0, 1.0, rng);
    const auto est = dv::estimate_h_divergence_detailed(a, b, probe, 3);
    CHECK(est.train_rows + est.test_rows == 200);
    CHECK(est.value >= 0.0);
    CHECK(est.value <= 2.0);
  }
  SUBCASE("deterministic in the seed") {
    const Tensor a = gaussian(100, 0.0, 1.0, rng);
    const Tensor b = gaussian(100, 0.5, 1.0, rng);
    CHECK(dv::estimate_h_divergence(a, b, probe, 9) == dv::estimate_h_divergence(a, b, probe, 9));
  }
  SUBCASE("malformed input") {
    CHECK_THROWS(dv::estimate_h_divergence(Tensor({1, 2}), Tensor({5, 2}), probe, 0));
    CHECK_THROWS(dv::estimate_h_divergence(Tensor({5, 2}), Tensor({5, 3}), probe, 0));
  }
}

TEST_CASE("oracle lambda") {
  const auto probe = quick_probe();
  const auto t = cluster_domain("t", false, 1);
  const auto target = data::DomainDataset::unlabeled("t", t.features(), 2, data::Split::kTrain, t.labels());
  SUBCASE("identical separable domains") {
    const std::vector<data::DomainDataset> src{cluster_domain("a", false, 2), cluster_domain("b", false, 3)};
    const auto l = dv::estimate_lambda(src, target, {0.5, 0.5}, probe, 1);
    CHECK(l.value < 0.05);
  }
  SUBCASE("flipped labels leave no joint fit") {
    const std::vector<data::DomainDataset> src{cluster_domain("a", true, 2)};
    const auto l = dv::estimate_lambda(src, target, {1.0}, probe, 1);
    CHECK(l.value > 0.9);
    CHECK(l.value < 1.1);
  }
  SUBCASE("weighting the matching domain gives the smaller lambda") {
    const std::vector<data::DomainDataset> src{cluster_domain("same", false, 2), cluster_domain("flip", true, 3)};
    const double good = dv::estimate_lambda(src, target, {1.0, 0.0}, probe, 1).value;
    const double bad = dv::estimate_lambda(src, target, {0.0, 1.0}, probe, 1).value;
    CHECK(good <= bad);
  }
  SUBCASE("needs oracle labels") {
    const auto sealed = data::DomainDataset::unlabeled("t", t.features(), 2);
    const std::vector<data::DomainDataset> src{cluster_domain("a", false, 2)};
    try {
      dv::estimate_lambda(src, sealed, {1.0}, probe, 1);
      FAIL("expected OracleLabelsRequired");
    } catch (const dv::OracleLabelsRequired& e) {
      CHECK(std::string(e.what()).find("oracle") != std::string::npos);
    }
  }
}

TEST_CASE("mixture sampling follows alpha") {
  const std::vector<data::DomainDataset> src{
      data::DomainDataset("a", Tensor({5, 1}, 0.0), std::vector<int>(5, 0), 2),
      data::DomainDataset("b", Tensor({5, 1}, 1.0), std::vector<int>(5, 0), 2)};
  const Tensor x = dv::sample_mixture(src, {0.2, 0.8}, 20000, 3);
  double ones = 0.0;
  for (double v : x.data()) ones += v;
  CHECK(std::abs(ones / 20000 - 0.8) < 3.0 * std::sqrt(0.16 / 20000));
  CHECK(dv::sample_mixture(src, {0.2, 0.8}, 50, 3) == dv::sample_mixture(src, {0.2, 0.8}, 50, 3));
}

TEST_CASE("bound report assembly") {
  const auto r = dv::make_bound_report({0.2, 0.3, 0.5}, 5, 300, 0.05, 0.4, 0.12, 0.07);
  CHECK(r.B_alpha >= 0.0);
  CHECK(r.V >= 0.0);
  CHECK(std::abs(r.bound_total - (0.07 + 0.5 * 0.4 + 0.12 + r.B_alpha + r.V)) < 1e-12);
  CHECK(r.bound_total == r.assemble_total());

  const auto no_lambda = dv::make_bound_report({0.5, 0.5}, 5, 300, 0.05, 2.7, std::nullopt, 0.1);
  CHECK(no_lambda.h_divergence_estimate == 2.0);
  CHECK(std::abs(no_lambda.bound_total - (0.1 + 1.0 + no_lambda.B_alpha + no_lambda.V)) < 1e-12);
  const std::string json = dv::bound_report_json(no_lambda);
  CHECK(json.find("\"lambda_hat\": null") != std::string::npos);
  CHECK(json.find("\"bound_total_includes_lambda\": false") != std::string::npos);
  CHECK(json.find("surrogate") != std::string::npos);
  CHECK(json == dv::bound_report_json(no_lambda));
}
