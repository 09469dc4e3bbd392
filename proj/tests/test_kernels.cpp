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
#include <string>
#include <tuple>
#include <random>
#include <vector>

#include "doctest.h"
#include "modafm/kernels.hpp"

namespace k = modafm::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Agreement up to reassociation: scaled by the magnitude of the summands.
void check_close(const std::vector<double>& a, const std::vector<double>& b, double scale = 1.0) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::abs(a[i] - b[i]) <= 1e-13 * scale * (1.0 + std::abs(a[i])));
  }
}

std::vector<const k::KernelTable*> variants() {
  std::vector<const k::KernelTable*> out;
  if (const auto* t = k::avx2_table()) out.push_back(t);
  return out;
}

}  // namespace

TEST_CASE("scalar reductions match long double loops") {
  std::mt19937_64 rng(1);
  const auto& s = k::scalar_table();
  for (std::size_t n : {1u, 3u, 8u, 17u, 100u}) {
    auto a = random_vec(n, rng);
    auto b = random_vec(n, rng);
    long double d = 0, t = 0;
    double mx = a[0];
    for (std::size_t i = 0; i < n; ++i) {
      d += static_cast<long double>(a[i]) * b[i];
      t += a[i];
      mx = std::max(mx, a[i]);
    }
    CHECK(s.dot(a.data(), b.data(), n) == doctest::Approx(static_cast<double>(d)).epsilon(1e-13));
    CHECK(s.sum(a.data(), n) == doctest::Approx(static_cast<double>(t)).epsilon(1e-13));
    CHECK(s.max(a.data(), n) == mx);
  }
}

TEST_CASE("scalar gemm variants match a triple loop") {
  std::mt19937_64 rng(2);
  const auto& s = k::scalar_table();
  const std::size_t n = 5, kk = 7, m = 3;
  auto a = random_vec(n * kk, rng);
  auto b = random_vec(kk * m, rng);
  std::vector<double> ref(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t p = 0; p < kk; ++p) ref[i * m + j] += a[i * kk + p] * b[p * m + j];
  std::vector<double> c(n * m, 0.0);
  s.gemm_nn(a.data(), b.data(), c.data(), n, kk, m);
  check_close(c, ref, 10.0);

  // B^T stored m x k.
  std::vector<double> bt(m * kk);
  for (std::size_t p = 0; p < kk; ++p)
    for (std::size_t j = 0; j < m; ++j) bt[j * kk + p] = b[p * m + j];
  std::fill(c.begin(), c.end(), 0.0);
  s.gemm_nt(a.data(), bt.data(), c.data(), n, kk, m);
  check_close(c, ref, 10.0);

  // A^T B with A stored n x k: C (k x m) from a (n x k) and b2 (n x m).
  auto b2 = random_vec(n * m, rng);
  std::vector<double> ref2(kk * m, 0.0);
  for (std::size_t p = 0; p < kk; ++p)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = 0; i < n; ++i) ref2[p * m + j] += a[i * kk + p] * b2[i * m + j];
  std::vector<double> c2(kk * m, 0.0);
  s.gemm_tn(a.data(), b2.data(), c2.data(), n, kk, m);
  check_close(c2, ref2, 10.0);
}

TEST_CASE("relu propagates NaN") {
  const double nan = std::nan("");
  const std::vector<double> x{nan, -1.0, 2.0, nan, 0.0, nan, -0.5};
  std::vector<const k::KernelTable*> tables{&k::scalar_table()};
  for (const auto* v : variants()) tables.push_back(v);
  for (const auto* t : tables) {
    CAPTURE(t->name);
    std::vector<double> out(x.size());
    t->relu(x.data(), out.data(), x.size());
    CHECK(std::isnan(out[0]));
    CHECK(std::isnan(out[3]));
    CHECK(std::isnan(out[5]));
    CHECK(out[1] == 0.0);
    CHECK(out[2] == 2.0);
    CHECK(out[4] == 0.0);
  }
}

TEST_CASE("SIMD variants agree with the scalar reference") {
  const auto& s = k::scalar_table();
  std::mt19937_64 rng(3);
  for (const auto* v : variants()) {
    CAPTURE(v->name);
    for (std::size_t n = 0; n <= 37; ++n) {
      CAPTURE(n);
      auto a = random_vec(n, rng);
      auto b = random_vec(n, rng);
      auto y0 = random_vec(n, rng);
      CHECK(v->dot(a.data(), b.data(), n) == doctest::Approx(s.dot(a.data(), b.data(), n)).epsilon(1e-12));
      CHECK(v->sum(a.data(), n) == doctest::Approx(s.sum(a.data(), n)).epsilon(1e-12));
      if (n > 0) CHECK(v->max(a.data(), n) == s.max(a.data(), n));

      std::vector<double> o1(n), o2(n);
      v->add(a.data(), b.data(), o1.data(), n);
      s.add(a.data(), b.data(), o2.data(), n);
      CHECK(o1 == o2);
      v->sub(a.data(), b.data(), o1.data(), n);
      s.sub(a.data(), b.data(), o2.data(), n);
      CHECK(o1 == o2);
      v->mul(a.data(), b.data(), o1.data(), n);
      s.mul(a.data(), b.data(), o2.data(), n);
      CHECK(o1 == o2);
      v->scale(0.37, a.data(), o1.data(), n);
      s.scale(0.37, a.data(), o2.data(), n);
      CHECK(o1 == o2);
      v->relu(a.data(), o1.data(), n);
      s.relu(a.data(), o2.data(), n);
      CHECK(o1 == o2);

      auto y1 = y0, y2 = y0;
      v->axpy(-1.3, a.data(), y1.data(), n);
      s.axpy(-1.3, a.data(), y2.data(), n);
      check_close(y1, y2, 4.0);
      y1 = y0;
      y2 = y0;
      v->mul_acc(a.data(), b.data(), y1.data(), n);
      s.mul_acc(a.data(), b.data(), y2.data(), n);
      check_close(y1, y2, 4.0);
      y1 = y0;
      y2 = y0;
      v->relu_backward(a.data(), b.data(), y1.data(), n);
      s.relu_backward(a.data(), b.data(), y2.data(), n);
      CHECK(y1 == y2);

      auto p1 = random_vec(n, rng), g = random_vec(n, rng);
      auto sg1 = random_vec(n, rng, 0.0, 1.0), sd1 = random_vec(n, rng, 0.0, 1.0);
      auto p2 = p1, sg2 = sg1, sd2 = sd1;
      v->adadelta(p1.data(), g.data(), sg1.data(), sd1.data(), n, 0.5, 0.9, 1e-6);
      s.adadelta(p2.data(), g.data(), sg2.data(), sd2.data(), n, 0.5, 0.9, 1e-6);
      check_close(p1, p2, 4.0);
      check_close(sg1, sg2, 4.0);
      check_close(sd1, sd2, 4.0);
    }
    for (auto [n, kk, m] : {std::tuple<std::size_t, std::size_t, std::size_t>{1, 1, 1}, {4, 9, 5}, {7, 16, 3},
                            {3, 33, 17}}) {
      auto a = random_vec(n * kk, rng);
      auto bnn = random_vec(kk * m, rng);
      auto bnt = random_vec(m * kk, rng);
      auto btn = random_vec(n * m, rng);
      std::vector<double> c1(n * m, 0.5), c2(n * m, 0.5);
      v->gemm_nn(a.data(), bnn.data(), c1.data(), n, kk, m);
      s.gemm_nn(a.data(), bnn.data(), c2.data(), n, kk, m);
      check_close(c1, c2, static_cast<double>(kk));
      std::fill(c1.begin(), c1.end(), 0.5);
      std::fill(c2.begin(), c2.end(), 0.5);
      v->gemm_nt(a.data(), bnt.data(), c1.data(), n, kk, m);
      s.gemm_nt(a.data(), bnt.data(), c2.data(), n, kk, m);
      check_close(c1, c2, static_cast<double>(kk));
      std::vector<double> d1(kk * m, -0.25), d2(kk * m, -0.25);
      v->gemm_tn(a.data(), btn.data(), d1.data(), n, kk, m);
      s.gemm_tn(a.data(), btn.data(), d2.data(), n, kk, m);
      check_close(d1, d2, static_cast<double>(n));
    }
  }
}

TEST_CASE("backend selection") {
  const k::Backend before = k::active_backend();
  REQUIRE(k::select_backend(k::Backend::kScalar));
  CHECK(k::active_backend() == k::Backend::kScalar);
  CHECK(std::string(k::active().name) == "scalar");
  const bool has_avx2 = k::avx2_table() != nullptr;
  CHECK(k::select_backend(k::Backend::kAvx2) == has_avx2);
  CHECK(k::available_backends().size() == (has_avx2 ? 2u : 1u));
  k::select_backend(before);
}
