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

#ifndef MODAFM_KERNELS_HPP
#define MODAFM_KERNELS_HPP

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace modafm::kernels {

// Dense double-precision inner loops used by the autodiff engine and the
// optimizers. Every entry has a scalar reference version; SIMD variants must
// agree with it up to floating-point reassociation.
//
// Matrix arguments are row-major. All gemm variants accumulate into C
// (C += op(A) * op(B)); callers zero C first when they want an assignment.
struct KernelTable {
  const char* name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  double (*max)(const double* x, std::size_t n);

  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out = alpha * x
  void (*scale)(double alpha, const double* x, double* out, std::size_t n);
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // out += a * b
  void (*mul_acc)(const double* a, const double* b, double* out, std::size_t n);
  void (*relu)(const double* x, double* out, std::size_t n);
  // out += (x > 0) ? g : 0
  void (*relu_backward)(const double* x, const double* g, double* out, std::size_t n);

  // A: n x k, B: k x m, C: n x m
  void (*gemm_nn)(const double* a, const double* b, double* c,
                  std::size_t n, std::size_t k, std::size_t m);
  // A: n x k, B: m x k, C: n x m  (C += A * B^T)
  void (*gemm_nt)(const double* a, const double* b, double* c,
                  std::size_t n, std::size_t k, std::size_t m);
  // A: n x k, B: n x m, C: k x m  (C += A^T * B)
  void (*gemm_tn)(const double* a, const double* b, double* c,
                  std::size_t n, std::size_t k, std::size_t m);

  // One AdaDelta recurrence over a parameter block, in place.
  void (*adadelta)(double* param, const double* grad, double* sq_grad_avg,
                   double* sq_delta_avg, std::size_t n, double lr, double rho,
                   double eps);
};

enum class Backend { kScalar, kAvx2 };

const KernelTable& scalar_table();

// nullptr when the variant was not compiled in or the CPU lacks the features.
const KernelTable* avx2_table();

// The table used by the engine. Chosen once at startup: the best supported
// backend unless MODAFM_KERNELS=scalar is set in the environment.
const KernelTable& active();

// Overrides the runtime choice. Returns false when the backend is unavailable.
bool select_backend(Backend backend);

Backend active_backend();
std::vector<Backend> available_backends();
std::string_view backend_name(Backend backend);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace modafm::kernels

#endif  // MODAFM_KERNELS_HPP
