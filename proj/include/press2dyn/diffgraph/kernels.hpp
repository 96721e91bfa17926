// Copyright 2026 The press2dyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstddef>

// Row-major accumulate-into GEMM variants with a fixed summation order.
// In gemm_nn each output row depends only on its own row of A, so forward
// results do not change with batch composition.
namespace press2dyn::diff::kernels {

inline constexpr std::size_t kColBlock = 512;

// C[M,N] += A[M,K] * B[K,N]
inline void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const double* __restrict A,
                    const double* __restrict B, double* __restrict C) {
  for (std::size_t n0 = 0; n0 < N; n0 += kColBlock) {
    const std::size_t n1 = std::min(N, n0 + kColBlock);
    std::size_t m = 0;
    for (; m + 4 <= M; m += 4) {
      double* c0 = C + (m + 0) * N;
      double* c1 = C + (m + 1) * N;
      double* c2 = C + (m + 2) * N;
      double* c3 = C + (m + 3) * N;
      for (std::size_t k = 0; k < K; ++k) {
        const double a0 = A[(m + 0) * K + k];
        const double a1 = A[(m + 1) * K + k];
        const double a2 = A[(m + 2) * K + k];
        const double a3 = A[(m + 3) * K + k];
        if (a0 == 0.0 && a1 == 0.0 && a2 == 0.0 && a3 == 0.0) continue;
        const double* b = B + k * N;
        for (std::size_t n = n0; n < n1; ++n) {
          const double bv = b[n];
          c0[n] += a0 * bv;
          c1[n] += a1 * bv;
          c2[n] += a2 * bv;
          c3[n] += a3 * bv;
        }
      }
    }
    for (; m < M; ++m) {
      double* c = C + m * N;
      for (std::size_t k = 0; k < K; ++k) {
        const double a = A[m * K + k];
        if (a == 0.0) continue;
        const double* b = B + k * N;
        for (std::size_t n = n0; n < n1; ++n) c[n] += a * b[n];
      }
    }
  }
}

// C[K,N] += A[M,K]^T * B[M,N]
inline void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const double* __restrict A,
                    const double* __restrict B, double* __restrict C) {
  for (std::size_t n0 = 0; n0 < N; n0 += kColBlock) {
    const std::size_t n1 = std::min(N, n0 + kColBlock);
    std::size_t m = 0;
    for (; m + 4 <= M; m += 4) {
      const double* b0 = B + (m + 0) * N;
      const double* b1 = B + (m + 1) * N;
      const double* b2 = B + (m + 2) * N;
      const double* b3 = B + (m + 3) * N;
      for (std::size_t k = 0; k < K; ++k) {
        const double a0 = A[(m + 0) * K + k];
        const double a1 = A[(m + 1) * K + k];
        const double a2 = A[(m + 2) * K + k];
        const double a3 = A[(m + 3) * K + k];
        if (a0 == 0.0 && a1 == 0.0 && a2 == 0.0 && a3 == 0.0) continue;
        double* c = C + k * N;
        for (std::size_t n = n0; n < n1; ++n)
          c[n] += a0 * b0[n] + a1 * b1[n] + a2 * b2[n] + a3 * b3[n];
      }
    }
    for (; m < M; ++m) {
      const double* b = B + m * N;
      for (std::size_t k = 0; k < K; ++k) {
        const double a = A[m * K + k];
        if (a == 0.0) continue;
        double* c = C + k * N;
        for (std::size_t n = n0; n < n1; ++n) c[n] += a * b[n];
      }
    }
  }
}

// C[M,K] += A[M,N] * B[K,N]^T. Dot products accumulate in kLanes fixed
// partial sums combined in index order.
inline constexpr std::size_t kLanes = 8;

inline double dot_lanes(const double* __restrict a, const double* __restrict b, std::size_t n) {
  double acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += a[i + l] * b[i + l];
  for (std::size_t l = 0; i < n; ++i, ++l) acc[l] += a[i] * b[i];
  double s = 0.0;
  for (std::size_t l = 0; l < kLanes; ++l) s += acc[l];
  return s;
}

inline void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const double* __restrict A,
                    const double* __restrict B, double* __restrict C) {
  for (std::size_t m = 0; m < M; ++m) {
    const double* a = A + m * N;
    double* c = C + m * K;
    for (std::size_t k = 0; k < K; ++k) c[k] += dot_lanes(a, B + k * N, N);
  }
}

}  // namespace press2dyn::diff::kernels
