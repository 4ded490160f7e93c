/*
 * Copyright 2026 The RLSD Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Dense inner loops shared by the tensor ops. Written so the compiler can
// vectorize them; accumulation order is fixed, so results are reproducible.
// Matrix products go through Eigen.

#ifndef RLSD_SRC_KERNELS_HPP_
#define RLSD_SRC_KERNELS_HPP_

#include <algorithm>
#include <cstddef>

#include <Eigen/Core>

namespace rlsd::kernels {

inline double dot(const double* a, const double* b, std::size_t n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  }
  double s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) +
             ((acc[2] + acc[6]) + (acc[3] + acc[7]));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

// C[M,N] += A[M,K] * B[K,N], all row-major.
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c) {
  const auto mi = static_cast<Eigen::Index>(m), ni = static_cast<Eigen::Index>(n),
             ki = static_cast<Eigen::Index>(k);
  MutMap(c, mi, ni).noalias() += ConstMap(a, mi, ki) * ConstMap(b, ki, ni);
}

// C[M,K] += A[M,N] * B[K,N]^T.
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c) {
  const auto mi = static_cast<Eigen::Index>(m), ni = static_cast<Eigen::Index>(n),
             ki = static_cast<Eigen::Index>(k);
  MutMap(c, mi, ki).noalias() += ConstMap(a, mi, ni) * ConstMap(b, ki, ni).transpose();
}

// C[K,N] += A[M,K]^T * B[M,N].
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c) {
  const auto mi = static_cast<Eigen::Index>(m), ni = static_cast<Eigen::Index>(n),
             ki = static_cast<Eigen::Index>(k);
  MutMap(c, ki, ni).noalias() += ConstMap(a, mi, ki).transpose() * ConstMap(b, mi, ni);
}

}  // namespace rlsd::kernels

#endif  // RLSD_SRC_KERNELS_HPP_
