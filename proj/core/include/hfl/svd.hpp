// Copyright 2026 The H-FL Simulator Authors.
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

#include <cstddef>
#include <vector>

#include "hfl/matrix.hpp"

namespace hfl {

// Thin SVD m = u * diag(sigma) * vt with r = min(rows, cols).
//
// u has orthonormal columns (m x r), vt has orthonormal rows (r x n), and
// sigma is non-negative and non-increasing. Columns belonging to zero
// singular values are completed to an orthonormal set. Signs are fixed so
// that the largest-magnitude entry of each u column is non-negative (ties go
// to the lowest row index); the matching vt row is flipped with it.
struct SvdFactors {
  Matrix u;
  std::vector<double> sigma;
  Matrix vt;

  std::size_t rank_bound() const noexcept { return sigma.size(); }
};

struct TruncatedSvd {
  Matrix u_k;
  std::vector<double> sigma_k;
  Matrix vt_k;

  // u_k * diag(sigma_k) * vt_k.
  Matrix product() const;
};

struct SvdOptions {
  std::size_t max_sweeps = 100;
  // A column pair is considered orthogonal once |<a_i, a_j>| <= tol * |a_i| |a_j|.
  double tolerance = 1e-12;
};

// One-sided (Hestenes) Jacobi SVD. Throws NumericError on non-finite or
// empty input and ConvergenceError when max_sweeps is exhausted.
SvdFactors svd(const Matrix& m, const SvdOptions& options = {});

// Leading k singular triplets. Throws DimensionError unless 1 <= k <= r.
TruncatedSvd truncate(const SvdFactors& factors, std::size_t k);

}  // namespace hfl
