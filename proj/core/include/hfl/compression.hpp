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
#include <cstdint>
#include <span>
#include <vector>

#include "hfl/matrix.hpp"
#include "hfl/nn.hpp"

namespace hfl {

// Scalars are counted at 32-bit width on the simulated wire.
inline constexpr std::size_t kWireScalarBytes = 4;

// Rank-k truncated SVD of a client's d x n feature block O.
struct CompressedFeatures {
  std::size_t client_id = 0;
  Matrix u_k;                  // d x k
  std::vector<double> sigma_k; // k
  Matrix vt_k;                 // k x n
  std::size_t k = 0;
  std::size_t n_c = 0;
  std::size_t transmitted_scalars = 0;  // d*k + k + k*n

  std::size_t rows() const noexcept { return u_k.rows(); }
};

// floor(min(d, n) * C), clamped to [1, min(d, n)].
std::size_t retained_rank(std::size_t rows, std::size_t cols, double compression_ratio);

std::size_t transmitted_scalar_count(std::size_t rows, std::size_t cols, std::size_t k) noexcept;

// The client keeps the full left singular basis of O for the bias corrector;
// only the features member goes on the wire.
struct Compression {
  CompressedFeatures features;
  Matrix u_full;  // d x r
};

// Requires 0 < C < 0.5.
Compression compress_with_basis(const Matrix& o, double compression_ratio, std::size_t client_id = 0);
CompressedFeatures compress(const Matrix& o, double compression_ratio, std::size_t client_id = 0);
// Explicit rank, 1 <= k <= min(d, n). Used where a run pins the rank.
Compression compress_to_rank(const Matrix& o, std::size_t k, std::size_t client_id = 0);

// B = u_k * diag(sigma_k) * vt_k.
Matrix reconstruct(const CompressedFeatures& cf);

// u_full * D_k * u_full^T, the orthogonal projector onto the leading k left
// singular directions.
Matrix truncation_projector(const Matrix& u_full, std::size_t k);

// max |u_full D_k u_full^T O - reconstruct(cf)|.
double projection_identity_check(const Matrix& o, const CompressedFeatures& cf, const Matrix& u_full);

struct CorrectionContext {
  Matrix u_full;
  std::size_t k = 0;
  ForwardTrace trace;  // shallow trace that produced O
};

// grad_O = U D_k U^T grad_B, then backward_shallow. U and D_k are held fixed
// (no differentiation through the SVD).
ParamList corrected_shallow_gradient(const Network& shallow, const Matrix& grad_b, const CorrectionContext& ctx);

// grad_O = grad_B; the ablation without the corrector.
ParamList uncorrected_shallow_gradient(const Network& shallow, const Matrix& grad_b, const ForwardTrace& trace);

// Simulated uplink record: uint32 header (client_id, d, n, k) followed by
// u_k, sigma_k, vt_k as float32, all little-endian, matrices row-major.
std::vector<std::uint8_t> encode_uplink(const CompressedFeatures& cf);
CompressedFeatures decode_uplink(std::span<const std::uint8_t> bytes);

}  // namespace hfl
