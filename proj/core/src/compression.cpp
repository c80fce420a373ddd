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

#include "hfl/compression.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "hfl/error.hpp"
#include "hfl/svd.hpp"

namespace hfl {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw DataError("truncated uplink record", pos);
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= std::uint32_t{in[pos + static_cast<std::size_t>(b)]} << (8 * b);
  pos += 4;
  return v;
}

double get_f32(std::span<const std::uint8_t> in, std::size_t& pos) {
  return static_cast<double>(std::bit_cast<float>(get_u32(in, pos)));
}

}  // namespace

std::size_t retained_rank(std::size_t rows, std::size_t cols, double compression_ratio) {
  const std::size_t r = std::min(rows, cols);
  // The small slack absorbs products such as 50 * 0.4 landing a hair under 20.
  const auto k = static_cast<std::size_t>(std::floor(static_cast<double>(r) * compression_ratio + 1e-9));
  return std::clamp<std::size_t>(k, 1, r);
}

std::size_t transmitted_scalar_count(std::size_t rows, std::size_t cols, std::size_t k) noexcept {
  return rows * k + k + k * cols;
}

Compression compress_to_rank(const Matrix& o, std::size_t k, std::size_t client_id) {
  if (o.empty()) throw Error("compression", "cannot compress an empty feature matrix");
  const SvdFactors factors = svd(o);
  TruncatedSvd t = truncate(factors, k);
  Compression out;
  out.features.client_id = client_id;
  out.features.k = k;
  out.features.n_c = o.cols();
  out.features.transmitted_scalars = transmitted_scalar_count(o.rows(), o.cols(), k);
  out.features.u_k = std::move(t.u_k);
  out.features.sigma_k = std::move(t.sigma_k);
  out.features.vt_k = std::move(t.vt_k);
  out.u_full = factors.u;
  return out;
}

Compression compress_with_basis(const Matrix& o, double compression_ratio, std::size_t client_id) {
  if (!(compression_ratio > 0.0) || !(compression_ratio < 0.5)) {
    throw ConfigError("compression_ratio", to_text(compression_ratio), "0 < C < 0.5");
  }
  if (o.empty()) throw Error("compression", "cannot compress an empty feature matrix");
  return compress_to_rank(o, retained_rank(o.rows(), o.cols(), compression_ratio), client_id);
}

CompressedFeatures compress(const Matrix& o, double compression_ratio, std::size_t client_id) {
  return compress_with_basis(o, compression_ratio, client_id).features;
}

Matrix reconstruct(const CompressedFeatures& cf) {
  if (cf.u_k.cols() != cf.k || cf.sigma_k.size() != cf.k || cf.vt_k.rows() != cf.k) {
    throw DimensionError("compression", "inconsistent factor shapes " + cf.u_k.shape_string() + " / " +
                                            std::to_string(cf.sigma_k.size()) + " / " + cf.vt_k.shape_string());
  }
  return TruncatedSvd{cf.u_k, cf.sigma_k, cf.vt_k}.product();
}

Matrix truncation_projector(const Matrix& u_full, std::size_t k) {
  if (k > u_full.cols()) {
    throw DimensionError("compression", "projector rank " + std::to_string(k) + " exceeds basis " +
                                            u_full.shape_string());
  }
  const Matrix u_k = column_block(u_full, 0, k);
  return matmul_nt(u_k, u_k);
}

double projection_identity_check(const Matrix& o, const CompressedFeatures& cf, const Matrix& u_full) {
  const Matrix projected = matmul(truncation_projector(u_full, cf.k), o);
  return max_abs_diff(projected, reconstruct(cf));
}

ParamList corrected_shallow_gradient(const Network& shallow, const Matrix& grad_b, const CorrectionContext& ctx) {
  if (grad_b.rows() != ctx.u_full.rows()) {
    throw DimensionError("compression", "feature gradient " + grad_b.shape_string() + " does not match basis " +
                                            ctx.u_full.shape_string());
  }
  if (ctx.k == 0 || ctx.k > ctx.u_full.cols()) {
    throw DimensionError("compression", "correction rank " + std::to_string(ctx.k) + " outside basis " +
                                            ctx.u_full.shape_string());
  }
  // U D_k U^T G computed as U_k (U_k^T G).
  const Matrix u_k = column_block(ctx.u_full, 0, ctx.k);
  const Matrix grad_o = matmul(u_k, matmul_tn(u_k, grad_b));
  return backward_shallow(shallow, ctx.trace, grad_o);
}

ParamList uncorrected_shallow_gradient(const Network& shallow, const Matrix& grad_b, const ForwardTrace& trace) {
  return backward_shallow(shallow, trace, grad_b);
}

std::vector<std::uint8_t> encode_uplink(const CompressedFeatures& cf) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + cf.transmitted_scalars * kWireScalarBytes);
  put_u32(out, static_cast<std::uint32_t>(cf.client_id));
  put_u32(out, static_cast<std::uint32_t>(cf.u_k.rows()));
  put_u32(out, static_cast<std::uint32_t>(cf.vt_k.cols()));
  put_u32(out, static_cast<std::uint32_t>(cf.k));
  for (double v : cf.u_k.data()) put_f32(out, v);
  for (double v : cf.sigma_k) put_f32(out, v);
  for (double v : cf.vt_k.data()) put_f32(out, v);
  return out;
}

CompressedFeatures decode_uplink(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  CompressedFeatures cf;
  cf.client_id = get_u32(bytes, pos);
  const std::size_t d = get_u32(bytes, pos);
  const std::size_t n = get_u32(bytes, pos);
  cf.k = get_u32(bytes, pos);
  cf.n_c = n;
  cf.transmitted_scalars = transmitted_scalar_count(d, n, cf.k);
  if (bytes.size() != 16 + cf.transmitted_scalars * kWireScalarBytes) {
    throw DataError("uplink record length does not match its header", std::min<std::size_t>(bytes.size(), 16));
  }
  cf.u_k = Matrix(d, cf.k);
  for (double& v : cf.u_k.data()) v = get_f32(bytes, pos);
  cf.sigma_k.resize(cf.k);
  for (double& v : cf.sigma_k) v = get_f32(bytes, pos);
  cf.vt_k = Matrix(cf.k, n);
  for (double& v : cf.vt_k.data()) v = get_f32(bytes, pos);
  return cf;
}

}  // namespace hfl
