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

#include "hfl/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hfl/error.hpp"

namespace hfl {

namespace {

// Column-major scratch: cols vectors of length len each.
struct Columns {
  std::size_t len = 0;
  std::size_t count = 0;
  std::vector<double> data;

  double* col(std::size_t j) { return data.data() + j * len; }
  const double* col(std::size_t j) const { return data.data() + j * len; }
};

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void rotate(double* a, double* b, std::size_t n, double c, double s) {
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a[i];
    const double y = b[i];
    a[i] = c * x - s * y;
    b[i] = s * x + c * y;
  }
}

// Extends the orthonormal columns [0, filled) of q (len x count) to a full
// orthonormal set by Gram-Schmidt over the standard basis. Columns flagged in
// need_fill are overwritten.
void complete_basis(Columns& q, const std::vector<bool>& need_fill) {
  std::vector<bool> is_basis(q.count);
  for (std::size_t j = 0; j < q.count; ++j) is_basis[j] = !need_fill[j];
  std::size_t candidate = 0;
  for (std::size_t j = 0; j < q.count; ++j) {
    if (!need_fill[j]) continue;
    for (; candidate < q.len; ++candidate) {
      std::vector<double> v(q.len, 0.0);
      v[candidate] = 1.0;
      // Two passes of classical Gram-Schmidt keep the result orthogonal to
      // working precision.
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < q.count; ++i) {
          if (!is_basis[i]) continue;
          const double proj = dot(q.col(i), v.data(), q.len);
          for (std::size_t t = 0; t < q.len; ++t) v[t] -= proj * q.col(i)[t];
        }
      }
      const double norm = std::sqrt(dot(v.data(), v.data(), q.len));
      if (norm > 1e-6) {
        for (std::size_t t = 0; t < q.len; ++t) q.col(j)[t] = v[t] / norm;
        is_basis[j] = true;
        ++candidate;
        break;
      }
    }
  }
}

// SVD for a tall or square input (rows >= cols): returns u (rows x cols),
// sigma, v (cols x cols) as column sets.
void jacobi_tall(const Matrix& a, const SvdOptions& options, Columns& u, std::vector<double>& sigma,
                 Columns& v) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  u = Columns{m, n, std::vector<double>(m * n)};
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) u.col(j)[i] = a(i, j);
  v = Columns{n, n, std::vector<double>(n * n, 0.0)};
  for (std::size_t j = 0; j < n; ++j) v.col(j)[j] = 1.0;

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = dot(u.col(j), u.col(j), m);

  bool converged = n < 2;
  std::size_t sweep = 0;
  for (; sweep < options.max_sweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double alpha = norms[i];
        const double beta = norms[j];
        const double gamma = dot(u.col(i), u.col(j), m);
        if (std::abs(gamma) <= options.tolerance * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(u.col(i), u.col(j), m, c, s);
        rotate(v.col(i), v.col(j), n, c, s);
        norms[i] = dot(u.col(i), u.col(i), m);
        norms[j] = dot(u.col(j), u.col(j), m);
      }
    }
  }
  if (!converged) throw ConvergenceError("svd", "one-sided Jacobi did not converge", sweep);

  sigma.assign(n, 0.0);
  double largest = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    sigma[j] = std::sqrt(dot(u.col(j), u.col(j), m));
    largest = std::max(largest, sigma[j]);
  }
  // Columns whose norm is at rounding level carry no direction; they are
  // treated as exact zeros and re-completed below.
  const double floor = largest * static_cast<double>(std::max(m, n)) * 1e-15;
  std::vector<bool> need_fill(n, false);
  for (std::size_t j = 0; j < n; ++j) {
    if (sigma[j] <= floor || sigma[j] == 0.0) {
      sigma[j] = 0.0;
      need_fill[j] = true;
      std::fill(u.col(j), u.col(j) + m, 0.0);
    } else {
      for (std::size_t t = 0; t < m; ++t) u.col(j)[t] /= sigma[j];
    }
  }
  complete_basis(u, need_fill);
}

}  // namespace

Matrix TruncatedSvd::product() const {
  Matrix scaled = u_k;
  for (std::size_t r = 0; r < scaled.rows(); ++r)
    for (std::size_t c = 0; c < scaled.cols(); ++c) scaled(r, c) *= sigma_k[c];
  return matmul(scaled, vt_k);
}

SvdFactors svd(const Matrix& m, const SvdOptions& options) {
  if (m.empty()) throw NumericError("svd", "input matrix is empty");
  if (!all_finite(m)) throw NumericError("svd", "input contains non-finite entries");

  const bool wide = m.rows() < m.cols();
  Matrix transposed_storage;
  if (wide) transposed_storage = transpose(m);
  const Matrix& tall = wide ? transposed_storage : m;

  Columns left, right;
  std::vector<double> sigma;
  jacobi_tall(tall, options, left, sigma, right);

  // For a wide input, tall = m^T = L S R^T, so m = R S L^T.
  Columns& u_cols = wide ? right : left;
  Columns& v_cols = wide ? left : right;
  const std::size_t r = sigma.size();

  std::vector<std::size_t> order(r);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

  SvdFactors out;
  out.u = Matrix(m.rows(), r);
  out.vt = Matrix(r, m.cols());
  out.sigma.resize(r);
  for (std::size_t k = 0; k < r; ++k) {
    const std::size_t src = order[k];
    const double* uc = u_cols.col(src);
    const double* vc = v_cols.col(src);
    std::size_t pivot = 0;
    for (std::size_t i = 1; i < m.rows(); ++i)
      if (std::abs(uc[i]) > std::abs(uc[pivot])) pivot = i;
    const double sign = uc[pivot] < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < m.rows(); ++i) out.u(i, k) = sign * uc[i];
    for (std::size_t j = 0; j < m.cols(); ++j) out.vt(k, j) = sign * vc[j];
    out.sigma[k] = sigma[src];
  }
  return out;
}

TruncatedSvd truncate(const SvdFactors& factors, std::size_t k) {
  const std::size_t r = factors.sigma.size();
  if (k == 0 || k > r) {
    throw DimensionError("svd", "truncation rank " + std::to_string(k) + " outside [1, " +
                                    std::to_string(r) + "]");
  }
  TruncatedSvd out;
  out.u_k = column_block(factors.u, 0, k);
  out.sigma_k.assign(factors.sigma.begin(), factors.sigma.begin() + static_cast<std::ptrdiff_t>(k));
  out.vt_k = Matrix(k, factors.vt.cols());
  for (std::size_t i = 0; i < k; ++i)
    std::copy(factors.vt.row(i).begin(), factors.vt.row(i).end(), out.vt_k.row(i).begin());
  return out;
}

}  // namespace hfl
