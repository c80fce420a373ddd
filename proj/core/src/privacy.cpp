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

#include "hfl/privacy.hpp"

#include <cmath>

#include "hfl/error.hpp"

namespace hfl {

namespace {

void require_finite(const ParamList& g) {
  for (const Matrix& m : g)
    if (!all_finite(m)) throw NumericError("privacy", "gradient contains non-finite entries");
}

}  // namespace

void DpParams::validate() const {
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm", to_text(clip_norm), "L > 0");
  if (!(noise_level >= 0.0) || !std::isfinite(noise_level))
    throw ConfigError("noise_level", to_text(noise_level), "sigma >= 0");
  if (!(delta > 0.0) || !(delta < 1.0)) throw ConfigError("delta", to_text(delta), "0 < delta < 1");
}

ParamList clip_and_noise(const ParamList& g, const DpParams& dp, std::size_t n_c, Rng& rng) {
  dp.validate();
  if (n_c == 0) throw Error("privacy", "batch size must be at least 1");
  require_finite(g);
  const double norm = l2_norm(g);
  const double scale = 1.0 / std::max(1.0, norm / dp.clip_norm);
  const double stddev = dp.noise_level * dp.clip_norm / std::sqrt(static_cast<double>(n_c));
  ParamList out = g;
  for (Matrix& m : out) {
    for (double& v : m.data()) {
      v *= scale;
      if (stddev > 0.0) v += stddev * rng.normal();
    }
  }
  return out;
}

ParamList clip_per_example_and_noise(std::span<const ParamList> per_example, const DpParams& dp, Rng& rng) {
  dp.validate();
  if (per_example.empty()) throw Error("privacy", "no per-example gradients");
  ParamList sum = zeros_like(per_example.front());
  for (const ParamList& g : per_example) {
    require_finite(g);
    if (!same_layout(g, sum)) throw DimensionError("privacy", "per-example gradient layouts differ");
    const double scale = 1.0 / std::max(1.0, l2_norm(g) / dp.clip_norm);
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto dst = sum[i].data();
      auto src = g[i].data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
    }
  }
  const double stddev = dp.noise_level * dp.clip_norm;
  const double inv_n = 1.0 / static_cast<double>(per_example.size());
  for (Matrix& m : sum) {
    for (double& v : m.data()) {
      if (stddev > 0.0) v += stddev * rng.normal();
      v *= inv_n;
    }
  }
  return sum;
}

PrivacyLedger::PrivacyLedger(double delta) : delta_(delta) {
  if (!(delta > 0.0) || !(delta < 1.0)) throw ConfigError("delta", to_text(delta), "0 < delta < 1");
}

double PrivacyLedger::round_epsilon(double noise_level, std::size_t n_c, double delta) {
  if (!(noise_level > 0.0) || n_c == 0) return std::numeric_limits<double>::infinity();
  const double effective = noise_level * std::sqrt(static_cast<double>(n_c));
  return std::sqrt(2.0 * std::log(1.25 / delta)) / effective;
}

PrivacyLedger ledger_update(PrivacyLedger ledger, const PrivacyLedger::Record& record) {
  PrivacyLedger::Record r = record;
  r.round_epsilon = PrivacyLedger::round_epsilon(r.noise_level, r.n_c, ledger.delta_);
  ledger.records_.push_back(r);
  if (!std::isfinite(r.round_epsilon) || !std::isfinite(ledger.epsilon_)) {
    ledger.epsilon_ = std::numeric_limits<double>::infinity();
    return ledger;
  }
  ledger.sum_sq_ += r.round_epsilon * r.round_epsilon;
  ledger.sum_linear_ += r.round_epsilon * std::expm1(r.round_epsilon);
  ledger.epsilon_ = std::sqrt(2.0 * std::log(1.0 / ledger.delta_) * ledger.sum_sq_) + ledger.sum_linear_;
  return ledger;
}

}  // namespace hfl
