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
#include <limits>
#include <span>
#include <vector>

#include "hfl/nn.hpp"
#include "hfl/rng.hpp"

namespace hfl {

struct DpParams {
  double clip_norm = 1.0;    // L
  double noise_level = 0.0;  // sigma
  double delta = 1e-5;

  void validate() const;
};

// g / max(1, |g|_2 / L) + N(0, sigma^2 L^2 / n_c) per coordinate, where |g|_2
// is taken jointly over every matrix in g.
ParamList clip_and_noise(const ParamList& g, const DpParams& dp, std::size_t n_c, Rng& rng);

// Per-example variant: each example gradient is clipped to L, the clipped
// gradients are summed, N(0, sigma^2 L^2) is added, and the sum is divided
// by the number of examples.
ParamList clip_per_example_and_noise(std::span<const ParamList> per_example, const DpParams& dp, Rng& rng);

// Cumulative privacy loss under a simplified analysis: each round is a
// Gaussian mechanism with eps_r = sqrt(2 ln(1.25 / delta)) / (sigma sqrt(n_c)),
// composed with the advanced composition theorem
//   eps = sqrt(2 ln(1 / delta) sum eps_r^2) + sum eps_r (e^eps_r - 1).
// The reported value is an upper bound for that analysis, not a moments
// accountant.
class PrivacyLedger {
 public:
  struct Record {
    double noise_level = 0.0;
    double sampling_rate = 0.0;
    std::size_t n_c = 0;
    double round_epsilon = 0.0;
  };

  explicit PrivacyLedger(double delta = 1e-5);

  double delta() const noexcept { return delta_; }
  double epsilon() const noexcept { return epsilon_; }
  const std::vector<Record>& records() const noexcept { return records_; }

  static double round_epsilon(double noise_level, std::size_t n_c, double delta);

 private:
  friend PrivacyLedger ledger_update(PrivacyLedger ledger, const Record& record);

  double delta_;
  double epsilon_ = 0.0;
  double sum_sq_ = 0.0;
  double sum_linear_ = 0.0;
  std::vector<Record> records_;
};

// Appends a round; sigma = 0 makes epsilon +infinity from then on.
PrivacyLedger ledger_update(PrivacyLedger ledger, const PrivacyLedger::Record& record);

}  // namespace hfl
