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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "hfl/error.hpp"
#include "hfl/privacy.hpp"
#include "oracles.hpp"

namespace hfl {
namespace {

ParamList scaled_to_norm(double norm, Rng& rng) {
  ParamList g{oracle::random_matrix(3, 4, rng), oracle::random_matrix(3, 1, rng)};
  const double s = norm / l2_norm(g);
  for (Matrix& m : g) m *= s;
  return g;
}

TEST(ClipAndNoise, IdentityInsideTheBall) {
  Rng rng(1);
  for (double norm : {0.1, 0.5, 0.999999}) {
    const ParamList g = scaled_to_norm(norm, rng);
    EXPECT_EQ(clip_and_noise(g, {1.0, 0.0, 1e-5}, 10, rng), g);
  }
}

TEST(ClipAndNoise, HalvesAtTwiceTheBound) {
  Rng rng(2);
  const ParamList g = scaled_to_norm(4.0, rng);
  const ParamList out = clip_and_noise(g, {2.0, 0.0, 1e-5}, 10, rng);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_LE(max_abs_diff(out[i], 0.5 * g[i]), 1e-15);
  EXPECT_NEAR(l2_norm(out), 2.0, 1e-12);
}

TEST(ClipAndNoise, OutputNormNeverExceedsBoundWithoutNoise) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const ParamList g = scaled_to_norm(rng.uniform(0.0, 10.0), rng);
    EXPECT_LE(l2_norm(clip_and_noise(g, {1.5, 0.0, 1e-5}, 5, rng)), 1.5 + 1e-12);
  }
}

TEST(ClipAndNoise, NoiseMomentsMatchSigmaLOverRootN) {
  Rng rng(4);
  const ParamList zero{Matrix(100, 10)};
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;
  for (int draw = 0; draw < 100; ++draw) {
    for (double v : clip_and_noise(zero, {1.0, 1.0, 1e-5}, 100, rng)[0].data()) {
      sum += v;
      sum_sq += v * v;
      ++count;
    }
  }
  const double mean = sum / static_cast<double>(count);
  const double stddev = std::sqrt(sum_sq / static_cast<double>(count) - mean * mean);
  EXPECT_NEAR(stddev, 0.1, 0.005);
  EXPECT_LE(std::abs(mean), 3.0 * 0.1 / std::sqrt(static_cast<double>(count)));
}

TEST(ClipAndNoise, DeterministicUnderSeed) {
  Rng a(5), b(5), data(6);
  const ParamList g = scaled_to_norm(3.0, data);
  EXPECT_EQ(clip_and_noise(g, {1.0, 0.7, 1e-5}, 8, a), clip_and_noise(g, {1.0, 0.7, 1e-5}, 8, b));
}

TEST(ClipAndNoise, RejectsBadInput) {
  Rng rng(7);
  ParamList g{Matrix(2, 2, 1.0)};
  EXPECT_THROW(clip_and_noise(g, {1.0, 0.0, 1e-5}, 0, rng), Error);
  EXPECT_THROW(clip_and_noise(g, {0.0, 0.0, 1e-5}, 1, rng), ConfigError);
  EXPECT_THROW(clip_and_noise(g, {1.0, -1.0, 1e-5}, 1, rng), ConfigError);
  g[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(clip_and_noise(g, {1.0, 0.0, 1e-5}, 1, rng), Error);
}

TEST(ClipPerExample, ClipsEachThenAverages) {
  Rng rng(8);
  const std::vector<ParamList> per{scaled_to_norm(0.5, rng), scaled_to_norm(3.0, rng)};
  const ParamList out = clip_per_example_and_noise(per, {1.0, 0.0, 1e-5}, rng);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Matrix expected = 0.5 * (per[0][i] + (1.0 / 3.0) * per[1][i]);
    EXPECT_LE(max_abs_diff(out[i], expected), 1e-15);
  }
}

TEST(ClipPerExample, NoiseScale) {
  Rng rng(9);
  const std::vector<ParamList> per(4, ParamList{Matrix(50, 50)});
  double sum_sq = 0.0;
  std::size_t count = 0;
  for (int draw = 0; draw < 20; ++draw)
    for (double v : clip_per_example_and_noise(per, {2.0, 1.0, 1e-5}, rng)[0].data()) {
      sum_sq += v * v;
      ++count;
    }
  EXPECT_NEAR(std::sqrt(sum_sq / static_cast<double>(count)), 2.0 / 4.0, 0.025);
}

TEST(Ledger, ZeroRoundsIsZero) { EXPECT_EQ(PrivacyLedger(1e-5).epsilon(), 0.0); }

TEST(Ledger, RoundEpsilonFormula) {
  const double expected = std::sqrt(2.0 * std::log(1.25 / 1e-5)) / (0.5 * std::sqrt(50.0));
  EXPECT_NEAR(PrivacyLedger::round_epsilon(0.5, 50, 1e-5), expected, 1e-15);
}

TEST(Ledger, AdvancedCompositionOverRounds) {
  PrivacyLedger ledger(1e-5);
  std::vector<double> eps;
  for (int t = 0; t < 5; ++t) {
    ledger = ledger_update(ledger, {1.0 + t, 0.5, static_cast<std::size_t>(20 + t), 0.0});
    eps.push_back(PrivacyLedger::round_epsilon(1.0 + t, 20 + t, 1e-5));
  }
  double sq = 0.0, lin = 0.0;
  for (double e : eps) {
    sq += e * e;
    lin += e * (std::exp(e) - 1.0);
  }
  EXPECT_NEAR(ledger.epsilon(), std::sqrt(2.0 * std::log(1e5) * sq) + lin, 1e-12);
  EXPECT_EQ(ledger.records().size(), 5u);
  EXPECT_EQ(ledger.records()[2].n_c, 22u);
}

TEST(Ledger, MonotoneInRoundsAndDecreasingInSigma) {
  auto run = [](double sigma, int rounds) {
    PrivacyLedger ledger(1e-5);
    for (int t = 0; t < rounds; ++t) ledger = ledger_update(ledger, {sigma, 0.5, 50, 0.0});
    return ledger.epsilon();
  };
  double previous = 0.0;
  for (int t = 1; t <= 40; ++t) {
    const double e = run(0.5, t);
    EXPECT_GE(e, previous);
    previous = e;
  }
  EXPECT_GE(run(0.5, 20), run(0.5, 10));
  EXPECT_LT(run(1.0, 10), run(0.5, 10));
}

TEST(Ledger, ZeroSigmaIsInfinite) {
  PrivacyLedger ledger(1e-5);
  ledger = ledger_update(ledger, {0.0, 1.0, 10, 0.0});
  EXPECT_TRUE(std::isinf(ledger.epsilon()));
  ledger = ledger_update(ledger, {1.0, 1.0, 10, 0.0});
  EXPECT_TRUE(std::isinf(ledger.epsilon()));
}

}  // namespace
}  // namespace hfl
