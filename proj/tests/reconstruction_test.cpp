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
#include <map>
#include <set>

#include "hfl/error.hpp"
#include "hfl/reconstruction.hpp"

namespace hfl {
namespace {

ClientShard shard_with(std::size_t id, std::vector<double> distribution, std::size_t size) {
  ClientShard s;
  s.client_id = id;
  s.distribution = std::move(distribution);
  s.indices.resize(size);
  return s;
}

TEST(Entropy, Examples) {
  EXPECT_NEAR(entropy(std::vector<double>(10, 0.1)), std::log(10.0), 1e-12);
  EXPECT_EQ(entropy(std::vector<double>{0, 1, 0}), 0.0);
  EXPECT_NEAR(entropy(std::vector<double>{0.5, 0.5}), std::log(2.0), 1e-12);
  EXPECT_THROW(entropy(std::vector<double>{0.5, 0.6}), Error);
}

TEST(KlDivergence, IdenticalUniformIsZero) {
  const std::vector<double> u(10, 0.1);
  EXPECT_LE(kl_divergence(u, u), 1e-5);
}

TEST(KlDivergence, SmoothedOneHotMatchesHandComputation) {
  const double eps = 1e-6;
  const double q1 = (1 + eps) / (1 + 2 * eps);
  const double q2 = eps / (1 + 2 * eps);
  const double expected = 0.5 * std::log(0.5 / q1) + 0.5 * std::log(0.5 / q2);
  const double got = kl_divergence(std::vector<double>{0.5, 0.5}, std::vector<double>{1, 0}, eps);
  EXPECT_TRUE(std::isfinite(got));
  EXPECT_NEAR(got, expected, 1e-12);
}

TEST(KlDivergence, DecreasesAsClientApproachesUniform) {
  const std::vector<double> ref{0.25, 0.25, 0.25, 0.25};
  double previous = INFINITY;
  for (int step = 0; step <= 20; ++step) {
    const double t = step / 20.0;  // 0: one-hot, 1: uniform
    std::vector<double> p(4, 0.25 * t);
    p[0] += 1.0 - t;
    const double d = kl_divergence(ref, p);
    EXPECT_LT(d, previous);
    previous = d;
  }
}

TEST(KlDivergence, RejectsMismatchedOrInvalid) {
  EXPECT_THROW(kl_divergence(std::vector<double>{1}, std::vector<double>{0.5, 0.5}), DimensionError);
  EXPECT_THROW(kl_divergence(std::vector<double>{0.5, 0.5}, std::vector<double>{-0.5, 1.5}), Error);
}

TEST(ClusterClients, SeparatesTightGroups) {
  std::vector<ClientSignature> sigs;
  Rng rng(3);
  for (std::size_t i = 0; i < 20; ++i) {
    const double base = i < 10 ? 0.0 : 5.0;
    sigs.push_back({i, base + rng.uniform(-0.01, 0.01), base + rng.uniform(-0.01, 0.01)});
  }
  const auto labels = cluster_clients(sigs, 2, 1);
  for (std::size_t i = 1; i < 10; ++i) EXPECT_EQ(labels[i], labels[0]);
  for (std::size_t i = 11; i < 20; ++i) EXPECT_EQ(labels[i], labels[10]);
  EXPECT_NE(labels[0], labels[10]);
}

TEST(ClusterClients, OneClusterAndOnePerPoint) {
  std::vector<ClientSignature> sigs;
  for (std::size_t i = 0; i < 6; ++i) sigs.push_back({i, static_cast<double>(i), static_cast<double>(i * i)});
  for (std::size_t label : cluster_clients(sigs, 1, 2)) EXPECT_EQ(label, 0u);
  const auto labels = cluster_clients(sigs, 6, 2);
  EXPECT_EQ(std::set<std::size_t>(labels.begin(), labels.end()).size(), 6u);
}

TEST(ClusterClients, DuplicatePointsAndInvalidK) {
  std::vector<ClientSignature> sigs(5, ClientSignature{0, 0.69, 1.6});
  EXPECT_NO_THROW(cluster_clients(sigs, 3, 1));
  EXPECT_THROW(cluster_clients(sigs, 0, 1), ConfigError);
  EXPECT_THROW(cluster_clients(sigs, 6, 1), ConfigError);
}

TEST(AssignToMediators, DivisibleCase) {
  const std::vector<std::size_t> clusters{0, 0, 0, 1, 1, 1, 2, 2, 2};
  const MediatorAssignment a = assign_to_mediators(clusters, 3, 5);
  for (const auto& clients : a.clients_of) {
    ASSERT_EQ(clients.size(), 3u);
    std::set<std::size_t> seen;
    for (std::size_t c : clients) seen.insert(clusters[c]);
    EXPECT_EQ(seen.size(), 3u);
  }
}

TEST(AssignToMediators, SingleMediatorTakesAll) {
  const std::vector<std::size_t> clusters{0, 1, 0, 2};
  const MediatorAssignment a = assign_to_mediators(clusters, 1, 5);
  EXPECT_EQ(a.clients_of[0], (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(AssignToMediators, BalancedLoadsAndClusterCounts) {
  Rng rng(9);
  std::vector<std::size_t> clusters(100);
  for (auto& c : clusters) c = rng.uniform_index(4);
  const MediatorAssignment a = assign_to_mediators(clusters, 3, 11);
  std::size_t total = 0;
  for (std::size_t m = 0; m < 3; ++m) {
    EXPECT_TRUE(a.clients_of[m].size() == 33 || a.clients_of[m].size() == 34);
    total += a.clients_of[m].size();
    for (std::size_t c : a.clients_of[m]) EXPECT_EQ(a.mediator_of[c], m);
  }
  EXPECT_EQ(total, 100u);
  for (std::size_t k = 0; k < 4; ++k) {
    std::vector<std::size_t> counts(3, 0);
    for (std::size_t c = 0; c < 100; ++c)
      if (clusters[c] == k) ++counts[a.mediator_of[c]];
    EXPECT_LE(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()), 1u);
  }
}

TEST(SampleParticipants, FullSamplingTakesEveryone) {
  const MediatorAssignment a = assign_to_mediators(std::vector<std::size_t>(10, 0), 3, 1);
  Federation fed{10, 3, {}, 1.0};
  fed.hyper.client_sampling = 1.0;
  Rng rng(1);
  const Participants p = sample_participants(fed, a, rng);
  EXPECT_EQ(p.client_count(), 10u);
  EXPECT_EQ(p.mediators, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(SampleParticipants, ForcingKeepsEveryMediatorBusy) {
  const MediatorAssignment a = assign_to_mediators(std::vector<std::size_t>(30, 0), 3, 1);
  Federation fed{30, 3, {}, 1.0};
  fed.hyper.client_sampling = 1e-9;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Participants p = sample_participants(fed, a, rng);
    ASSERT_EQ(p.clients.size(), 3u);
    for (const auto& c : p.clients) EXPECT_GE(c.size(), 1u);
  }
}

TEST(SampleParticipants, DeterministicUnderSeed) {
  const MediatorAssignment a = assign_to_mediators(std::vector<std::size_t>(50, 0), 3, 1);
  Federation fed{50, 3, {}, 0.67};
  fed.hyper.client_sampling = 0.3;
  Rng r1(4), r2(4);
  const Participants x = sample_participants(fed, a, r1);
  const Participants y = sample_participants(fed, a, r2);
  EXPECT_EQ(x.mediators, y.mediators);
  EXPECT_EQ(x.clients, y.clients);
  EXPECT_EQ(x.mediators.size(), 2u);
}

TEST(DistributionGap, IidClientsHaveNoGap) {
  std::vector<ClientShard> shards;
  for (std::size_t i = 0; i < 6; ++i) shards.push_back(shard_with(i, {0.25, 0.25, 0.25, 0.25}, 10));
  const MediatorAssignment a = assign_to_mediators(std::vector<std::size_t>(6, 0), 2, 1);
  const DistributionGap g = distribution_gap(a, shards, 4);
  EXPECT_LE(g.mean_client_kl, 1e-5);
  EXPECT_LE(g.weighted_mediator_kl, 1e-5);
}

TEST(DistributionGap, DisjointOneHotClientsUnderOneMediator) {
  std::vector<ClientShard> shards{shard_with(0, {1, 0}, 10), shard_with(1, {0, 1}, 10)};
  const MediatorAssignment a = assign_to_mediators(std::vector<std::size_t>{0, 1}, 1, 1);
  const DistributionGap g = distribution_gap(a, shards, 2);
  EXPECT_LT(g.weighted_mediator_kl, g.mean_client_kl);
  EXPECT_LE(g.mediator_kl[0], 1e-5);
}

TEST(HyperParams, ValidationNamesTheKey) {
  HyperParams hp;
  hp.compression_ratio = 0.6;
  try {
    hp.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "compression_ratio");
    EXPECT_NE(std::string(e.what()).find("C < 0.5"), std::string::npos);
  }
  hp = HyperParams{};
  hp.client_sampling = 0.0;
  EXPECT_THROW(hp.validate(), ConfigError);
  hp = HyperParams{};
  hp.noise_level = -1.0;
  EXPECT_THROW(hp.validate(), ConfigError);
}

}  // namespace
}  // namespace hfl
