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

#include "hfl/data.hpp"
#include "hfl/rng.hpp"

namespace hfl {

inline constexpr double kDefaultKlSmoothing = 1e-6;

// -sum p_i ln p_i in nats, with 0 ln 0 = 0. Throws on an invalid distribution.
double entropy(std::span<const double> p);

// D_KL(p_ref || q) in nats where q = (p_c + eps) / sum(p_c + eps).
double kl_divergence(std::span<const double> p_ref, std::span<const double> p_c,
                     double smoothing = kDefaultKlSmoothing);

// The (entropy, divergence-to-reference) point a client reports.
struct ClientSignature {
  std::size_t client_id = 0;
  double entropy = 0.0;
  double divergence = 0.0;
};

ClientSignature client_signature(const ClientShard& shard, std::span<const double> reference,
                                 double smoothing = kDefaultKlSmoothing);

// Uniform by default; a seeded random reference draws a Dirichlet(1) vector.
std::vector<double> reference_distribution(std::size_t num_classes, bool random, std::uint64_t seed);

// Lloyd's k-means on the 2-D signature points with k-means++ seeding, at most
// 300 iterations. Returns a cluster label per signature.
std::vector<std::size_t> cluster_clients(std::span<const ClientSignature> signatures, std::size_t k,
                                         std::uint64_t seed);

struct MediatorAssignment {
  std::vector<std::vector<std::size_t>> clients_of;  // per mediator, ascending client id
  std::vector<std::size_t> mediator_of;              // per client
  std::vector<std::size_t> cluster_of;               // per client

  std::size_t num_mediators() const noexcept { return clients_of.size(); }
};

// Each cluster is shuffled and dealt round-robin across mediators; the deal
// position carries over between clusters so mediator loads stay balanced.
MediatorAssignment assign_to_mediators(std::span<const std::size_t> cluster_labels,
                                       std::size_t num_mediators, std::uint64_t seed);

// eta, P, S, C, I, L, sigma.
struct HyperParams {
  double learning_rate = 0.015;
  double client_sampling = 1.0;    // P
  double example_sampling = 1.0;   // S
  double compression_ratio = 0.25; // C, must stay below 0.5
  std::size_t deep_iterations = 1; // I
  double clip_norm = 1.0;          // L
  double noise_level = 0.0;        // sigma

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct Federation {
  std::size_t num_clients = 0;
  std::size_t num_mediators = 1;
  HyperParams hyper;
  double mediator_fraction = 1.0;

  void validate() const;
};

struct Participants {
  std::vector<std::size_t> mediators;               // ascending
  std::vector<std::vector<std::size_t>> clients;    // per selected mediator, ascending

  std::size_t client_count() const noexcept;
};

// Selects max(1, round(mediator_fraction * |M|)) mediators, then includes each
// of their clients independently with probability P, forcing at least one.
Participants sample_participants(const Federation& fed, const MediatorAssignment& assignment, Rng& rng);

struct DistributionGap {
  std::vector<double> mediator_kl;  // D_KL(p || p^(m)) per mediator
  double weighted_mediator_kl = 0.0;  // size-weighted mean over mediators
  double mean_client_kl = 0.0;        // size-weighted mean of D_KL(p || p^(c))
};

DistributionGap distribution_gap(const MediatorAssignment& assignment, std::span<const ClientShard> shards,
                                 std::size_t num_classes, double smoothing = kDefaultKlSmoothing);

}  // namespace hfl
