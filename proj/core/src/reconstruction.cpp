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

#include "hfl/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hfl/error.hpp"

namespace hfl {

namespace {

void require_distribution(std::span<const double> p, const char* what) {
  if (p.empty()) throw Error("reconstruction", std::string(what) + " is empty");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error("reconstruction", std::string(what) + " has a negative or non-finite entry");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw Error("reconstruction", std::string(what) + " sums to " + std::to_string(total));
  }
}

double squared_distance(const ClientSignature& s, double x, double y) {
  const double dx = s.entropy - x;
  const double dy = s.divergence - y;
  return dx * dx + dy * dy;
}

}  // namespace

double entropy(std::span<const double> p) {
  require_distribution(p, "distribution");
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double kl_divergence(std::span<const double> p_ref, std::span<const double> p_c, double smoothing) {
  if (p_ref.size() != p_c.size()) {
    throw DimensionError("reconstruction", "KL divergence between distributions of length " +
                                               std::to_string(p_ref.size()) + " and " + std::to_string(p_c.size()));
  }
  require_distribution(p_ref, "reference distribution");
  require_distribution(p_c, "client distribution");
  const double norm = 1.0 + smoothing * static_cast<double>(p_c.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p_ref.size(); ++i) {
    if (p_ref[i] <= 0.0) continue;
    const double q = (p_c[i] + smoothing) / norm;
    d += p_ref[i] * std::log(p_ref[i] / q);
  }
  return std::max(d, 0.0);
}

ClientSignature client_signature(const ClientShard& shard, std::span<const double> reference, double smoothing) {
  return {shard.client_id, entropy(shard.distribution), kl_divergence(reference, shard.distribution, smoothing)};
}

std::vector<double> reference_distribution(std::size_t num_classes, bool random, std::uint64_t seed) {
  std::vector<double> p(num_classes, 1.0 / static_cast<double>(num_classes));
  if (!random) return p;
  Rng rng(derive_seed(seed, {0x524546ULL}));
  double total = 0.0;
  for (double& v : p) total += (v = rng.gamma(1.0));
  for (double& v : p) v /= total;
  return p;
}

std::vector<std::size_t> cluster_clients(std::span<const ClientSignature> signatures, std::size_t k,
                                         std::uint64_t seed) {
  const std::size_t n = signatures.size();
  if (k == 0 || k > n) {
    throw ConfigError("clusters", std::to_string(k), "1 <= K <= number of clients (" + std::to_string(n) + ")");
  }
  Rng rng(derive_seed(seed, {0x4b4d45414e53ULL}));

  // k-means++ seeding.
  std::vector<double> cx, cy;
  std::vector<bool> chosen(n, false);
  const std::size_t first = rng.uniform_index(n);
  cx.push_back(signatures[first].entropy);
  cy.push_back(signatures[first].divergence);
  chosen[first] = true;
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = squared_distance(signatures[i], cx[0], cy[0]);
  while (cx.size() < k) {
    const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = rng.uniform01() * total;
      double running = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        running += nearest[i];
        if (nearest[i] > 0.0 && running > target) {
          pick = i;
          break;
        }
      }
      if (pick == n) {
        for (std::size_t i = n; i-- > 0;)
          if (nearest[i] > 0.0) {
            pick = i;
            break;
          }
      }
    } else {
      // All remaining points coincide with a centre; take the first unused one.
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) {
          pick = i;
          break;
        }
    }
    chosen[pick] = true;
    cx.push_back(signatures[pick].entropy);
    cy.push_back(signatures[pick].divergence);
    for (std::size_t i = 0; i < n; ++i)
      nearest[i] = std::min(nearest[i], squared_distance(signatures[i], cx.back(), cy.back()));
  }

  std::vector<std::size_t> labels(n, 0);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = iter == 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = squared_distance(signatures[i], cx[0], cy[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = squared_distance(signatures[i], cx[c], cy[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[i] != best) changed = true;
      labels[i] = best;
    }
    if (!changed) break;
    std::vector<double> sx(k, 0.0), sy(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sx[labels[i]] += signatures[i].entropy;
      sy[labels[i]] += signatures[i].divergence;
      ++count[labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0) continue;  // empty cluster keeps its centre
      cx[c] = sx[c] / static_cast<double>(count[c]);
      cy[c] = sy[c] / static_cast<double>(count[c]);
    }
  }
  return labels;
}

MediatorAssignment assign_to_mediators(std::span<const std::size_t> cluster_labels, std::size_t num_mediators,
                                       std::uint64_t seed) {
  if (num_mediators == 0) throw ConfigError("num_mediators", "0", ">= 1");
  const std::size_t n = cluster_labels.size();
  const std::size_t clusters =
      n == 0 ? 0 : *std::max_element(cluster_labels.begin(), cluster_labels.end()) + 1;
  std::vector<std::vector<std::size_t>> members(clusters);
  for (std::size_t i = 0; i < n; ++i) members[cluster_labels[i]].push_back(i);

  MediatorAssignment out;
  out.clients_of.resize(num_mediators);
  out.mediator_of.assign(n, 0);
  out.cluster_of.assign(cluster_labels.begin(), cluster_labels.end());
  Rng rng(derive_seed(seed, {0x415353494721ULL}));
  std::size_t next = 0;
  for (auto& group : members) {
    rng.shuffle(std::span(group));
    for (std::size_t client : group) {
      out.clients_of[next].push_back(client);
      out.mediator_of[client] = next;
      next = (next + 1) % num_mediators;
    }
  }
  for (auto& list : out.clients_of) std::sort(list.begin(), list.end());
  return out;
}

void HyperParams::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate", to_text(learning_rate), "eta >= 0");
  if (!(client_sampling > 0.0) || client_sampling > 1.0)
    throw ConfigError("client_sampling", to_text(client_sampling), "0 < P <= 1");
  if (!(example_sampling > 0.0) || example_sampling > 1.0)
    throw ConfigError("example_sampling", to_text(example_sampling), "0 < S <= 1");
  if (!(compression_ratio > 0.0) || !(compression_ratio < 0.5))
    throw ConfigError("compression_ratio", to_text(compression_ratio), "0 < C < 0.5");
  if (deep_iterations < 1) throw ConfigError("deep_iterations", std::to_string(deep_iterations), "I >= 1");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm", to_text(clip_norm), "L > 0");
  if (!(noise_level >= 0.0) || !std::isfinite(noise_level))
    throw ConfigError("noise_level", to_text(noise_level), "sigma >= 0");
}

void Federation::validate() const {
  if (num_clients < 1) throw ConfigError("num_clients", std::to_string(num_clients), ">= 1");
  if (num_mediators < 1) throw ConfigError("num_mediators", std::to_string(num_mediators), ">= 1");
  if (!(mediator_fraction > 0.0) || mediator_fraction > 1.0)
    throw ConfigError("mediator_fraction", to_text(mediator_fraction), "(0, 1]");
  hyper.validate();
}

std::size_t Participants::client_count() const noexcept {
  std::size_t n = 0;
  for (const auto& c : clients) n += c.size();
  return n;
}

Participants sample_participants(const Federation& fed, const MediatorAssignment& assignment, Rng& rng) {
  const double p = fed.hyper.client_sampling;
  if (!(p > 0.0) || p > 1.0) throw ConfigError("client_sampling", std::to_string(p), "0 < P <= 1");
  const std::size_t total = assignment.num_mediators();
  std::vector<std::size_t> mediators(total);
  std::iota(mediators.begin(), mediators.end(), 0);
  if (fed.mediator_fraction < 1.0) {
    const auto keep = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(fed.mediator_fraction * static_cast<double>(total))), 1, total);
    rng.shuffle(std::span(mediators));
    mediators.resize(keep);
    std::sort(mediators.begin(), mediators.end());
  }
  Participants out;
  for (std::size_t m : mediators) {
    const auto& pool = assignment.clients_of[m];
    if (pool.empty()) continue;
    std::vector<std::size_t> picked;
    for (std::size_t c : pool)
      if (rng.bernoulli(p)) picked.push_back(c);
    if (picked.empty()) picked.push_back(pool[rng.uniform_index(pool.size())]);
    out.mediators.push_back(m);
    out.clients.push_back(std::move(picked));
  }
  return out;
}

DistributionGap distribution_gap(const MediatorAssignment& assignment, std::span<const ClientShard> shards,
                                 std::size_t num_classes, double smoothing) {
  const std::vector<double> global = retained_distribution(shards, num_classes);
  DistributionGap out;
  double total = 0.0;
  for (const ClientShard& s : shards) {
    const auto n = static_cast<double>(s.size());
    out.mean_client_kl += n * kl_divergence(global, s.distribution, smoothing);
    total += n;
  }
  if (total > 0.0) out.mean_client_kl /= total;

  double weight_total = 0.0;
  for (const auto& clients : assignment.clients_of) {
    std::vector<ClientShard> members;
    for (std::size_t c : clients) members.push_back(shards[c]);
    double size = 0.0;
    for (const auto& s : members) size += static_cast<double>(s.size());
    if (size == 0.0) {
      out.mediator_kl.push_back(0.0);
      continue;
    }
    const double kl = kl_divergence(global, retained_distribution(members, num_classes), smoothing);
    out.mediator_kl.push_back(kl);
    out.weighted_mediator_kl += size * kl;
    weight_total += size;
  }
  if (weight_total > 0.0) out.weighted_mediator_kl /= weight_total;
  return out;
}

}  // namespace hfl
