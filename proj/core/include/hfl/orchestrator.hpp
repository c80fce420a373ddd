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
#include <optional>
#include <span>
#include <vector>

#include "hfl/compression.hpp"
#include "hfl/data.hpp"
#include "hfl/nn.hpp"
#include "hfl/privacy.hpp"
#include "hfl/reconstruction.hpp"

namespace hfl {

// Random streams are derived per purpose, round, and entity so that results
// do not depend on scheduling.
enum class Stream : std::uint64_t {
  kParticipants = 1,
  kBatch = 2,
  kNoise = 3,
  kFedAvgParticipants = 4,
  kFedAvgLocal = 5,
};

inline std::uint64_t stream_seed(std::uint64_t seed, Stream stream, std::uint64_t round, std::uint64_t id = 0) {
  return derive_seed(seed, {static_cast<std::uint64_t>(stream), round, id});
}

// Read-only inputs shared by every round of a run.
struct TrainingData {
  const Dataset* train = nullptr;
  const Dataset* test = nullptr;
  std::vector<ClientShard> shards;
  MediatorAssignment assignment;
};

struct RoundOptions {
  bool use_corrector = true;
  bool per_example_clip = false;
  bool broadcast_every_round = true;
  // Nonzero pins the compression rank (capped at min(d, n)) instead of
  // deriving it from the compression ratio.
  std::size_t fixed_rank = 0;
  std::size_t workers = 1;
  bool wall_clock = false;
};

// One uploaded feature block, kept for accounting audits.
struct UplinkRecord {
  std::size_t client_id = 0;
  std::size_t rows = 0;  // d
  std::size_t n_c = 0;
  std::size_t k = 0;
};

struct RoundMetrics {
  std::size_t round = 0;  // 1-based
  double accuracy = 0.0;
  std::uint64_t uplink_scalars = 0;
  std::uint64_t downlink_scalars = 0;
  double epsilon = 0.0;
  double seconds = 0.0;

  // Diagnostics that do not go into the metrics CSV.
  std::uint64_t model_sync_scalars = 0;
  std::vector<UplinkRecord> uplinks;
};

struct GlobalState {
  SplitModel global;                      // W^(s)_t and W^(d)_t
  std::vector<ParamList> mediator_deep;   // W^(m)_t
  std::vector<ParamList> client_shallow;  // W^(c)_t
  Federation federation;
  PrivacyLedger ledger;
  std::size_t round = 0;  // completed rounds
};

GlobalState initialize_state(const SplitModel& model, const Federation& federation, double delta);

// Column layout of a mediator's synthetic feature block.
struct Segment {
  std::size_t client_id = 0;
  std::size_t start = 0;
  std::size_t n_c = 0;
};

struct MediatorBatch {
  std::size_t mediator_id = 0;
  Matrix features;  // B^(m), client blocks in ascending client id
  std::vector<int> labels;
  std::vector<Segment> segments;
};

// Concatenates reconstructed client blocks; blocks must already be ordered
// by ascending client id.
MediatorBatch build_mediator_batch(std::size_t mediator_id, std::span<const CompressedFeatures> blocks,
                                   std::span<const std::vector<int>> labels);

// Cuts dB^(m) into per-client blocks following the segment table. Each block
// is rescaled by N_m / n_c so it is the gradient of that client's own mean
// loss.
std::vector<Matrix> slice_feature_gradient(const Matrix& grad, std::span<const Segment> segments);

// One round of the hierarchical protocol. On error the state is left
// untouched and the exception propagates.
RoundMetrics run_round(GlobalState& state, const TrainingData& data, const RoundOptions& options,
                       std::uint64_t seed);

// Unweighted per-parameter mean, reduced in the given order.
ParamList aggregate_deep(std::span<const ParamList> mediator_models);
ParamList aggregate_shallow(std::span<const ParamList> client_models);
// Mean weighted by the given weights.
ParamList weighted_average(std::span<const ParamList> models, std::span<const double> weights);

double evaluate_accuracy(const Network& model, const Dataset& test);

struct FedAvgOptions {
  double learning_rate = 0.015;
  double client_sampling = 1.0;   // P
  double example_sampling = 1.0;  // S, sets the local minibatch size
  std::size_t local_epochs = 1;   // E
  std::size_t workers = 1;
  bool wall_clock = false;
};

struct FedAvgState {
  Network model;
  std::size_t round = 0;
};

RoundMetrics run_fedavg_round(FedAvgState& state, const TrainingData& data, const FedAvgOptions& options,
                              std::uint64_t seed);

std::vector<RoundMetrics> run_fedavg(FedAvgState& state, const TrainingData& data, const FedAvgOptions& options,
                                     std::size_t rounds, std::uint64_t seed);

struct Overhead {
  std::size_t round = 0;  // 1-based round at which the window mean first reaches target
  std::uint64_t scalars = 0;  // cumulative uplink + downlink through that round
};

// Smallest t whose trailing window (rounds t-window+1 .. t) has mean accuracy
// >= target; nullopt when never reached.
std::optional<Overhead> overhead_to_target(std::span<const RoundMetrics> series, double target,
                                           std::size_t window = 10);

// Mean accuracy of the last window rounds (fewer if the series is shorter).
double windowed_accuracy(std::span<const RoundMetrics> series, std::size_t window = 10);

}  // namespace hfl
