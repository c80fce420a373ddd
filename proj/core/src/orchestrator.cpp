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

#include "hfl/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "hfl/error.hpp"

namespace hfl {

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be
// written to per-index slots; the first exception (lowest index) is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Per-client state carried from the upload phase to the update phase.
struct ClientWork {
  std::size_t client_id = 0;
  std::vector<int> labels;
  Compression compression;
  ForwardTrace trace;
};

ParamList mean_of(std::span<const ParamList> models, const char* what) {
  if (models.empty()) throw Error("orchestrator", std::string(what) + ": nothing to aggregate");
  // Averages offsets from the first model so identical inputs come back bit-exact.
  const ParamList& anchor = models.front();
  ParamList offset = zeros_like(anchor);
  for (const ParamList& m : models) {
    if (!same_layout(m, anchor)) throw DimensionError("orchestrator", std::string(what) + ": model shapes differ");
    for (std::size_t i = 0; i < m.size(); ++i) offset[i] += m[i] - anchor[i];
  }
  const double inv = 1.0 / static_cast<double>(models.size());
  ParamList mean = anchor;
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += inv * offset[i];
  return mean;
}

// Splits a shallow trace into single-example traces (shallow layers act on
// each column independently).
ForwardTrace column_trace(const ForwardTrace& trace, std::size_t column) {
  ForwardTrace out;
  out.kind = trace.kind;
  for (const Matrix& input : trace.inputs) out.inputs.push_back(column_block(input, column, 1));
  return out;
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

GlobalState initialize_state(const SplitModel& model, const Federation& federation, double delta) {
  federation.validate();
  GlobalState state{model, {}, {}, federation, PrivacyLedger(delta), 0};
  state.mediator_deep.assign(federation.num_mediators, model.deep.params());
  state.client_shallow.assign(federation.num_clients, model.shallow.params());
  return state;
}

MediatorBatch build_mediator_batch(std::size_t mediator_id, std::span<const CompressedFeatures> blocks,
                                   std::span<const std::vector<int>> labels) {
  if (blocks.size() != labels.size()) {
    throw DimensionError("orchestrator", "mediator batch has " + std::to_string(blocks.size()) +
                                             " feature blocks but " + std::to_string(labels.size()) + " label sets");
  }
  MediatorBatch batch;
  batch.mediator_id = mediator_id;
  std::vector<Matrix> reconstructed;
  reconstructed.reserve(blocks.size());
  std::size_t start = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i > 0 && blocks[i].client_id <= blocks[i - 1].client_id) {
      throw Error("orchestrator", "mediator blocks must be in ascending client id order");
    }
    reconstructed.push_back(reconstruct(blocks[i]));
    if (labels[i].size() != reconstructed.back().cols()) {
      throw DimensionError("orchestrator", "client " + std::to_string(blocks[i].client_id) +
                                               " sent mismatched labels");
    }
    batch.labels.insert(batch.labels.end(), labels[i].begin(), labels[i].end());
    batch.segments.push_back({blocks[i].client_id, start, labels[i].size()});
    start += labels[i].size();
  }
  batch.features = hconcat(reconstructed);
  return batch;
}

std::vector<Matrix> slice_feature_gradient(const Matrix& grad, std::span<const Segment> segments) {
  std::size_t expected = 0;
  for (const Segment& s : segments) {
    if (s.start != expected) throw Error("orchestrator", "segment table does not partition the batch");
    expected += s.n_c;
  }
  if (expected != grad.cols()) {
    throw DimensionError("orchestrator", "segments cover " + std::to_string(expected) + " columns, gradient has " +
                                             std::to_string(grad.cols()));
  }
  std::vector<Matrix> out;
  out.reserve(segments.size());
  const auto total = static_cast<double>(grad.cols());
  for (const Segment& s : segments) {
    Matrix block = column_block(grad, s.start, s.n_c);
    block *= total / static_cast<double>(s.n_c);
    out.push_back(std::move(block));
  }
  return out;
}

ParamList aggregate_deep(std::span<const ParamList> mediator_models) { return mean_of(mediator_models, "aggregate_deep"); }

ParamList aggregate_shallow(std::span<const ParamList> client_models) {
  return mean_of(client_models, "aggregate_shallow");
}

ParamList weighted_average(std::span<const ParamList> models, std::span<const double> weights) {
  if (models.empty() || models.size() != weights.size()) {
    throw Error("orchestrator", "weighted_average needs one weight per model");
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw Error("orchestrator", "weighted_average weights sum to zero");
  ParamList sum = zeros_like(models.front());
  for (std::size_t m = 0; m < models.size(); ++m) {
    if (!same_layout(models[m], sum)) throw DimensionError("orchestrator", "weighted_average: model shapes differ");
    const double w = weights[m] / total;
    for (std::size_t i = 0; i < sum.size(); ++i) {
      auto dst = sum[i].data();
      auto src = models[m][i].data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += w * src[k];
    }
  }
  return sum;
}

double evaluate_accuracy(const Network& model, const Dataset& test) {
  if (test.size() == 0) return 0.0;
  constexpr std::size_t kChunk = 1024;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < test.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, test.size() - start);
    const Matrix chunk = column_block(test.examples, start, n);
    const std::vector<int> predicted = predict(model, chunk);
    for (std::size_t j = 0; j < n; ++j)
      if (predicted[j] == test.labels[start + j]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

RoundMetrics run_round(GlobalState& state, const TrainingData& data, const RoundOptions& options,
                       std::uint64_t seed) {
  if (data.train == nullptr || data.test == nullptr) throw Error("orchestrator", "training data not set");
  if (data.assignment.mediator_of.size() != data.shards.size()) {
    throw Error("orchestrator", "mediator assignment does not cover every client");
  }
  const auto started = std::chrono::steady_clock::now();
  const HyperParams& hp = state.federation.hyper;
  const std::size_t t = state.round;
  const Network& shallow_template = state.global.shallow;
  const Network& deep_template = state.global.deep;
  const std::size_t d = state.global.boundary_dim();

  Rng participant_rng(stream_seed(seed, Stream::kParticipants, t));
  const Participants participants = sample_participants(state.federation, data.assignment, participant_rng);

  // Flattened participant list; ascending client id inside each mediator.
  std::vector<std::size_t> clients;
  std::vector<std::size_t> client_group;
  for (std::size_t g = 0; g < participants.mediators.size(); ++g) {
    for (std::size_t c : participants.clients[g]) {
      clients.push_back(c);
      client_group.push_back(g);
    }
  }

  auto start_shallow = [&](std::size_t c) -> const ParamList& {
    return options.broadcast_every_round ? shallow_template.params() : state.client_shallow[c];
  };
  auto start_deep = [&](std::size_t m) -> const ParamList& {
    return options.broadcast_every_round ? deep_template.params() : state.mediator_deep[m];
  };

  // Clients: sample, extract features, compress, upload.
  std::vector<ClientWork> work(clients.size());
  parallel_for(clients.size(), options.workers, [&](std::size_t i) {
    const std::size_t c = clients[i];
    Rng batch_rng(stream_seed(seed, Stream::kBatch, t, c));
    ClientBatch batch = sample_minibatch(*data.train, data.shards[c], hp.example_sampling, batch_rng);
    const Network shallow(shallow_template.layers(), start_shallow(c));
    ShallowForward fwd = forward_shallow(shallow, batch.x);
    const Matrix& o = fwd.features;
    Compression comp = options.fixed_rank > 0
                           ? compress_to_rank(o, std::min(options.fixed_rank, std::min(o.rows(), o.cols())), c)
                           : compress_with_basis(o, hp.compression_ratio, c);
    const CompressedFeatures& cf = comp.features;
    const double raw = static_cast<double>(o.rows() * o.cols());
    if (static_cast<double>(cf.k) < raw / static_cast<double>(o.rows() + 1 + o.cols()) &&
        cf.transmitted_scalars >= o.rows() * o.cols()) {
      throw Error("compression", "upload of client " + std::to_string(c) + " is not smaller than the raw features");
    }
    work[i] = ClientWork{c, std::move(batch.labels), std::move(comp), std::move(fwd.trace)};
  });

  // Mediators: concatenate, train the deep replica for I iterations, return
  // feature gradients. The gradient sent back comes from the backward pass of
  // the last iteration, i.e. before its parameter update.
  std::vector<ParamList> trained_deep(participants.mediators.size());
  std::vector<Matrix> client_grad(clients.size());
  std::vector<std::vector<std::size_t>> group_members(participants.mediators.size());
  for (std::size_t i = 0; i < clients.size(); ++i) group_members[client_group[i]].push_back(i);
  parallel_for(participants.mediators.size(), options.workers, [&](std::size_t g) {
    const std::size_t m = participants.mediators[g];
    std::vector<CompressedFeatures> blocks;
    std::vector<std::vector<int>> labels;
    for (std::size_t i : group_members[g]) {
      blocks.push_back(work[i].compression.features);
      labels.push_back(work[i].labels);
    }
    const MediatorBatch batch = build_mediator_batch(m, blocks, labels);
    Network deep(deep_template.layers(), start_deep(m));
    Matrix grad_b;
    for (std::size_t iter = 0; iter < hp.deep_iterations; ++iter) {
      const DeepForward fwd = forward_deep(deep, batch.features, batch.labels);
      DeepBackward bwd = backward_deep(deep, fwd.trace);
      if (iter + 1 == hp.deep_iterations) grad_b = std::move(bwd.grad_features);
      deep.set_params(sgd_step(deep.params(), bwd.grads, hp.learning_rate));
    }
    std::vector<Matrix> slices = slice_feature_gradient(grad_b, batch.segments);
    for (std::size_t s = 0; s < slices.size(); ++s) client_grad[group_members[g][s]] = std::move(slices[s]);
    trained_deep[g] = deep.params();
  });

  // Clients: correct, clip and noise, step.
  const DpParams dp{hp.clip_norm, hp.noise_level, state.ledger.delta()};
  std::vector<ParamList> updated_shallow(clients.size());
  parallel_for(clients.size(), options.workers, [&](std::size_t i) {
    ClientWork& cw = work[i];
    const Network shallow(shallow_template.layers(), start_shallow(cw.client_id));
    Rng noise_rng(stream_seed(seed, Stream::kNoise, t, cw.client_id));
    ParamList noised;
    if (options.per_example_clip) {
      const Matrix grad_o = options.use_corrector ? [&] {
        const Matrix u_k = column_block(cw.compression.u_full, 0, cw.compression.features.k);
        return matmul(u_k, matmul_tn(u_k, client_grad[i]));
      }()
                                                  : client_grad[i];
      // Per-example gradients of the per-example loss (undo the 1/n_c).
      const std::size_t n = grad_o.cols();
      std::vector<ParamList> per_example;
      per_example.reserve(n);
      for (std::size_t j = 0; j < n; ++j) {
        Matrix column = column_block(grad_o, j, 1);
        column *= static_cast<double>(n);
        per_example.push_back(backward_shallow(shallow, column_trace(cw.trace, j), column));
      }
      noised = clip_per_example_and_noise(per_example, dp, noise_rng);
    } else {
      const std::size_t k = cw.compression.features.k;
      const ParamList grads =
          options.use_corrector
              ? corrected_shallow_gradient(shallow, client_grad[i],
                                           CorrectionContext{std::move(cw.compression.u_full), k, std::move(cw.trace)})
              : uncorrected_shallow_gradient(shallow, client_grad[i], cw.trace);
      noised = clip_and_noise(grads, dp, cw.labels.size(), noise_rng);
    }
    updated_shallow[i] = sgd_step(shallow.params(), noised, hp.learning_rate);
  });

  // FL server: average every mediator's deep model (unsampled mediators
  // contribute the model they started the round with).
  std::vector<ParamList> mediator_models(state.federation.num_mediators);
  for (std::size_t m = 0; m < mediator_models.size(); ++m) mediator_models[m] = start_deep(m);
  for (std::size_t g = 0; g < participants.mediators.size(); ++g)
    mediator_models[participants.mediators[g]] = trained_deep[g];
  ParamList next_deep = aggregate_deep(mediator_models);

  // AM: average participating shallow models in ascending client id.
  std::vector<std::size_t> order(clients.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return clients[a] < clients[b]; });
  std::vector<ParamList> ordered_shallow;
  ordered_shallow.reserve(order.size());
  for (std::size_t i : order) ordered_shallow.push_back(updated_shallow[i]);
  ParamList next_shallow = aggregate_shallow(ordered_shallow);

  RoundMetrics metrics;
  metrics.round = t + 1;
  std::size_t min_batch = 0;
  for (std::size_t i : order) {
    const CompressedFeatures& cf = work[i].compression.features;
    metrics.uplinks.push_back({work[i].client_id, cf.rows(), cf.n_c, cf.k});
    metrics.uplink_scalars += cf.transmitted_scalars + cf.n_c;
    metrics.downlink_scalars += d * cf.n_c;
    min_batch = min_batch == 0 ? cf.n_c : std::min(min_batch, cf.n_c);
  }
  const std::uint64_t shallow_size = shallow_template.parameter_count();
  const std::uint64_t deep_size = deep_template.parameter_count();
  metrics.model_sync_scalars = 2 * (shallow_size * clients.size() + deep_size * participants.mediators.size());

  PrivacyLedger next_ledger =
      ledger_update(state.ledger, {hp.noise_level, hp.example_sampling, min_batch, 0.0});

  SplitModel next_global(Network(shallow_template.layers(), next_shallow), Network(deep_template.layers(), next_deep));
  metrics.accuracy = evaluate_accuracy(next_global.merged(), *data.test);
  metrics.epsilon = next_ledger.epsilon();

  // Commit.
  if (options.broadcast_every_round) {
    for (ParamList& m : state.mediator_deep) m = next_deep;
    for (ParamList& c : state.client_shallow) c = next_shallow;
  } else {
    for (std::size_t g = 0; g < participants.mediators.size(); ++g)
      state.mediator_deep[participants.mediators[g]] = std::move(trained_deep[g]);
    for (std::size_t i = 0; i < clients.size(); ++i) state.client_shallow[clients[i]] = std::move(updated_shallow[i]);
  }
  state.global = std::move(next_global);
  state.ledger = std::move(next_ledger);
  state.round = t + 1;
  if (options.wall_clock) metrics.seconds = elapsed_seconds(started);
  return metrics;
}

RoundMetrics run_fedavg_round(FedAvgState& state, const TrainingData& data, const FedAvgOptions& options,
                              std::uint64_t seed) {
  if (data.train == nullptr || data.test == nullptr) throw Error("orchestrator", "training data not set");
  if (data.shards.empty()) throw Error("orchestrator", "no client shards");
  if (!(options.client_sampling > 0.0) || options.client_sampling > 1.0) {
    throw ConfigError("client_sampling", to_text(options.client_sampling), "0 < P <= 1");
  }
  const auto started = std::chrono::steady_clock::now();
  const std::size_t t = state.round;

  Rng participant_rng(stream_seed(seed, Stream::kFedAvgParticipants, t));
  std::vector<std::size_t> clients;
  for (const ClientShard& s : data.shards)
    if (participant_rng.bernoulli(options.client_sampling)) clients.push_back(s.client_id);
  if (clients.empty()) clients.push_back(data.shards[participant_rng.uniform_index(data.shards.size())].client_id);

  std::vector<ParamList> local(clients.size());
  parallel_for(clients.size(), options.workers, [&](std::size_t i) {
    const ClientShard& shard = data.shards[clients[i]];
    Rng rng(stream_seed(seed, Stream::kFedAvgLocal, t, shard.client_id));
    Network model = state.model;
    const std::size_t batch = minibatch_size(shard.size(), options.example_sampling);
    std::vector<std::size_t> order = shard.indices;
    for (std::size_t epoch = 0; epoch < options.local_epochs; ++epoch) {
      rng.shuffle(std::span(order));
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t n = std::min(batch, order.size() - start);
        const Dataset mb = data.train->select(std::span(order).subspan(start, n));
        const DeepForward fwd = forward_deep(model, mb.examples, mb.labels);
        const DeepBackward bwd = backward_deep(model, fwd.trace);
        model.set_params(sgd_step(model.params(), bwd.grads, options.learning_rate));
      }
    }
    local[i] = model.params();
  });

  std::vector<double> weights;
  for (std::size_t c : clients) weights.push_back(static_cast<double>(data.shards[c].size()));
  Network next(state.model.layers(), weighted_average(local, weights));

  RoundMetrics metrics;
  metrics.round = t + 1;
  const std::uint64_t size = state.model.parameter_count();
  metrics.uplink_scalars = size * clients.size();
  metrics.downlink_scalars = size * clients.size();
  metrics.accuracy = evaluate_accuracy(next, *data.test);
  metrics.epsilon = std::numeric_limits<double>::infinity();
  state.model = std::move(next);
  state.round = t + 1;
  if (options.wall_clock) metrics.seconds = elapsed_seconds(started);
  return metrics;
}

std::vector<RoundMetrics> run_fedavg(FedAvgState& state, const TrainingData& data, const FedAvgOptions& options,
                                     std::size_t rounds, std::uint64_t seed) {
  std::vector<RoundMetrics> series;
  series.reserve(rounds);
  for (std::size_t r = 0; r < rounds; ++r) series.push_back(run_fedavg_round(state, data, options, seed));
  return series;
}

std::optional<Overhead> overhead_to_target(std::span<const RoundMetrics> series, double target, std::size_t window) {
  if (window == 0) throw Error("orchestrator", "window must be at least 1");
  std::uint64_t cumulative = 0;
  for (std::size_t t = 0; t < series.size(); ++t) {
    cumulative += series[t].uplink_scalars + series[t].downlink_scalars;
    if (t + 1 < window) continue;
    double sum = 0.0;
    for (std::size_t i = t + 1 - window; i <= t; ++i) sum += series[i].accuracy;
    // Tolerance covers summation rounding (e.g. five 0.7s and five 0.9s).
    if (sum / static_cast<double>(window) >= target - 1e-12) return Overhead{t + 1, cumulative};
  }
  return std::nullopt;
}

double windowed_accuracy(std::span<const RoundMetrics> series, std::size_t window) {
  if (series.empty() || window == 0) return 0.0;
  const std::size_t n = std::min(window, series.size());
  double sum = 0.0;
  for (std::size_t i = series.size() - n; i < series.size(); ++i) sum += series[i].accuracy;
  return sum / static_cast<double>(n);
}

}  // namespace hfl
