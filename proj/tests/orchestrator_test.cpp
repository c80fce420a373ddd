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

#include "hfl/error.hpp"
#include "hfl/orchestrator.hpp"
#include "oracles.hpp"

namespace hfl {
namespace {

ParamList random_params(Rng& rng) { return {oracle::random_matrix(3, 2, rng), oracle::random_matrix(3, 1, rng)}; }

std::vector<ClientShard> iid_shards(const Dataset& ds, std::size_t clients) {
  std::vector<ClientShard> shards(clients);
  for (std::size_t c = 0; c < clients; ++c) shards[c].client_id = c;
  for (std::size_t i = 0; i < ds.size(); ++i) shards[i % clients].indices.push_back(i);
  for (ClientShard& s : shards) s.distribution = label_distribution(ds, s);
  return shards;
}

struct Fixture {
  Dataset train;
  Dataset test;
  TrainingData data;
};

Fixture synthetic_fixture(std::size_t clients, std::size_t mediators, std::uint64_t seed = 7) {
  Fixture f;
  f.train = generate_synthetic({4, 400, 2, 0.1, seed});
  f.test = generate_synthetic({4, 200, 2, 0.1, seed});
  f.data.shards = iid_shards(f.train, clients);
  f.data.assignment = assign_to_mediators(std::vector<std::size_t>(clients, 0), mediators, seed);
  return f;
}

TrainingData bind(Fixture& f) {
  TrainingData d = f.data;
  d.train = &f.train;
  d.test = &f.test;
  return d;
}

TEST(Aggregate, IdenticalModelsAreReturnedExactly) {
  Rng rng(1);
  const ParamList m = random_params(rng);
  const std::vector<ParamList> copies(3, m);
  EXPECT_EQ(aggregate_deep(copies), m);
  EXPECT_EQ(aggregate_shallow(copies), m);
}

TEST(Aggregate, OppositeModelsCancel) {
  Rng rng(2);
  ParamList w = random_params(rng);
  ParamList neg = w;
  for (Matrix& p : neg) p *= -1.0;
  const std::vector<ParamList> pair{w, neg};
  for (const Matrix& p : aggregate_deep(pair)) EXPECT_EQ(max_abs(p), 0.0);
  for (const Matrix& p : aggregate_shallow(pair)) EXPECT_EQ(max_abs(p), 0.0);
}

TEST(Aggregate, MatchesScalarLoopMean) {
  Rng rng(3);
  const std::vector<ParamList> models{random_params(rng), random_params(rng), random_params(rng)};
  const ParamList expected = oracle::naive_mean(models);
  const ParamList deep = aggregate_deep(models);
  const ParamList shallow = aggregate_shallow(models);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_LE(max_abs_diff(deep[i], expected[i]), 1e-12);
    EXPECT_LE(max_abs_diff(shallow[i], expected[i]), 1e-12);
  }
}

TEST(Aggregate, ShapeMismatchAndEmptyThrow) {
  Rng rng(4);
  const std::vector<ParamList> bad{random_params(rng), {Matrix(2, 2), Matrix(2, 1)}};
  EXPECT_THROW(aggregate_deep(bad), DimensionError);
  EXPECT_THROW(aggregate_shallow(std::vector<ParamList>{}), Error);
}

TEST(WeightedAverage, WeightsBySize) {
  const std::vector<ParamList> models{{Matrix(1, 1, 1.0)}, {Matrix(1, 1, 4.0)}};
  const std::vector<double> weights{2.0, 1.0};
  EXPECT_DOUBLE_EQ(weighted_average(models, weights)[0](0, 0), 2.0);
}

TEST(MediatorBatch, ConcatenatesInClientOrder) {
  Rng rng(5);
  const Matrix a = oracle::random_matrix(4, 2, rng);
  const Matrix b = oracle::random_matrix(4, 3, rng);
  const std::vector<CompressedFeatures> blocks{compress_to_rank(a, 2, 3).features, compress_to_rank(b, 3, 8).features};
  const std::vector<std::vector<int>> labels{{0, 1}, {2, 2, 0}};
  const MediatorBatch batch = build_mediator_batch(1, blocks, labels);
  EXPECT_EQ(batch.features.cols(), 5u);
  EXPECT_LE(max_abs_diff(column_block(batch.features, 0, 2), a), 1e-12);
  EXPECT_LE(max_abs_diff(column_block(batch.features, 2, 3), b), 1e-12);
  EXPECT_EQ(batch.labels, (std::vector<int>{0, 1, 2, 2, 0}));
  ASSERT_EQ(batch.segments.size(), 2u);
  EXPECT_EQ(batch.segments[1].client_id, 8u);
  EXPECT_EQ(batch.segments[1].start, 2u);
  EXPECT_EQ(batch.segments[1].n_c, 3u);

  const std::vector<CompressedFeatures> unordered{blocks[1], blocks[0]};
  const std::vector<std::vector<int>> unordered_labels{labels[1], labels[0]};
  EXPECT_THROW(build_mediator_batch(1, unordered, unordered_labels), Error);
  const std::vector<std::vector<int>> short_labels{{0}, {2, 2, 0}};
  EXPECT_THROW(build_mediator_batch(1, blocks, short_labels), DimensionError);
}

TEST(SliceFeatureGradient, RescalesToClientMeanLoss) {
  Rng rng(6);
  const Matrix grad = oracle::random_matrix(3, 5, rng);
  const std::vector<Segment> segments{{0, 0, 2}, {4, 2, 3}};
  const std::vector<Matrix> slices = slice_feature_gradient(grad, segments);
  Matrix first = column_block(grad, 0, 2);
  first *= 5.0 / 2.0;
  Matrix second = column_block(grad, 2, 3);
  second *= 5.0 / 3.0;
  EXPECT_EQ(slices[0], first);
  EXPECT_EQ(slices[1], second);
  const std::vector<Segment> gap{{0, 0, 2}, {4, 3, 2}};
  EXPECT_THROW(slice_feature_gradient(grad, gap), Error);
  const std::vector<Segment> short_table{{0, 0, 2}};
  EXPECT_THROW(slice_feature_gradient(grad, short_table), DimensionError);
}

TEST(RunRound, ZeroLearningRateKeepsParametersAndAccounts) {
  Fixture f = synthetic_fixture(6, 2);
  const TrainingData data = bind(f);
  Federation fed{6, 2, {}, 1.0};
  fed.hyper.learning_rate = 0.0;
  fed.hyper.example_sampling = 0.5;
  fed.hyper.compression_ratio = 0.4;
  fed.hyper.noise_level = 0.5;
  const SplitModel model = make_default_split_model(2, 8, 4, 1);
  GlobalState state = initialize_state(model, fed, 1e-5);
  const RoundMetrics m = run_round(state, data, {}, 3);
  EXPECT_EQ(state.global.shallow.params(), model.shallow.params());
  EXPECT_EQ(state.global.deep.params(), model.deep.params());
  EXPECT_EQ(m.round, 1u);
  EXPECT_EQ(state.round, 1u);
  EXPECT_GT(m.uplink_scalars, 0u);
  EXPECT_GT(m.downlink_scalars, 0u);
  EXPECT_TRUE(std::isfinite(m.epsilon));
}

TEST(RunRound, UplinkAndDownlinkRecomputed) {
  Fixture f = synthetic_fixture(9, 3);
  const TrainingData data = bind(f);
  Federation fed{9, 3, {}, 1.0};
  fed.hyper.client_sampling = 0.5;
  fed.hyper.example_sampling = 0.3;
  fed.hyper.compression_ratio = 0.3;
  GlobalState state = initialize_state(make_default_split_model(2, 16, 4, 2), fed, 1e-5);
  for (int r = 0; r < 4; ++r) {
    const RoundMetrics m = run_round(state, data, {}, 11);
    std::uint64_t up = 0, down = 0;
    for (const UplinkRecord& u : m.uplinks) {
      EXPECT_EQ(u.k, retained_rank(u.rows, u.n_c, 0.3));
      up += u.rows * u.k + u.k + u.k * u.n_c + u.n_c;
      down += u.rows * u.n_c;
    }
    EXPECT_EQ(m.uplink_scalars, up);
    EXPECT_EQ(m.downlink_scalars, down);
  }
}

TEST(RunRound, FailedRoundLeavesStateUntouched) {
  Fixture f = synthetic_fixture(4, 2);
  f.test.examples = Matrix(3, f.test.size());  // wrong feature count
  const TrainingData data = bind(f);
  Federation fed{4, 2, {}, 1.0};
  fed.hyper.learning_rate = 0.5;
  const SplitModel model = make_default_split_model(2, 8, 4, 1);
  GlobalState state = initialize_state(model, fed, 1e-5);
  EXPECT_THROW(run_round(state, data, {}, 1), DimensionError);
  EXPECT_EQ(state.round, 0u);
  EXPECT_EQ(state.global.shallow.params(), model.shallow.params());
  EXPECT_EQ(state.mediator_deep[0], model.deep.params());
  EXPECT_EQ(state.ledger.records().size(), 0u);
}

TEST(RunRound, WorkerCountDoesNotChangeResults) {
  Fixture f = synthetic_fixture(12, 3);
  const TrainingData data = bind(f);
  Federation fed{12, 3, {}, 1.0};
  fed.hyper.client_sampling = 0.6;
  fed.hyper.example_sampling = 0.4;
  fed.hyper.compression_ratio = 0.4;
  fed.hyper.noise_level = 0.3;
  fed.hyper.deep_iterations = 3;
  const SplitModel model = make_default_split_model(2, 12, 4, 5);
  GlobalState serial = initialize_state(model, fed, 1e-5);
  GlobalState parallel = initialize_state(model, fed, 1e-5);
  RoundOptions one;
  RoundOptions four;
  four.workers = 4;
  for (int r = 0; r < 5; ++r) {
    const RoundMetrics a = run_round(serial, data, one, 99);
    const RoundMetrics b = run_round(parallel, data, four, 99);
    EXPECT_EQ(a.accuracy, b.accuracy);
    EXPECT_EQ(a.uplink_scalars, b.uplink_scalars);
    EXPECT_EQ(a.epsilon, b.epsilon);
  }
  EXPECT_EQ(serial.global.shallow.params(), parallel.global.shallow.params());
  EXPECT_EQ(serial.global.deep.params(), parallel.global.deep.params());
}

TEST(RunRound, LocalModelsKeptWithoutBroadcast) {
  Fixture f = synthetic_fixture(4, 2);
  const TrainingData data = bind(f);
  Federation fed{4, 2, {}, 1.0};
  fed.hyper.learning_rate = 0.2;
  GlobalState state = initialize_state(make_default_split_model(2, 8, 4, 1), fed, 1e-5);
  RoundOptions opts;
  opts.broadcast_every_round = false;
  run_round(state, data, opts, 5);
  EXPECT_NE(state.mediator_deep[0], state.mediator_deep[1]);
  EXPECT_NE(state.client_shallow[0], state.global.shallow.params());
}

TEST(RunRound, DegenerateCaseEqualsMonolithicSgd) {
  Fixture f = synthetic_fixture(1, 1);
  const TrainingData data = bind(f);
  Federation fed{1, 1, {}, 1.0};
  fed.hyper.learning_rate = 0.1;
  fed.hyper.example_sampling = 0.05;  // 20 examples, above the 8 feature rows
  fed.hyper.clip_norm = 1e9;
  const SplitModel model = make_default_split_model(2, 8, 4, 3);
  GlobalState state = initialize_state(model, fed, 1e-5);
  RoundOptions opts;
  opts.fixed_rank = 8;
  Network reference = model.merged();
  const std::uint64_t seed = 21;
  for (std::size_t t = 0; t < 5; ++t) {
    run_round(state, data, opts, seed);
    Rng rng(stream_seed(seed, Stream::kBatch, t, 0));
    const ClientBatch batch = sample_minibatch(f.train, data.shards[0], 0.05, rng);
    const DeepForward fwd = forward_deep(reference, batch.x, batch.labels);
    reference.set_params(sgd_step(reference.params(), backward_deep(reference, fwd.trace).grads, 0.1));
    const ParamList merged = state.global.merged().params();
    for (std::size_t i = 0; i < merged.size(); ++i) EXPECT_LE(max_abs_diff(merged[i], reference.params()[i]), 1e-8);
  }
}

TEST(FedAvg, SingleClientEqualsCentralizedSgd) {
  Fixture f = synthetic_fixture(1, 1);
  const TrainingData data = bind(f);
  const Network init = make_default_split_model(2, 8, 4, 3).merged();
  FedAvgState state{init, 0};
  const FedAvgOptions opts{0.2, 1.0, 1.0, 1, 1, false};
  Network reference = init;
  for (int t = 0; t < 5; ++t) {
    run_fedavg_round(state, data, opts, 4);
    const Dataset all = f.train.select(data.shards[0].indices);
    const DeepForward fwd = forward_deep(reference, all.examples, all.labels);
    reference.set_params(sgd_step(reference.params(), backward_deep(reference, fwd.trace).grads, 0.2));
  }
  for (std::size_t i = 0; i < init.params().size(); ++i)
    EXPECT_LE(max_abs_diff(state.model.params()[i], reference.params()[i]), 1e-10);
}

TEST(FedAvg, ZeroLearningRateGivesFlatAccuracy) {
  Fixture f = synthetic_fixture(5, 1);
  const TrainingData data = bind(f);
  FedAvgState state{make_default_split_model(2, 8, 4, 3).merged(), 0};
  const auto series = run_fedavg(state, data, {0.0, 0.5, 0.5, 1, 1, false}, 5, 1);
  for (const RoundMetrics& m : series) EXPECT_EQ(m.accuracy, series.front().accuracy);
  EXPECT_TRUE(std::isinf(series.back().epsilon));
  EXPECT_EQ(series.back().uplink_scalars, series.back().downlink_scalars);
}

TEST(FedAvg, LearnsSeparableSyntheticData) {
  Fixture f = synthetic_fixture(10, 1);
  const TrainingData data = bind(f);
  FedAvgState state{make_default_split_model(2, 16, 4, 3).merged(), 0};
  const auto series = run_fedavg(state, data, {0.5, 1.0, 0.5, 1, 1, false}, 40, 2);
  EXPECT_GE(series.back().accuracy, 0.9);
}

std::vector<RoundMetrics> series_of(const std::vector<double>& acc, std::uint64_t scalars = 10) {
  std::vector<RoundMetrics> out;
  for (std::size_t t = 0; t < acc.size(); ++t) {
    RoundMetrics m;
    m.round = t + 1;
    m.accuracy = acc[t];
    m.uplink_scalars = scalars;
    m.downlink_scalars = scalars;
    out.push_back(m);
  }
  return out;
}

TEST(OverheadToTarget, ConstantSeriesReachedAtWindowEnd) {
  const auto reached = overhead_to_target(series_of(std::vector<double>(30, 0.9)), 0.8, 10);
  ASSERT_TRUE(reached.has_value());
  EXPECT_EQ(reached->round, 10u);
  EXPECT_EQ(reached->scalars, 200u);
}

TEST(OverheadToTarget, NeverReached) {
  EXPECT_FALSE(overhead_to_target(series_of(std::vector<double>(30, 0.5)), 0.8, 10).has_value());
}

TEST(OverheadToTarget, SlidingWindowHandExample) {
  std::vector<double> acc(9, 0.7);
  acc.resize(30, 0.9);
  const auto reached = overhead_to_target(series_of(acc), 0.8, 10);
  ASSERT_TRUE(reached.has_value());
  EXPECT_EQ(reached->round, 14u);
  EXPECT_EQ(reached->scalars, 14u * 20u);
  EXPECT_THROW(overhead_to_target(series_of(acc), 0.8, 0), Error);
}

TEST(WindowedAccuracy, TrailingMean) {
  EXPECT_DOUBLE_EQ(windowed_accuracy(series_of({0.1, 0.2, 0.3, 0.5}), 2), 0.4);
  EXPECT_DOUBLE_EQ(windowed_accuracy(series_of({0.2, 0.4}), 10), 0.3);
}

}  // namespace
}  // namespace hfl
