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

#include <benchmark/benchmark.h>

#include "hfl/compression.hpp"
#include "hfl/data.hpp"
#include "hfl/orchestrator.hpp"
#include "hfl/svd.hpp"

namespace {

using namespace hfl;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-1.0, 1.0);
  return m;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1);
  const Matrix b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 256);

void BM_Svd(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto cols = static_cast<std::size_t>(state.range(1));
  const Matrix m = random_matrix(rows, cols, 3);
  for (auto _ : state) benchmark::DoNotOptimize(svd(m));
}
BENCHMARK(BM_Svd)->Args({32, 32})->Args({64, 50})->Args({128, 50});

// Feature block of one client: hidden width x minibatch size.
void BM_Compress(benchmark::State& state) {
  const Matrix o = random_matrix(static_cast<std::size_t>(state.range(0)), 50, 4);
  for (auto _ : state) benchmark::DoNotOptimize(compress_with_basis(o, 0.4));
}
BENCHMARK(BM_Compress)->Arg(64)->Arg(128);

void BM_Round(benchmark::State& state) {
  const std::size_t clients = 30;
  const Dataset train = generate_synthetic({10, 3000, 20, 0.5, 5});
  const Dataset test = generate_synthetic({10, 500, 20, 0.5, 6});
  TrainingData data{&train, &test, partition_noniid(train, clients, 2, 7), {}};
  data.assignment = assign_to_mediators(std::vector<std::size_t>(clients, 0), 3, 8);
  Federation fed{clients, 3, {}, 1.0};
  fed.hyper.client_sampling = 0.3;
  fed.hyper.example_sampling = 0.5;
  fed.hyper.compression_ratio = 0.4;
  fed.hyper.noise_level = 0.5;
  fed.hyper.deep_iterations = static_cast<std::size_t>(state.range(0));
  GlobalState s = initialize_state(make_default_split_model(20, 64, 10, 9), fed, 1e-5);
  for (auto _ : state) benchmark::DoNotOptimize(run_round(s, data, {}, 10));
}
BENCHMARK(BM_Round)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
