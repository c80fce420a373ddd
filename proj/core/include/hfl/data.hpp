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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hfl/matrix.hpp"
#include "hfl/rng.hpp"

namespace hfl {

// examples is features x N; labels[i] belongs to column i.
struct Dataset {
  Matrix examples;
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t feature_dim() const noexcept { return examples.rows(); }

  // Throws DataError when an invariant is violated.
  void validate() const;
  // Subset in the given index order.
  Dataset select(std::span<const std::size_t> indices) const;
};

enum class DatasetFormat { kIdxUbyte, kCsv, kSynthetic };

DatasetFormat parse_dataset_format(const std::string& name);
std::string to_string(DatasetFormat format);

// Gaussian mixture: class centres uniform in [-1, 1]^dim, points
// centre + N(0, cluster_std^2). Point i has label i mod classes.
struct SyntheticSpec {
  std::size_t classes = 4;
  std::size_t points = 400;
  std::size_t dim = 2;
  double cluster_std = 0.1;
  std::uint64_t seed = 0;
};

// Parses "key = value" lines (keys: classes, points, dim, cluster_std,
// seed); '#' starts a comment.
SyntheticSpec parse_synthetic_spec(const std::string& text);
Dataset generate_synthetic(const SyntheticSpec& spec);

struct DatasetSource {
  DatasetFormat format = DatasetFormat::kSynthetic;
  std::filesystem::path path;         // idx images, csv file, or synthetic spec
  std::filesystem::path labels_path;  // idx labels only
  // Declared class count; 0 infers max(label) + 1.
  std::size_t num_classes = 0;
};

// idx images are scaled to [0, 1]. Malformed files raise DataError carrying
// the byte offset; a label outside the declared class count is an error.
Dataset load_dataset(const DatasetSource& source);

// Parsers over in-memory buffers; load_dataset delegates to these.
Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                  std::size_t num_classes = 0);
Dataset parse_csv(const std::string& text, std::size_t num_classes = 0);

// Empirical class frequencies of the given labels.
std::vector<double> label_distribution(std::span<const int> labels, std::size_t num_classes);

struct ClientShard {
  std::size_t client_id = 0;
  std::vector<std::size_t> indices;  // into the parent Dataset
  std::vector<double> distribution;  // p^(c)

  std::size_t size() const noexcept { return indices.size(); }
};

std::vector<double> label_distribution(const Dataset& ds, const ClientShard& shard);

// Sort-by-label sharding: the dataset is cut into num_clients *
// classes_per_client single-class shards and each client receives
// classes_per_client of them. Remainders that break equal shard sizes inside
// a class are dropped; an error is raised if more than 5% would be dropped.
std::vector<ClientShard> partition_noniid(const Dataset& ds, std::size_t num_clients,
                                          std::size_t classes_per_client, std::uint64_t seed);

// Per-class Dirichlet(alpha) proportions over clients. Every client is
// guaranteed at least one example.
std::vector<ClientShard> partition_dirichlet(const Dataset& ds, std::size_t num_clients, double alpha,
                                             std::uint64_t seed);

// Label mixture over all retained examples, weighted by shard size.
std::vector<double> retained_distribution(std::span<const ClientShard> shards, std::size_t num_classes);

// FNV-1a over (client_id, indices) of every shard; identifies a partition.
std::uint64_t partition_hash(std::span<const ClientShard> shards);

struct ClientBatch {
  std::size_t client_id = 0;
  Matrix x;
  std::vector<int> labels;
  std::vector<std::size_t> indices;

  std::size_t n_c() const noexcept { return labels.size(); }
};

// Seeded permutation without replacement; size max(1, round(s * |shard|)).
ClientBatch sample_minibatch(const Dataset& ds, const ClientShard& shard, double s, Rng& rng);

// Same, but a fixed batch of the given size.
ClientBatch sample_minibatch_of_size(const Dataset& ds, const ClientShard& shard, std::size_t size,
                                     Rng& rng);

std::size_t minibatch_size(std::size_t shard_size, double s);

// Deterministic holdout: a seeded permutation, the first fraction goes to test.
struct TrainTestSplit {
  Dataset train;
  Dataset test;
};
TrainTestSplit holdout_split(const Dataset& ds, double test_fraction, std::uint64_t seed);

}  // namespace hfl
