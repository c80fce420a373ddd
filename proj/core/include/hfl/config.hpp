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

// Experiment configuration.
//
// Grammar (one entry per line):
//
//   line    := blank | comment | entry
//   comment := '#' anything
//   entry   := key '=' value [comment]
//
// Keys are the names returned by config_keys(); whitespace around keys and
// values is ignored. A key may appear at most once per file. Relative paths
// in a file are resolved against the file's directory. Flag overrides use
// the same keys and are applied after the file.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hfl/data.hpp"
#include "hfl/reconstruction.hpp"

namespace hfl {

enum class Method { kHfl, kHflNoCorrector, kFedAvg };

Method parse_method(const std::string& name);
std::string to_string(Method method);

enum class PartitionScheme { kSort, kDirichlet };

struct ExperimentConfig {
  // Data.
  DatasetFormat dataset_format = DatasetFormat::kIdxUbyte;
  std::filesystem::path train_path;
  std::filesystem::path train_labels_path;
  std::filesystem::path test_path;  // empty: hold out test_fraction of train
  std::filesystem::path test_labels_path;
  double test_fraction = 0.2;
  std::size_t num_classes = 0;

  // Federation.
  std::size_t num_clients = 100;
  std::size_t num_mediators = 3;
  std::size_t classes_per_client = 2;
  PartitionScheme partition = PartitionScheme::kSort;
  double dirichlet_alpha = 0.5;
  std::size_t clusters = 0;  // 0: one cluster per mediator
  double mediator_fraction = 1.0;
  double kl_smoothing = 1e-6;
  bool random_reference = false;

  HyperParams hyper;
  double delta = 1e-5;
  bool per_example_clip = false;
  bool broadcast_every_round = true;
  std::size_t fixed_rank = 0;
  std::size_t local_epochs = 1;
  std::size_t hidden_dim = 64;

  // Run.
  std::uint64_t seed = 0;
  std::size_t rounds = 50;
  Method method = Method::kHfl;
  double target_accuracy = 0.7;
  std::size_t window = 10;
  std::filesystem::path out;
  std::filesystem::path model_out;
  bool wall_clock = false;
};

std::vector<std::string> config_keys();

// Sets one key from its textual value. Throws ConfigError for unknown keys
// and malformed values; relative paths are joined onto base_dir.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value,
                      const std::filesystem::path& base_dir = {});

// Parses the file grammar above on top of the defaults (no validation).
ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir = {});

// Range checks; throws ConfigError naming the key, value and allowed range.
void validate_config(const ExperimentConfig& cfg);

// File (optional, empty path skips it) plus ordered overrides, validated.
ExperimentConfig parse_config(const std::filesystem::path& file,
                              const std::vector<std::pair<std::string, std::string>>& overrides);

}  // namespace hfl
