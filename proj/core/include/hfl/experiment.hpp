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

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hfl/config.hpp"
#include "hfl/orchestrator.hpp"

namespace hfl {

// Everything derived from the config before the first round: data, client
// partition, signatures, mediator assignment and the initial model. Shared
// by all methods so that they see the same partition.
struct ExperimentSetup {
  std::shared_ptr<const Dataset> train;
  std::shared_ptr<const Dataset> test;
  TrainingData data;
  std::vector<ClientSignature> signatures;
  std::uint64_t partition_hash = 0;
  DistributionGap gap;
  SplitModel initial_model;
};

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg);

struct ExperimentResult {
  Method method = Method::kHfl;
  std::vector<RoundMetrics> series;
  std::uint64_t partition_hash = 0;
  double final_window_accuracy = 0.0;
  std::optional<Overhead> overhead;
  double final_epsilon = 0.0;
  std::uint64_t model_sync_scalars = 0;
  // Mean over uploads of transmitted / (d * n_c); 0 for FedAVG.
  double mean_compression = 0.0;
  Network final_model;
};

ExperimentResult simulate(const ExperimentConfig& cfg, const ExperimentSetup& setup, std::size_t workers = 1);

// prepare + simulate, then writes cfg.out (metrics CSV), its summary sidecar
// and, if set, cfg.model_out.
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t workers = 1);

// <out> with its extension replaced by .summary.json.
std::filesystem::path summary_path(const std::filesystem::path& out);
std::string summary_json(const ExperimentConfig& cfg, const ExperimentSetup& setup, const ExperimentResult& result);

// Layer list plus parameters of the stitched shallow+deep model, as JSON.
void export_model(const Network& model, const std::filesystem::path& path);

// HFL_WORKERS, defaulting to 1.
std::size_t workers_from_env();

}  // namespace hfl
