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

#include "hfl/experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "hfl/error.hpp"
#include "hfl/metrics.hpp"
#include "json.hpp"

namespace hfl {

namespace {

// Sub-seeds of the experiment seed.
enum SetupStream : std::uint64_t {
  kHoldout = 10,
  kPartition = 11,
  kReference = 12,
  kClustering = 13,
  kAssignment = 14,
  kModelInit = 15,
  kRounds = 16,
};

std::uint64_t setup_seed(const ExperimentConfig& cfg, SetupStream s) { return derive_seed(cfg.seed, {s}); }

std::string layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kDense:
      return "dense";
    case LayerKind::kRelu:
      return "relu";
    case LayerKind::kFlatten:
      return "flatten";
    case LayerKind::kConvSmall:
      return "conv_small";
  }
  return "?";
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cli", "cannot write " + path.string());
  out << text;
  if (!out.flush()) throw Error("cli", "failed writing " + path.string());
}

}  // namespace

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  ExperimentSetup setup;

  Dataset train = load_dataset({cfg.dataset_format, cfg.train_path, cfg.train_labels_path, cfg.num_classes});
  Dataset test;
  if (cfg.test_path.empty()) {
    TrainTestSplit split = holdout_split(train, cfg.test_fraction, setup_seed(cfg, kHoldout));
    train = std::move(split.train);
    test = std::move(split.test);
  } else {
    test = load_dataset({cfg.dataset_format, cfg.test_path, cfg.test_labels_path, train.num_classes});
    if (test.examples.rows() != train.examples.rows()) {
      throw DataError("test examples have " + std::to_string(test.examples.rows()) + " features, train has " +
                      std::to_string(train.examples.rows()));
    }
    test.num_classes = train.num_classes = std::max(train.num_classes, test.num_classes);
  }
  const std::size_t classes = train.num_classes;

  std::vector<ClientShard> shards =
      cfg.partition == PartitionScheme::kSort
          ? partition_noniid(train, cfg.num_clients, cfg.classes_per_client, setup_seed(cfg, kPartition))
          : partition_dirichlet(train, cfg.num_clients, cfg.dirichlet_alpha, setup_seed(cfg, kPartition));

  const std::vector<double> reference =
      reference_distribution(classes, cfg.random_reference, setup_seed(cfg, kReference));
  for (const ClientShard& s : shards) setup.signatures.push_back(client_signature(s, reference, cfg.kl_smoothing));
  const std::size_t k = cfg.clusters > 0 ? cfg.clusters : std::min(cfg.num_mediators, cfg.num_clients);
  const std::vector<std::size_t> labels = cluster_clients(setup.signatures, k, setup_seed(cfg, kClustering));
  MediatorAssignment assignment = assign_to_mediators(labels, cfg.num_mediators, setup_seed(cfg, kAssignment));

  setup.partition_hash = partition_hash(shards);
  setup.gap = distribution_gap(assignment, shards, classes, cfg.kl_smoothing);
  setup.initial_model =
      make_default_split_model(train.examples.rows(), cfg.hidden_dim, classes, setup_seed(cfg, kModelInit));

  setup.train = std::make_shared<const Dataset>(std::move(train));
  setup.test = std::make_shared<const Dataset>(std::move(test));
  setup.data = TrainingData{setup.train.get(), setup.test.get(), std::move(shards), std::move(assignment)};
  return setup;
}

ExperimentResult simulate(const ExperimentConfig& cfg, const ExperimentSetup& setup, std::size_t workers) {
  ExperimentResult result;
  result.method = cfg.method;
  result.partition_hash = setup.partition_hash;
  const std::uint64_t seed = setup_seed(cfg, kRounds);
  result.series.reserve(cfg.rounds);

  if (cfg.method == Method::kFedAvg) {
    FedAvgOptions opts{cfg.hyper.learning_rate, cfg.hyper.client_sampling, cfg.hyper.example_sampling,
                       cfg.local_epochs, workers, cfg.wall_clock};
    FedAvgState state{setup.initial_model.merged(), 0};
    result.series = run_fedavg(state, setup.data, opts, cfg.rounds, seed);
    result.final_model = state.model;
  } else {
    Federation fed{cfg.num_clients, cfg.num_mediators, cfg.hyper, cfg.mediator_fraction};
    GlobalState state = initialize_state(setup.initial_model, fed, cfg.delta);
    RoundOptions opts;
    opts.use_corrector = cfg.method == Method::kHfl;
    opts.per_example_clip = cfg.per_example_clip;
    opts.broadcast_every_round = cfg.broadcast_every_round;
    opts.fixed_rank = cfg.fixed_rank;
    opts.workers = workers;
    opts.wall_clock = cfg.wall_clock;
    double ratio_sum = 0.0;
    std::size_t uploads = 0;
    for (std::size_t r = 0; r < cfg.rounds; ++r) {
      RoundMetrics m = run_round(state, setup.data, opts, seed);
      result.model_sync_scalars += m.model_sync_scalars;
      for (const UplinkRecord& u : m.uplinks) {
        ratio_sum += static_cast<double>(transmitted_scalar_count(u.rows, u.n_c, u.k)) /
                     static_cast<double>(u.rows * u.n_c);
        ++uploads;
      }
      result.series.push_back(std::move(m));
    }
    result.mean_compression = uploads > 0 ? ratio_sum / static_cast<double>(uploads) : 0.0;
    result.final_model = state.global.merged();
  }

  result.final_window_accuracy = windowed_accuracy(result.series, cfg.window);
  result.overhead = overhead_to_target(result.series, cfg.target_accuracy, cfg.window);
  result.final_epsilon = result.series.back().epsilon;
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t workers) {
  const ExperimentSetup setup = prepare_experiment(cfg);
  ExperimentResult result = simulate(cfg, setup, workers);
  if (!cfg.out.empty()) {
    if (cfg.out.has_parent_path()) std::filesystem::create_directories(cfg.out.parent_path());
    emit_metrics(result.series, cfg.out);
    write_text(summary_path(cfg.out), summary_json(cfg, setup, result));
  }
  if (!cfg.model_out.empty()) export_model(result.final_model, cfg.model_out);
  return result;
}

std::filesystem::path summary_path(const std::filesystem::path& out) {
  std::filesystem::path p = out;
  p.replace_extension(".summary.json");
  return p;
}

std::string summary_json(const ExperimentConfig& cfg, const ExperimentSetup& setup, const ExperimentResult& result) {
  nlohmann::ordered_json j;
  j["method"] = to_string(result.method);
  j["seed"] = cfg.seed;
  j["rounds"] = result.series.size();
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(result.partition_hash));
  j["partition_hash"] = hash;
  j["window"] = cfg.window;
  j["final_window_accuracy"] = result.final_window_accuracy;
  j["target_accuracy"] = cfg.target_accuracy;
  if (result.overhead) {
    j["overhead_to_target"] = {{"round", result.overhead->round}, {"scalars", result.overhead->scalars}};
  } else {
    j["overhead_to_target"] = nullptr;
  }
  j["final_epsilon"] = finite_or_null(result.final_epsilon);
  j["delta"] = cfg.delta;
  j["model_sync_scalars"] = result.model_sync_scalars;
  j["mean_compression"] = result.mean_compression;
  j["distribution_gap"] = {{"mediator_kl", setup.gap.mediator_kl},
                           {"weighted_mediator_kl", setup.gap.weighted_mediator_kl},
                           {"mean_client_kl", setup.gap.mean_client_kl}};
  return j.dump(2) + "\n";
}

void export_model(const Network& model, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["layers"] = nlohmann::json::array();
  for (const LayerSpec& l : model.layers()) {
    nlohmann::ordered_json layer{{"kind", layer_kind_name(l.kind)}, {"in", l.in_dim}, {"out", l.out_dim}};
    if (l.kind == LayerKind::kConvSmall) {
      layer["conv"] = {{"in_channels", l.conv.in_channels}, {"height", l.conv.height},
                       {"width", l.conv.width},             {"out_channels", l.conv.out_channels},
                       {"kernel", l.conv.kernel}};
    }
    j["layers"].push_back(layer);
  }
  j["params"] = nlohmann::json::array();
  for (const Matrix& p : model.params()) {
    const auto values = p.data();
    j["params"].push_back({{"rows", p.rows()}, {"cols", p.cols()}, {"data", std::vector<double>(values.begin(), values.end())}});
  }
  write_text(path, j.dump() + "\n");
}

std::size_t workers_from_env() {
  const char* env = std::getenv("HFL_WORKERS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError("HFL_WORKERS", env, "integer >= 1");
  return static_cast<std::size_t>(v);
}

}  // namespace hfl
