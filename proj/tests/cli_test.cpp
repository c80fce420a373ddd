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

#include <fstream>
#include <sstream>

#include "hfl/config.hpp"
#include "hfl/error.hpp"
#include "hfl/experiment.hpp"
#include "hfl/metrics.hpp"
#include "json.hpp"

namespace hfl {
namespace {

const std::filesystem::path kFixtures = HFL_FIXTURE_DIR;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = std::filesystem::temp_directory_path() /
          ("hfl_cli_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
  }
  void TearDown() override { std::filesystem::remove_all(dir); }
  std::filesystem::path dir;
};

ExperimentConfig synthetic_config(const std::filesystem::path& out) {
  return parse_config({}, {{"dataset_format", "synthetic"},
                           {"train_path", (kFixtures / "synthetic.spec").string()},
                           {"num_clients", "10"},
                           {"num_mediators", "2"},
                           {"classes_per_client", "2"},
                           {"hidden_dim", "8"},
                           {"learning_rate", "0.3"},
                           {"client_sampling", "0.5"},
                           {"example_sampling", "0.5"},
                           {"compression_ratio", "0.4"},
                           {"noise_level", "0.2"},
                           {"rounds", "4"},
                           {"window", "2"},
                           {"out", out.string()}});
}

TEST(ParseConfig, FmnistSettingsParseAndValidate) {
  const ExperimentConfig cfg = parse_config_text(
      "# FMNIST settings\n"
      "dataset_format = idx\n"
      "train_path = images\n"
      "train_labels_path = labels   # trailing comment\n"
      "num_clients = 100\n"
      "num_mediators = 3\n"
      "learning_rate = 0.015\n"
      "classes_per_client = 2\n"
      "deep_iterations = 10\n"
      "clip_norm = 1\n",
      "/data");
  EXPECT_NO_THROW(validate_config(cfg));
  EXPECT_EQ(cfg.num_clients, 100u);
  EXPECT_EQ(cfg.num_mediators, 3u);
  EXPECT_DOUBLE_EQ(cfg.hyper.learning_rate, 0.015);
  EXPECT_EQ(cfg.hyper.deep_iterations, 10u);
  EXPECT_EQ(cfg.train_path, std::filesystem::path("/data/images"));
}

TEST(ParseConfig, CompressionRatioAboveHalfRejected) {
  try {
    parse_config({}, {{"train_path", "x"}, {"train_labels_path", "y"}, {"compression_ratio", "0.6"}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "compression_ratio");
    EXPECT_NE(std::string(e.what()).find("C < 0.5"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("0.6"), std::string::npos) << e.what();
  }
}

TEST(ParseConfig, MissingDatasetPathNamesKey) {
  try {
    parse_config({}, {});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "train_path");
  }
}

TEST(ParseConfig, UnknownKeysMalformedValuesAndDuplicates) {
  EXPECT_THROW(parse_config_text("no_such_key = 1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("rounds = ten\n"), ConfigError);
  EXPECT_THROW(parse_config_text("rounds = 5\nrounds = 6\n"), ConfigError);
  EXPECT_THROW(parse_config_text("just some words\n"), ConfigError);
  EXPECT_THROW(parse_config_text("method = sgd\n"), ConfigError);
  EXPECT_THROW(parse_config_text("per_example_clip = maybe\n"), ConfigError);
}

TEST(ParseConfig, RangeRules) {
  const std::vector<std::pair<std::string, std::string>> base{{"train_path", "x"}, {"train_labels_path", "y"}};
  auto with = [&](const std::string& k, const std::string& v) {
    auto o = base;
    o.emplace_back(k, v);
    return o;
  };
  EXPECT_THROW(parse_config({}, with("client_sampling", "0")), ConfigError);
  EXPECT_THROW(parse_config({}, with("example_sampling", "1.5")), ConfigError);
  EXPECT_THROW(parse_config({}, with("noise_level", "-0.1")), ConfigError);
  EXPECT_THROW(parse_config({}, with("rounds", "0")), ConfigError);
  EXPECT_NO_THROW(parse_config({}, with("client_sampling", "1")));
}

TEST_F(TempDir, FlagsOverrideFile) {
  const auto file = dir / "run.cfg";
  std::ofstream(file) << "dataset_format = csv\ntrain_path = data.csv\nrounds = 5\nseed = 1\n";
  const ExperimentConfig cfg = parse_config(file, {{"rounds", "7"}});
  EXPECT_EQ(cfg.rounds, 7u);
  EXPECT_EQ(cfg.seed, 1u);
  EXPECT_EQ(cfg.train_path, dir / "data.csv");
}

TEST(ConfigKeys, CoverEveryHyperParameter) {
  const auto keys = config_keys();
  for (const char* k : {"learning_rate", "client_sampling", "example_sampling", "compression_ratio", "deep_iterations",
                        "clip_norm", "noise_level", "num_clients", "num_mediators", "delta", "seed", "rounds",
                        "method", "target_accuracy", "out"})
    EXPECT_NE(std::find(keys.begin(), keys.end(), k), keys.end()) << k;
}

TEST_F(TempDir, MetricsRoundTripExactly) {
  std::vector<RoundMetrics> series(3);
  const double acc[] = {0.1, 1.0 / 3.0, 0.7234567890123456};
  for (std::size_t t = 0; t < 3; ++t) {
    series[t].round = t + 1;
    series[t].accuracy = acc[t];
    series[t].uplink_scalars = 100 + t;
    series[t].downlink_scalars = 7 * t;
    series[t].epsilon = t == 2 ? INFINITY : 0.1 * static_cast<double>(t);
  }
  emit_metrics(series, dir / "m.csv");
  const std::vector<MetricsRow> rows = read_metrics(dir / "m.csv");
  EXPECT_EQ(rows, to_rows(series));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[2].cum_uplink, 303u);
  EXPECT_EQ(rows[2].cum_downlink, 21u);
  EXPECT_EQ(rows[1].accuracy, 1.0 / 3.0);
  std::istringstream text(slurp(dir / "m.csv"));
  std::string header;
  std::getline(text, header);
  EXPECT_EQ(header, kMetricsHeader);
}

TEST_F(TempDir, MetricsErrors) {
  EXPECT_THROW(emit_metrics(std::vector<RoundMetrics>{}, dir / "empty.csv"), Error);
  std::vector<RoundMetrics> one(1);
  EXPECT_THROW(emit_metrics(one, dir / "missing" / "sub" / "m.csv"), Error);
  EXPECT_THROW(parse_metrics("round,accuracy\n1,0.5\n"), DataError);
}

TEST_F(TempDir, RunExperimentWritesFilesAndRerunsIdentically) {
  ExperimentConfig cfg = synthetic_config(dir / "hfl.csv");
  const ExperimentResult first = run_experiment(cfg);
  const std::string bytes = slurp(dir / "hfl.csv");
  run_experiment(cfg);
  EXPECT_EQ(slurp(dir / "hfl.csv"), bytes);
  EXPECT_EQ(read_metrics(dir / "hfl.csv").size(), 4u);
  const auto summary = nlohmann::json::parse(slurp(dir / "hfl.summary.json"));
  EXPECT_EQ(summary["method"], "hfl");
  EXPECT_DOUBLE_EQ(summary["final_window_accuracy"].get<double>(), first.final_window_accuracy);
  EXPECT_TRUE(summary.contains("overhead_to_target"));
  EXPECT_GT(summary["final_epsilon"].get<double>(), 0.0);
}

TEST_F(TempDir, MethodsShareThePartition) {
  ExperimentConfig hfl_cfg = synthetic_config(dir / "hfl.csv");
  ExperimentConfig fedavg_cfg = synthetic_config(dir / "fedavg.csv");
  fedavg_cfg.method = Method::kFedAvg;
  run_experiment(hfl_cfg);
  run_experiment(fedavg_cfg);
  const auto a = nlohmann::json::parse(slurp(dir / "hfl.summary.json"));
  const auto b = nlohmann::json::parse(slurp(dir / "fedavg.summary.json"));
  EXPECT_EQ(a["partition_hash"], b["partition_hash"]);
  EXPECT_TRUE(b["final_epsilon"].is_null());
}

TEST_F(TempDir, SingleRoundAndModelExport) {
  ExperimentConfig cfg = synthetic_config(dir / "one.csv");
  cfg.rounds = 1;
  cfg.model_out = dir / "model.json";
  run_experiment(cfg);
  EXPECT_EQ(read_metrics(dir / "one.csv").size(), 1u);
  const auto model = nlohmann::json::parse(slurp(dir / "model.json"));
  EXPECT_EQ(model["layers"].size(), 5u);
  EXPECT_EQ(model["params"].size(), 6u);
}

TEST(RunExperiment, SubModuleErrorsKeepAttribution) {
  ExperimentConfig cfg = synthetic_config({});
  cfg.num_clients = 1000;
  try {
    run_experiment(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.module(), "data");
  }
}

}  // namespace
}  // namespace hfl
