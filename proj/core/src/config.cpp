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

#include "hfl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "hfl/error.hpp"

namespace hfl {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
    throw ConfigError(key, value, "a real number");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
    throw ConfigError(key, value, "a non-negative integer");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key, value, "true | false");
}

std::filesystem::path to_path(const std::string& value, const std::filesystem::path& base) {
  std::filesystem::path p(value);
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&,
                                  const std::filesystem::path&)>;

template <typename T>
Setter size_field(T ExperimentConfig::*field) {
  return [field](ExperimentConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) {
    c.*field = static_cast<T>(to_u64(k, v));
  };
}

Setter real_field(double ExperimentConfig::*field) {
  return [field](ExperimentConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) {
    c.*field = to_double(k, v);
  };
}

Setter bool_field(bool ExperimentConfig::*field) {
  return [field](ExperimentConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) {
    c.*field = to_bool(k, v);
  };
}

Setter path_field(std::filesystem::path ExperimentConfig::*field) {
  return [field](ExperimentConfig& c, const std::string&, const std::string& v, const std::filesystem::path& base) {
    c.*field = to_path(v, base);
  };
}

Setter hyper_real(double HyperParams::*field) {
  return [field](ExperimentConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) {
    c.hyper.*field = to_double(k, v);
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"dataset_format",
       [](ExperimentConfig& c, const std::string&, const std::string& v, const std::filesystem::path&) {
         c.dataset_format = parse_dataset_format(v);
       }},
      {"train_path", path_field(&ExperimentConfig::train_path)},
      {"train_labels_path", path_field(&ExperimentConfig::train_labels_path)},
      {"test_path", path_field(&ExperimentConfig::test_path)},
      {"test_labels_path", path_field(&ExperimentConfig::test_labels_path)},
      {"test_fraction", real_field(&ExperimentConfig::test_fraction)},
      {"num_classes", size_field(&ExperimentConfig::num_classes)},
      {"num_clients", size_field(&ExperimentConfig::num_clients)},
      {"num_mediators", size_field(&ExperimentConfig::num_mediators)},
      {"classes_per_client", size_field(&ExperimentConfig::classes_per_client)},
      {"partition",
       [](ExperimentConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) {
         if (v == "sort") {
           c.partition = PartitionScheme::kSort;
         } else if (v == "dirichlet") {
           c.partition = PartitionScheme::kDirichlet;
         } else {
           throw ConfigError(k, v, "sort | dirichlet");
         }
       }},
      {"dirichlet_alpha", real_field(&ExperimentConfig::dirichlet_alpha)},
      {"clusters", size_field(&ExperimentConfig::clusters)},
      {"mediator_fraction", real_field(&ExperimentConfig::mediator_fraction)},
      {"kl_smoothing", real_field(&ExperimentConfig::kl_smoothing)},
      {"reference_distribution",
       [](ExperimentConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) {
         if (v == "uniform") {
           c.random_reference = false;
         } else if (v == "random") {
           c.random_reference = true;
         } else {
           throw ConfigError(k, v, "uniform | random");
         }
       }},
      {"learning_rate", hyper_real(&HyperParams::learning_rate)},
      {"client_sampling", hyper_real(&HyperParams::client_sampling)},
      {"example_sampling", hyper_real(&HyperParams::example_sampling)},
      {"compression_ratio", hyper_real(&HyperParams::compression_ratio)},
      {"deep_iterations",
       [](ExperimentConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) {
         c.hyper.deep_iterations = to_u64(k, v);
       }},
      {"clip_norm", hyper_real(&HyperParams::clip_norm)},
      {"noise_level", hyper_real(&HyperParams::noise_level)},
      {"delta", real_field(&ExperimentConfig::delta)},
      {"per_example_clip", bool_field(&ExperimentConfig::per_example_clip)},
      {"broadcast_every_round", bool_field(&ExperimentConfig::broadcast_every_round)},
      {"fixed_rank", size_field(&ExperimentConfig::fixed_rank)},
      {"local_epochs", size_field(&ExperimentConfig::local_epochs)},
      {"hidden_dim", size_field(&ExperimentConfig::hidden_dim)},
      {"seed", size_field(&ExperimentConfig::seed)},
      {"rounds", size_field(&ExperimentConfig::rounds)},
      {"method",
       [](ExperimentConfig& c, const std::string&, const std::string& v, const std::filesystem::path&) {
         c.method = parse_method(v);
       }},
      {"target_accuracy", real_field(&ExperimentConfig::target_accuracy)},
      {"window", size_field(&ExperimentConfig::window)},
      {"out", path_field(&ExperimentConfig::out)},
      {"model_out", path_field(&ExperimentConfig::model_out)},
      {"wall_clock", bool_field(&ExperimentConfig::wall_clock)},
  };
  return table;
}

}  // namespace

Method parse_method(const std::string& name) {
  if (name == "hfl") return Method::kHfl;
  if (name == "hfl-nocorrector") return Method::kHflNoCorrector;
  if (name == "fedavg") return Method::kFedAvg;
  throw ConfigError("method", name, "hfl | hfl-nocorrector | fedavg");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::kHfl:
      return "hfl";
    case Method::kHflNoCorrector:
      return "hfl-nocorrector";
    case Method::kFedAvg:
      return "fedavg";
  }
  return "?";
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value,
                      const std::filesystem::path& base_dir) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError(key, "unknown key", 0);
  it->second(cfg, key, value, base_dir);
}

ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno), "expected key = value, got '" + line + "'", 0);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError(key, "set twice (line " + std::to_string(lineno) + ")", 0);
    set_config_value(cfg, key, value, base_dir);
  }
  return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
  Federation fed{cfg.num_clients, cfg.num_mediators, cfg.hyper, cfg.mediator_fraction};
  fed.validate();
  if (cfg.train_path.empty()) {
    throw ConfigError("train_path", "missing dataset path (required for dataset_format=" +
                                        to_string(cfg.dataset_format) + ")",
                      0);
  }
  if (cfg.dataset_format == DatasetFormat::kIdxUbyte) {
    if (cfg.train_labels_path.empty()) throw ConfigError("train_labels_path", "missing idx label file path", 0);
    if (!cfg.test_path.empty() && cfg.test_labels_path.empty()) {
      throw ConfigError("test_labels_path", "missing idx label file path", 0);
    }
  }
  if (cfg.test_path.empty() && (!(cfg.test_fraction > 0.0) || !(cfg.test_fraction < 1.0))) {
    throw ConfigError("test_fraction", to_text(cfg.test_fraction), "0 < test_fraction < 1");
  }
  if (cfg.classes_per_client < 1) throw ConfigError("classes_per_client", "0", ">= 1");
  if (cfg.partition == PartitionScheme::kDirichlet && !(cfg.dirichlet_alpha > 0.0)) {
    throw ConfigError("dirichlet_alpha", to_text(cfg.dirichlet_alpha), "> 0");
  }
  if (cfg.clusters > cfg.num_clients) {
    throw ConfigError("clusters", std::to_string(cfg.clusters), "0 <= K <= num_clients");
  }
  if (!(cfg.kl_smoothing > 0.0)) throw ConfigError("kl_smoothing", to_text(cfg.kl_smoothing), "> 0");
  if (!(cfg.delta > 0.0) || !(cfg.delta < 1.0)) throw ConfigError("delta", to_text(cfg.delta), "0 < delta < 1");
  if (cfg.local_epochs < 1) throw ConfigError("local_epochs", "0", ">= 1");
  if (cfg.hidden_dim < 1) throw ConfigError("hidden_dim", "0", ">= 1");
  if (cfg.rounds < 1) throw ConfigError("rounds", "0", ">= 1");
  if (cfg.window < 1) throw ConfigError("window", "0", ">= 1");
  if (!(cfg.target_accuracy >= 0.0) || cfg.target_accuracy > 1.0) {
    throw ConfigError("target_accuracy", to_text(cfg.target_accuracy), "[0, 1]");
  }
}

ExperimentConfig parse_config(const std::filesystem::path& file,
                              const std::vector<std::pair<std::string, std::string>>& overrides) {
  ExperimentConfig cfg;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw ConfigError("config", "cannot read " + file.string(), 0);
    std::ostringstream text;
    text << in.rdbuf();
    cfg = parse_config_text(text.str(), file.parent_path());
  }
  for (const auto& [key, value] : overrides) set_config_value(cfg, key, value);
  validate_config(cfg);
  return cfg;
}

}  // namespace hfl
