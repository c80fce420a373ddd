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

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hfl/orchestrator.hpp"

namespace hfl {

inline constexpr const char* kMetricsHeader =
    "round,accuracy,uplink_scalars,downlink_scalars,cum_uplink,cum_downlink,epsilon,seconds";

struct MetricsRow {
  std::size_t round = 0;
  double accuracy = 0.0;
  std::uint64_t uplink_scalars = 0;
  std::uint64_t downlink_scalars = 0;
  std::uint64_t cum_uplink = 0;
  std::uint64_t cum_downlink = 0;
  double epsilon = 0.0;
  double seconds = 0.0;

  bool operator==(const MetricsRow&) const = default;
};

std::vector<MetricsRow> to_rows(std::span<const RoundMetrics> series);

// Reals are printed with 17 significant digits so they reparse exactly.
std::string format_metrics(std::span<const RoundMetrics> series);
void emit_metrics(std::span<const RoundMetrics> series, const std::filesystem::path& path);

std::vector<MetricsRow> parse_metrics(const std::string& text);
std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

}  // namespace hfl
