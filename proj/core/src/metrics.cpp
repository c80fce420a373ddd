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

#include "hfl/metrics.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hfl/error.hpp"

namespace hfl {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  return out;
}

double parse_real(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw DataError("metrics line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

std::uint64_t parse_count(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const std::uint64_t v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0') throw DataError("metrics line " + std::to_string(line) + ": bad count '" + s + "'");
  return v;
}

}  // namespace

std::vector<MetricsRow> to_rows(std::span<const RoundMetrics> series) {
  std::vector<MetricsRow> rows;
  rows.reserve(series.size());
  std::uint64_t up = 0;
  std::uint64_t down = 0;
  for (const RoundMetrics& m : series) {
    up += m.uplink_scalars;
    down += m.downlink_scalars;
    rows.push_back({m.round, m.accuracy, m.uplink_scalars, m.downlink_scalars, up, down, m.epsilon, m.seconds});
  }
  return rows;
}

std::string format_metrics(std::span<const RoundMetrics> series) {
  std::string out = std::string(kMetricsHeader) + "\n";
  char buf[512];
  for (const MetricsRow& r : to_rows(series)) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%.17g,%.17g\n", r.round,
                  r.accuracy, r.uplink_scalars, r.downlink_scalars, r.cum_uplink, r.cum_downlink, r.epsilon,
                  r.seconds);
    out += buf;
  }
  return out;
}

void emit_metrics(std::span<const RoundMetrics> series, const std::filesystem::path& path) {
  if (series.empty()) throw Error("cli", "refusing to write an empty metrics series");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cli", "cannot write metrics file " + path.string());
  out << format_metrics(series);
  if (!out.flush()) throw Error("cli", "failed writing metrics file " + path.string());
}

std::vector<MetricsRow> parse_metrics(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw DataError("metrics file has an unexpected header");
  std::vector<MetricsRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw DataError("metrics line " + std::to_string(lineno) + ": expected 8 fields");
    rows.push_back({static_cast<std::size_t>(parse_count(f[0], lineno)), parse_real(f[1], lineno),
                    parse_count(f[2], lineno), parse_count(f[3], lineno), parse_count(f[4], lineno),
                    parse_count(f[5], lineno), parse_real(f[6], lineno), parse_real(f[7], lineno)});
  }
  return rows;
}

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read metrics file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_metrics(text.str());
}

}  // namespace hfl
