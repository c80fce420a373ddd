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

#include <charconv>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace hfl {

// Shortest round-trip text for a double, so messages echo "0.6" not "0.600000".
inline std::string to_text(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Base of every error raised by the simulator. what() carries the full
// message; module() names the subsystem that raised it so the CLI can
// attribute failures.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& module, const std::string& message, std::size_t iterations)
      : Error(module, message + " after " + std::to_string(iterations) + " sweeps"),
        iterations_(iterations) {}

  std::size_t iterations() const noexcept { return iterations_; }

 private:
  std::size_t iterations_;
};

// Malformed input file. offset is the byte position where parsing failed
// (for text formats, the line number is folded into the message instead).
class DataError : public Error {
 public:
  DataError(const std::string& message, std::size_t offset)
      : Error("data", message + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  explicit DataError(const std::string& message) : Error("data", message), offset_(0) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& value, const std::string& allowed)
      : Error("config", "invalid value '" + value + "' for key '" + key + "' (allowed: " +
                            allowed + ")"),
        key_(std::move(key)) {}
  ConfigError(std::string key, const std::string& message, int)
      : Error("config", "key '" + key + "': " + message), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace hfl
