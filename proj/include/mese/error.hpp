// Copyright 2026 The MESE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MESE_ERROR_HPP_
#define MESE_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mese {

// Tensor or vector dimensions disagree with what a network/mask expects.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller-supplied value is outside the operation's domain.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Optimization produced a non-finite quantity.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::ptrdiff_t layer = -1)
      : std::runtime_error(what), layer_(layer) {}

  // Index of the offending layer, or -1 when not layer-specific.
  std::ptrdiff_t layer() const noexcept { return layer_; }

 private:
  std::ptrdiff_t layer_;
};

// Invalid environment/run configuration. `field` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// API misuse, e.g. stepping a finished episode.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace mese

#endif  // MESE_ERROR_HPP_
