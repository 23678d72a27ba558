// Copyright 2026 The doatrack Authors
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

#ifndef DOATRACK_CONFIG_HPP
#define DOATRACK_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "doatrack/dprtf.hpp"
#include "doatrack/localizer.hpp"
#include "doatrack/stft.hpp"
#include "doatrack/tracker.hpp"

namespace doatrack {

struct SteeringConfig {
  int directions = 72;
  double feature_magnitude = 0.5;
  std::filesystem::path hrtf_table;  // empty: free-field model from the geometry
};

struct Config {
  StftParams stft;
  DprtfParams dprtf;
  SteeringConfig steering;
  LocalizerParams localizer;
  TrackerParams tracker;
  int frames_per_step = 4;  // STFT frames per tracker step
  double success_threshold_deg = 15.0;
  std::uint64_t seed = 1;
  int threads = 1;

  /// Fills the derived tracker time step from the STFT hop.
  void resolve(double sample_rate);
};

nlohmann::json to_json(const Config& config);

/// Strict parse: unknown keys and wrong types raise InputError naming the field.
Config config_from_json(const nlohmann::json& j, const std::string& where = "config");

Config load_config(const std::filesystem::path& path);

/// Applies "a.b.c" = value overrides; values are parsed as JSON, falling back
/// to a plain string.
Config apply_overrides(const Config& config, const std::vector<std::pair<std::string, std::string>>& overrides);

}  // namespace doatrack

#endif  // DOATRACK_CONFIG_HPP
