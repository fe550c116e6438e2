/*
 * Copyright (C) 2026 The terl-lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
*/

#pragma once

// JSON configuration files. Each section's keys are exactly the field names
// of the corresponding struct; unknown keys and wrong types are ConfigError.
//
// {
//   "world":      { "arena_half_extent": 50.0, ..., "apf": { "gain_pursuer": 1.0, ... } },
//   "policy":     { "latent_dim": 64, "variant": "terl", "caps": { "team": 5, ... }, ... },
//   "train":      { "total_steps": 200000, "curriculum": [ { "begin_million": 0, ... } ] },
//   "scenarios":  [ { "name": "small-1", "pursuers": 11, ... } ]
// }

#include "terl/harness.hpp"
#include "terl/policy.hpp"
#include "terl/training.hpp"
#include "terl/world.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace terl {

struct LabConfig
{
  WorldConfig world;
  PolicyConfig policy;
  TrainConfig train;
  std::vector<ScenarioSpec> scenarios = scenario_catalog();
};

nlohmann::json to_json(const WorldConfig& cfg);
nlohmann::json to_json(const PolicyConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const ScenarioSpec& s);
nlohmann::json to_json(const LabConfig& cfg);

/// Each reader starts from the defaults and overrides the keys present.
WorldConfig world_config_from_json(const nlohmann::json& j, WorldConfig base = {});
PolicyConfig policy_config_from_json(const nlohmann::json& j, PolicyConfig base = {});
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
ScenarioSpec scenario_from_json(const nlohmann::json& j);

LabConfig lab_config_from_json(const nlohmann::json& j);
LabConfig parse_lab_config(const std::string& text);
LabConfig load_lab_config(const std::string& path);

} // namespace terl
