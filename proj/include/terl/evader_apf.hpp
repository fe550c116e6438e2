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

#include "terl/world.hpp"

namespace terl {

/// Unit flee direction for an evader from inverse-square repulsion by
/// pursuers, obstacles and the arena boundary within the influence radius.
Vec2 apf_direction(const RobotState& evader, const WorldState& world, const WorldConfig& cfg);

/// Discrete evader action steering toward apf_direction.
Action select_evader_action(
  const RobotState& evader, const WorldState& world, const WorldConfig& cfg);

/// Actions for every active evader.
ActionMap evader_actions(const WorldState& world, const WorldConfig& cfg);

} // namespace terl
