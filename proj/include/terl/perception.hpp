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

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace terl {

enum class EntityKind : int { Ego = 0, Team = 1, Obstacle = 2, Evader = 3 };

inline constexpr int kEgoWidth = 4;
inline constexpr int kTeamWidth = 7;
inline constexpr int kEvaderWidth = 7;
inline constexpr int kObstacleWidth = 5;

/// Fixed-capacity block of same-kind entity vectors with a validity mask.
/// Valid rows occupy the leading slots, sorted by distance; the remaining
/// slots are all-zero with mask 0.
struct EntityBlock
{
  EntityKind kind = EntityKind::Team;
  int width = 0;
  int capacity = 0;
  std::vector<double> values; // capacity * width, row-major
  std::vector<std::uint8_t> mask;

  EntityBlock() = default;
  EntityBlock(EntityKind k, int w, int cap)
    : kind(k), width(w), capacity(cap), values(static_cast<std::size_t>(w * cap), 0.0),
      mask(static_cast<std::size_t>(cap), 0)
  {
  }

  std::span<double> row(int i) { return {values.data() + i * width, static_cast<std::size_t>(width)}; }
  std::span<const double> row(int i) const
  {
    return {values.data() + i * width, static_cast<std::size_t>(width)};
  }
  int count() const;

  bool operator==(const EntityBlock&) const = default;
};

struct ObservationCaps
{
  int team = 5;
  int evaders = 8;
  int obstacles = 5;
};

/// One pursuer's local observation: ego, teammates, evaders, obstacles.
struct ObservationBundle
{
  std::vector<double> ego = std::vector<double>(kEgoWidth, 0.0);
  EntityBlock team;
  EntityBlock evaders;
  EntityBlock obstacles;

  ObservationBundle() : ObservationBundle(ObservationCaps{}) {}
  explicit ObservationBundle(const ObservationCaps& caps)
    : team(EntityKind::Team, kTeamWidth, caps.team),
      evaders(EntityKind::Evader, kEvaderWidth, caps.evaders),
      obstacles(EntityKind::Obstacle, kObstacleWidth, caps.obstacles)
  {
  }

  bool operator==(const ObservationBundle&) const = default;
};

/// Translates then rotates a world point into the observer's frame; the
/// velocity is only rotated.
std::pair<Vec2, Vec2> to_ego_frame(const RobotState& observer, Vec2 point, Vec2 velocity);

/// Inverse of to_ego_frame.
std::pair<Vec2, Vec2> from_ego_frame(const RobotState& observer, Vec2 point, Vec2 velocity);

int pursuit_status(const RobotState& robot, const WorldState& world, const WorldConfig& cfg);

double nearest_obstacle_distance(
  const RobotState& robot, const std::vector<Obstacle>& obstacles, const WorldConfig& cfg);

double heading_error(const RobotState& observer, const RobotState& evader);

ObservationBundle assemble_observation(
  const RobotState& pursuer,
  const WorldState& world,
  const WorldConfig& cfg,
  const ObservationCaps& caps = {});

} // namespace terl
