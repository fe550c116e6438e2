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

#include "terl/geometry.hpp"
#include "terl/rng.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace terl {

/// Raised for invalid or unsatisfiable configurations.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

enum class Role { Pursuer, Evader };
enum class Status { Active, Inactive, Encircled };

const char* to_string(Role role);
const char* to_string(Status status);

/// Rankine vortex. Construct through make_vortex so the core angular
/// velocity stays consistent with circulation and core radius.
struct Vortex
{
  Vec2 center;
  double circulation = 0.0;
  double core_radius = 1.0;
  double core_angular_velocity = 0.0;
};

Vortex make_vortex(Vec2 center, double circulation, double core_radius);

struct Obstacle
{
  Vec2 center;
  double radius = 1.0;
};

struct RobotState
{
  int id = 0;
  Role role = Role::Pursuer;
  Vec2 position;
  double heading = 0.0;
  double speed = 0.0;
  double radius = 0.5;
  Status status = Status::Active;

  bool active() const { return status == Status::Active; }
  Vec2 velocity() const { return unit_from_heading(heading) * speed; }
};

/// Scripted-evader potential field gains.
struct ApfConfig
{
  double gain_pursuer = 1.0;
  double gain_obstacle = 0.6;
  double gain_boundary = 0.8;
  double influence_radius = 12.0;
};

struct WorldConfig
{
  double arena_half_extent = 50.0;
  double dt = 0.5;
  double d_encircle = 5.0;
  double d_safe = 2.0;
  double r_percept = 15.0;
  double robot_radius = 0.5;
  double psi = kPi;
  double kappa = 3.0;
  double v_max_pursuer = 3.0;
  double v_max_evader = 3.5;
  std::vector<double> pursuer_accelerations{-0.4, 0.0, 0.4};
  std::vector<double> pursuer_angular_velocities{-kPi / 6.0, 0.0, kPi / 6.0};
  std::vector<double> evader_accelerations{-0.4, 0.0, 0.4};
  std::vector<double> evader_angular_velocities{
    -kPi / 6.0, -kPi / 12.0, 0.0, kPi / 12.0, kPi / 6.0};
  int num_pursuers = 3;
  int num_evaders = 1;
  int num_obstacles = 0;
  int num_vortices = 4;
  double obstacle_radius_min = 1.0;
  double obstacle_radius_max = 3.0;
  double vortex_core_radius_min = 2.0;
  double vortex_core_radius_max = 6.0;
  double vortex_circulation_min = 10.0;
  double vortex_circulation_max = 40.0;
  double spawn_margin = 2.0;
  int spawn_retry_cap = 10000;
  std::uint64_t seed = 0;
  ApfConfig apf;

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
};

struct WorldState
{
  std::int64_t t = 0;
  std::vector<RobotState> robots;
  std::vector<Obstacle> obstacles;
  std::vector<Vortex> vortices;
  Rng rng;

  const RobotState& robot(int id) const;
  RobotState& robot(int id);
  int count(Role role, Status status) const;
};

struct StepEvents
{
  std::vector<int> collided_pursuer_ids;
  std::vector<int> newly_encircled_evader_ids;
  std::vector<int> out_of_bounds_pursuer_ids;

  bool empty() const
  {
    return collided_pursuer_ids.empty() && newly_encircled_evader_ids.empty() &&
           out_of_bounds_pursuer_ids.empty();
  }
};

struct Action
{
  double acceleration = 0.0;
  double angular_velocity = 0.0;
};

using ActionMap = std::map<int, Action>;

enum class Outcome { AllEncircled, PursuersDepleted, Timeout };
const char* to_string(Outcome outcome);
std::optional<Outcome> outcome_from_string(const std::string& s);

// Flow field

Vec2 vortex_velocity(const Vortex& v, Vec2 p);
Vec2 ambient_flow(const std::vector<Vortex>& vortices, Vec2 p);

// Kinematics and geometry

RobotState integrate_robot(
  const RobotState& r, Action action, Vec2 flow, double dt, double v_max);

double surface_distance(Vec2 center_a, double radius_a, Vec2 center_b, double radius_b);
double surface_distance(const RobotState& a, const RobotState& b);
double surface_distance(const RobotState& a, const Obstacle& b);

/// Sorted-bearing gaps (including the wrap-around gap) of the given
/// positions as seen from `center`. Empty input throws std::invalid_argument.
std::vector<double> angular_gaps(Vec2 center, const std::vector<Vec2>& positions);
std::vector<double> angular_gaps(
  const RobotState& evader, const std::vector<RobotState>& pursuers_in_radius);

/// Active pursuers whose centers are within d_encircle of the evader,
/// in id order.
std::vector<RobotState> pursuers_in_encircle_radius(
  const RobotState& evader, const WorldState& world, const WorldConfig& cfg);

bool is_encircled(const RobotState& evader, const WorldState& world, const WorldConfig& cfg);

/// Advances the world by one timestep. Throws std::invalid_argument when
/// the action maps do not cover exactly the active robots of each role.
StepEvents step(
  WorldState& world,
  const ActionMap& pursuer_actions,
  const ActionMap& evader_actions,
  const WorldConfig& cfg);

std::optional<Outcome> check_termination(const WorldState& world, std::int64_t limit);

/// Random episode initialization; identical (cfg, seed) gives identical
/// states. Pursuers take ids [0, N), evaders [N, N + M).
WorldState init_episode(const WorldConfig& cfg, std::uint64_t seed);

bool out_of_bounds(Vec2 p, const WorldConfig& cfg);

} // namespace terl
