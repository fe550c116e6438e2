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

#include <map>

namespace terl {

/// Reward constants. Every branch value of the per-step reward lives here.
namespace reward_constants {
inline constexpr double kCollision = -80.0;
inline constexpr double kDanger = -5.0;
inline constexpr double kGuidance = 5.0;
inline constexpr double kGuidanceDecay = 0.05;
inline constexpr double kCrowding = -10.0;
inline constexpr double kCooperation = 5.0;
inline constexpr double kCooperationSlope = 0.3;
inline constexpr double kImbalance = -10.0;
inline constexpr double kBoundary = -5.0;
inline constexpr double kCompletionScale = 120.0;
inline constexpr double kTime = -1.0;
inline constexpr double kRelatedRadiusFactor = 3.0;
} // namespace reward_constants

struct RewardBreakdown
{
  double r_d1 = 0.0;
  double r_d2_sum = 0.0;
  double r_coop = 0.0;
  double r_boundary = 0.0;
  double r_completion = 0.0;
  double r_time = 0.0;
  double total = 0.0;

  double sum_of_parts() const
  {
    return r_d1 + r_d2_sum + r_coop + r_boundary + r_completion + r_time;
  }
};

/// R_d1 branch for a minimum surface distance.
double collision_guidance(double d_min, double d_safe);

/// R_d2 branch for a single evader at surface distance d_e.
double evader_guidance(double d_e, double d_safe, double d_encircle);

/// Cooperation payment for each of the P pursuers near one evader.
double cooperation_reward(int nearby_pursuers);

struct SafetyGuidance
{
  double r_d1 = 0.0;
  double r_d2_sum = 0.0;
};

/// Distance-based safety and guidance terms for one pursuer against
/// everything it observes (teammates and obstacles within r_percept, all
/// non-encircled evaders).
SafetyGuidance safety_guidance(
  const RobotState& pursuer, const WorldState& world, const WorldConfig& cfg);

std::map<int, double> cooperation(const WorldState& world, const WorldConfig& cfg);

std::map<int, double> boundary_penalty(const StepEvents& events);

/// 120 * (2 pi / n_k) * exp(-sigma). Throws std::invalid_argument for n_k < 3.
double completion(int n_k, double sigma);

/// Population standard deviation.
double population_stddev(const std::vector<double>& values);

/// Rewards for every pursuer that was active in world_before.
std::map<int, RewardBreakdown> step_rewards(
  const WorldState& world_before,
  const WorldState& world_after,
  const StepEvents& events,
  const WorldConfig& cfg);

} // namespace terl
