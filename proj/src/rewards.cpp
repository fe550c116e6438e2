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

#include "terl/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace terl {

using namespace reward_constants;

double collision_guidance(double d_min, double d_safe)
{
  if (d_min < 0.0)
    return kCollision;
  if (d_min < d_safe)
    return kDanger;
  return 0.0;
}

double evader_guidance(double d_e, double d_safe, double d_encircle)
{
  if (d_e < d_safe)
    return 0.0;
  if (d_e <= d_encircle)
    return kGuidance;
  return kGuidance * std::exp(-kGuidanceDecay * (d_e - d_encircle));
}

double cooperation_reward(int nearby_pursuers)
{
  if (nearby_pursuers >= 5)
    return kCrowding;
  if (nearby_pursuers >= 3)
    return kCooperation * std::max(0.0, 1.0 - kCooperationSlope * (nearby_pursuers - 3));
  return 0.0;
}

SafetyGuidance safety_guidance(
  const RobotState& pursuer, const WorldState& world, const WorldConfig& cfg)
{
  double d_min = std::numeric_limits<double>::infinity();
  SafetyGuidance out;
  for (const auto& r : world.robots)
  {
    if (r.id == pursuer.id)
      continue;
    if (r.role == Role::Pursuer)
    {
      if (!r.active() || (r.position - pursuer.position).norm() > cfg.r_percept)
        continue;
      d_min = std::min(d_min, surface_distance(pursuer, r));
    }
    else if (r.status != Status::Encircled)
    {
      const double d_e = surface_distance(pursuer, r);
      d_min = std::min(d_min, d_e);
      out.r_d2_sum += evader_guidance(d_e, cfg.d_safe, cfg.d_encircle);
    }
  }
  for (const auto& o : world.obstacles)
  {
    if ((o.center - pursuer.position).norm() > cfg.r_percept)
      continue;
    d_min = std::min(d_min, surface_distance(pursuer, o));
  }
  out.r_d1 = collision_guidance(d_min, cfg.d_safe);
  return out;
}

std::map<int, double> cooperation(const WorldState& world, const WorldConfig& cfg)
{
  std::map<int, double> out;
  for (const auto& r : world.robots)
    if (r.role == Role::Pursuer && r.active())
      out[r.id] = 0.0;

  const double related = kRelatedRadiusFactor * cfg.d_encircle;
  bool any_sparse = false;
  bool any_crowded = false;
  for (const auto& e : world.robots)
  {
    if (e.role != Role::Evader || e.status == Status::Encircled)
      continue;
    std::vector<int> near;
    for (const auto& p : world.robots)
      if (p.role == Role::Pursuer && p.active() && (p.position - e.position).norm() <= related)
        near.push_back(p.id);
    const int count = static_cast<int>(near.size());
    any_sparse = any_sparse || count < 3;
    any_crowded = any_crowded || count > 5;
    const double payment = cooperation_reward(count);
    for (int id : near)
      out[id] += payment;
  }
  if (any_sparse && any_crowded)
    for (auto& [id, value] : out)
      value += kImbalance;
  return out;
}

std::map<int, double> boundary_penalty(const StepEvents& events)
{
  std::map<int, double> out;
  for (int id : events.out_of_bounds_pursuer_ids)
    out[id] = kBoundary;
  return out;
}

double completion(int n_k, double sigma)
{
  if (n_k < 3)
    throw std::invalid_argument("completion reward requires at least three pursuers");
  return kCompletionScale * (kTwoPi / n_k) * std::exp(-sigma);
}

double population_stddev(const std::vector<double>& values)
{
  if (values.empty())
    return 0.0;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values)
    ss += (v - mean) * (v - mean);
  return std::sqrt(ss / n);
}

std::map<int, RewardBreakdown> step_rewards(
  const WorldState& world_before,
  const WorldState& world_after,
  const StepEvents& events,
  const WorldConfig& cfg)
{
  std::map<int, RewardBreakdown> out;
  for (const auto& r : world_before.robots)
    if (r.role == Role::Pursuer && r.active())
      out[r.id] = RewardBreakdown{};

  for (auto& [id, rb] : out)
  {
    const auto sg = safety_guidance(world_after.robot(id), world_after, cfg);
    rb.r_d1 = sg.r_d1;
    rb.r_d2_sum = sg.r_d2_sum;
    rb.r_time = kTime;
  }
  for (int id : events.collided_pursuer_ids)
    if (auto it = out.find(id); it != out.end())
      it->second.r_d1 = kCollision;

  for (const auto& [id, value] : cooperation(world_after, cfg))
    if (auto it = out.find(id); it != out.end())
      it->second.r_coop = value;

  for (const auto& [id, value] : boundary_penalty(events))
    if (auto it = out.find(id); it != out.end())
      it->second.r_boundary = value;

  for (int evader_id : events.newly_encircled_evader_ids)
  {
    const auto& evader = world_after.robot(evader_id);
    const auto ring = pursuers_in_encircle_radius(evader, world_after, cfg);
    if (ring.size() < 3)
      continue;
    const double sigma = population_stddev(angular_gaps(evader, ring));
    const double payment = completion(static_cast<int>(ring.size()), sigma);
    for (const auto& p : ring)
      if (auto it = out.find(p.id); it != out.end())
        it->second.r_completion += payment;
  }

  for (auto& [id, rb] : out)
    rb.total = rb.sum_of_parts();
  return out;
}

} // namespace terl
