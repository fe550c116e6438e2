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

#include "terl/perception.hpp"

#include <algorithm>
#include <limits>
#include <tuple>

namespace terl {

int EntityBlock::count() const
{
  return static_cast<int>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

std::pair<Vec2, Vec2> to_ego_frame(const RobotState& observer, Vec2 point, Vec2 velocity)
{
  return {rotate(point - observer.position, -observer.heading), rotate(velocity, -observer.heading)};
}

std::pair<Vec2, Vec2> from_ego_frame(const RobotState& observer, Vec2 point, Vec2 velocity)
{
  return {rotate(point, observer.heading) + observer.position, rotate(velocity, observer.heading)};
}

int pursuit_status(const RobotState& robot, const WorldState& world, const WorldConfig& cfg)
{
  const double threshold = 3.0 * cfg.d_encircle;
  for (const auto& e : world.robots)
  {
    if (e.role != Role::Evader || e.status == Status::Encircled)
      continue;
    if ((e.position - robot.position).norm() <= threshold)
      return 1;
  }
  return 0;
}

double nearest_obstacle_distance(
  const RobotState& robot, const std::vector<Obstacle>& obstacles, const WorldConfig& cfg)
{
  double best = cfg.r_percept;
  bool found = false;
  for (const auto& o : obstacles)
  {
    if ((o.center - robot.position).norm() > cfg.r_percept)
      continue;
    const double d = surface_distance(robot, o);
    best = found ? std::min(best, d) : d;
    found = true;
  }
  return best;
}

double heading_error(const RobotState& observer, const RobotState& evader)
{
  return wrap_angle(evader.heading - bearing(observer.position, evader.position));
}

namespace {

struct Candidate
{
  double distance;
  int key; // robot id or obstacle index, used as tie-break
  std::vector<double> values;
};

void fill_block(EntityBlock& block, std::vector<Candidate>& candidates)
{
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.distance, a.key) < std::tie(b.distance, b.key);
  });
  const int n = std::min<int>(block.capacity, static_cast<int>(candidates.size()));
  for (int i = 0; i < n; ++i)
  {
    std::copy(candidates[i].values.begin(), candidates[i].values.end(), block.row(i).begin());
    block.mask[i] = 1;
  }
}

} // namespace

ObservationBundle assemble_observation(
  const RobotState& pursuer,
  const WorldState& world,
  const WorldConfig& cfg,
  const ObservationCaps& caps)
{
  ObservationBundle obs(caps);

  const auto [ego_p, ego_v] = to_ego_frame(pursuer, pursuer.position, pursuer.velocity());
  obs.ego = {ego_v.x, ego_v.y, nearest_obstacle_distance(pursuer, world.obstacles, cfg),
             static_cast<double>(pursuit_status(pursuer, world, cfg))};

  std::vector<Candidate> team;
  std::vector<Candidate> evaders;
  for (const auto& r : world.robots)
  {
    if (r.id == pursuer.id || !r.active())
      continue;
    const double d = (r.position - pursuer.position).norm();
    const auto [p, v] = to_ego_frame(pursuer, r.position, r.velocity());
    const double theta = wrap_angle(std::atan2(p.y, p.x));
    if (r.role == Role::Pursuer)
    {
      if (d > cfg.r_percept)
        continue;
      team.push_back({d, r.id, {p.x, p.y, v.x, v.y, d, theta,
                                static_cast<double>(pursuit_status(r, world, cfg))}});
    }
    else
    {
      evaders.push_back({d, r.id, {p.x, p.y, v.x, v.y, d, theta, heading_error(pursuer, r)}});
    }
  }

  std::vector<Candidate> obstacles;
  for (std::size_t i = 0; i < world.obstacles.size(); ++i)
  {
    const auto& o = world.obstacles[i];
    const double d = (o.center - pursuer.position).norm();
    if (d > cfg.r_percept)
      continue;
    const auto [p, v] = to_ego_frame(pursuer, o.center, {});
    obstacles.push_back(
      {d, static_cast<int>(i), {p.x, p.y, o.radius, d, wrap_angle(std::atan2(p.y, p.x))}});
  }

  fill_block(obs.team, team);
  fill_block(obs.evaders, evaders);
  fill_block(obs.obstacles, obstacles);
  return obs;
}

} // namespace terl
