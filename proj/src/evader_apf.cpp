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

#include "terl/evader_apf.hpp"

#include <algorithm>
#include <limits>
#include <cmath>

namespace terl {

namespace {

constexpr double kMinRange = 0.1;
constexpr double kCancellationTolerance = 1e-9;

struct ForceSum
{
  Vec2 total;
  double magnitude_sum = 0.0;
  Vec2 strongest;
  double strongest_magnitude = 0.0;

  void add(Vec2 f)
  {
    total += f;
    const double m = f.norm();
    magnitude_sum += m;
    if (m > strongest_magnitude)
    {
      strongest_magnitude = m;
      strongest = f;
    }
  }
};

} // namespace

Vec2 apf_direction(const RobotState& evader, const WorldState& world, const WorldConfig& cfg)
{
  const ApfConfig& apf = cfg.apf;
  ForceSum forces;

  for (const auto& p : world.robots)
  {
    if (p.role != Role::Pursuer || !p.active())
      continue;
    const Vec2 away = evader.position - p.position;
    const double d = away.norm();
    if (d > apf.influence_radius || d == 0.0)
      continue;
    const double r = std::max(d, kMinRange);
    forces.add(away * (apf.gain_pursuer / (r * r * d)));
  }

  for (const auto& o : world.obstacles)
  {
    const Vec2 away = evader.position - o.center;
    const double d = away.norm();
    const double surface = d - o.radius - evader.radius;
    if (surface > apf.influence_radius || d == 0.0)
      continue;
    const double r = std::max(surface, kMinRange);
    forces.add(away * (apf.gain_obstacle / (r * r * d)));
  }

  // Walls push inward, growing as the evader approaches (or passes) them.
  const double h = cfg.arena_half_extent;
  const Vec2 pos = evader.position;
  const struct
  {
    double distance;
    Vec2 inward;
  } walls[] = {{h - pos.x, {-1.0, 0.0}}, {h + pos.x, {1.0, 0.0}},
               {h - pos.y, {0.0, -1.0}}, {h + pos.y, {0.0, 1.0}}};
  for (const auto& w : walls)
  {
    if (w.distance > apf.influence_radius)
      continue;
    const double r = std::max(w.distance, kMinRange);
    forces.add(w.inward * (apf.gain_boundary / (r * r)));
  }

  const Vec2 heading_dir = unit_from_heading(evader.heading);
  if (forces.magnitude_sum == 0.0)
    return heading_dir;

  const double net = forces.total.norm();
  if (net <= kCancellationTolerance * forces.magnitude_sum)
  {
    // Repulsors cancel: flee along the perpendicular of the dominant
    // force axis, on the side of the current heading.
    const Vec2 axis = forces.strongest * (1.0 / forces.strongest_magnitude);
    const Vec2 perp{-axis.y, axis.x};
    return perp.dot(heading_dir) >= 0.0 ? perp : perp * -1.0;
  }
  return forces.total * (1.0 / net);
}

Action select_evader_action(
  const RobotState& evader, const WorldState& world, const WorldConfig& cfg)
{
  const Vec2 dir = apf_direction(evader, world, cfg);
  const double desired = std::atan2(dir.y, dir.x);

  double best_omega = 0.0;
  double best_err = std::numeric_limits<double>::infinity();
  for (double omega : cfg.evader_angular_velocities)
  {
    const double err = std::abs(wrap_angle(desired - (evader.heading + omega * cfg.dt)));
    // ties go to the smaller turn rate, then to the lower value
    const bool better =
      err < best_err - 1e-12 ||
      (std::abs(err - best_err) <= 1e-12 &&
       (std::abs(omega) < std::abs(best_omega) ||
        (std::abs(omega) == std::abs(best_omega) && omega < best_omega)));
    if (better)
    {
      best_err = err;
      best_omega = omega;
    }
  }

  const auto& accels = cfg.evader_accelerations;
  const auto [lo, hi] = std::minmax_element(accels.begin(), accels.end());
  double accel = 0.0;
  const double heading_err = std::abs(wrap_angle(desired - evader.heading));
  if (heading_err > kPi / 2.0)
  {
    accel = *lo;
  }
  else if (evader.speed < cfg.v_max_evader)
  {
    accel = *hi;
  }
  else
  {
    // At the cap: hold speed with the smallest-magnitude acceleration.
    accel = *std::min_element(accels.begin(), accels.end(), [](double a, double b) {
      return std::abs(a) < std::abs(b);
    });
  }
  return {accel, best_omega};
}

ActionMap evader_actions(const WorldState& world, const WorldConfig& cfg)
{
  ActionMap out;
  for (const auto& r : world.robots)
    if (r.role == Role::Evader && r.active())
      out[r.id] = select_evader_action(r, world, cfg);
  return out;
}

} // namespace terl
