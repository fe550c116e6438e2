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

#include <cmath>

namespace fixtures {

inline terl::RobotState robot(int id, terl::Role role, double x, double y, double heading = 0.0,
                              double speed = 0.0)
{
  terl::RobotState r;
  r.id = id;
  r.role = role;
  r.position = {x, y};
  r.heading = heading;
  r.speed = speed;
  r.radius = 0.5;
  return r;
}

inline terl::RobotState pursuer(int id, double x, double y, double heading = 0.0, double speed = 0.0)
{
  return robot(id, terl::Role::Pursuer, x, y, heading, speed);
}

inline terl::RobotState evader(int id, double x, double y, double heading = 0.0, double speed = 0.0)
{
  return robot(id, terl::Role::Evader, x, y, heading, speed);
}

/// Pursuers at the given bearings (radians) and radius around (cx, cy),
/// ids 0..n-1, followed by one evader at the center with id n.
inline terl::WorldState ring(double cx, double cy, double radius, std::initializer_list<double> bearings)
{
  terl::WorldState w;
  int id = 0;
  for (double b : bearings)
    w.robots.push_back(pursuer(id++, cx + radius * std::cos(b), cy + radius * std::sin(b)));
  w.robots.push_back(evader(id, cx, cy));
  return w;
}

/// Zero actions for every active robot of a role.
inline terl::ActionMap idle(const terl::WorldState& w, terl::Role role)
{
  terl::ActionMap m;
  for (const auto& r : w.robots)
    if (r.role == role && r.active())
      m[r.id] = {};
  return m;
}

} // namespace fixtures
