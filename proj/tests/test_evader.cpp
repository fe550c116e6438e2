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

#include "fixtures.hpp"

#include "terl/evader_apf.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace terl;
using doctest::Approx;

TEST_CASE("flee direction")
{
  WorldConfig cfg;

  WorldState w;
  w.robots = {fixtures::pursuer(0, -4, 0), fixtures::evader(1, 0, 0, 1.0)};
  Vec2 d = apf_direction(w.robots[1], w, cfg);
  CHECK(d.x == Approx(1.0));
  CHECK(std::abs(d.y) < 1e-15);

  // symmetric north/south threats cancel; the tie goes to the heading side
  w.robots = {fixtures::pursuer(0, 0, 4), fixtures::pursuer(1, 0, -4), fixtures::evader(2, 0, 0, 0.2)};
  d = apf_direction(w.robots[2], w, cfg);
  CHECK(std::abs(std::abs(d.x) - 1.0) < 1e-12);
  CHECK(d.x > 0.0);
  w.robots[2].heading = kPi - 0.2;
  d = apf_direction(w.robots[2], w, cfg);
  CHECK(d.x < 0.0);

  // nothing within the influence radius
  w.robots = {fixtures::pursuer(0, 30, 0), fixtures::evader(1, 0, 0, 0.7)};
  d = apf_direction(w.robots[1], w, cfg);
  CHECK(d.x == Approx(std::cos(0.7)));
  CHECK(d.y == Approx(std::sin(0.7)));

  // inactive pursuers are ignored
  w.robots = {fixtures::pursuer(0, -4, 0), fixtures::evader(1, 0, 0, 0.7)};
  w.robots[0].status = Status::Inactive;
  d = apf_direction(w.robots[1], w, cfg);
  CHECK(d.x == Approx(std::cos(0.7)));

  // the wall pushes inward
  w.robots = {fixtures::evader(0, 48, 0, kPi / 2)};
  d = apf_direction(w.robots[0], w, cfg);
  CHECK(d.x == Approx(-1.0));

  // obstacles repel
  w.robots = {fixtures::evader(0, 0, 0)};
  w.obstacles = {{{0, 3}, 1.0}};
  d = apf_direction(w.robots[0], w, cfg);
  CHECK(d.y == Approx(-1.0));
}

TEST_CASE("flee direction is rotation-equivariant")
{
  WorldConfig cfg;
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial)
  {
    WorldState w;
    const int n = 1 + static_cast<int>(rng.uniform_int(5));
    for (int i = 0; i < n; ++i)
      w.robots.push_back(fixtures::pursuer(i, rng.uniform(-8, 8), rng.uniform(-8, 8)));
    w.robots.push_back(fixtures::evader(n, 0, 0, rng.uniform(-kPi, kPi)));
    w.obstacles.push_back({{rng.uniform(-8, 8), rng.uniform(-8, 8)}, 1.0});
    const Vec2 d = apf_direction(w.robots.back(), w, cfg);

    const double alpha = rng.uniform(-kPi, kPi);
    WorldState r = w;
    for (auto& robot : r.robots)
    {
      robot.position = rotate(robot.position, alpha);
      robot.heading = wrap_angle(robot.heading + alpha);
    }
    for (auto& o : r.obstacles)
      o.center = rotate(o.center, alpha);
    const Vec2 rd = apf_direction(r.robots.back(), r, cfg);
    const Vec2 expect = rotate(d, alpha);
    CHECK(std::abs(rd.x - expect.x) < 1e-9);
    CHECK(std::abs(rd.y - expect.y) < 1e-9);
  }
}

TEST_CASE("discrete action choice")
{
  WorldConfig cfg;
  WorldState w;

  // nothing around: keep heading, speed up
  w.robots = {fixtures::evader(0, 0, 0, 0.4, 1.0)};
  Action a = select_evader_action(w.robots[0], w, cfg);
  CHECK(a.angular_velocity == 0.0);
  CHECK(a.acceleration == 0.4);

  // at the cap: hold speed
  w.robots[0].speed = 3.5;
  a = select_evader_action(w.robots[0], w, cfg);
  CHECK(a.acceleration == 0.0);

  // desired bearing 0.3 rad to the left
  w.robots = {fixtures::pursuer(0, -4 * std::cos(0.3), -4 * std::sin(0.3)), fixtures::evader(1, 0, 0, 0.0, 1.0)};
  a = select_evader_action(w.robots[1], w, cfg);
  CHECK(a.angular_velocity == kPi / 6);

  // threat ahead: desired bearing behind, decelerate
  w.robots = {fixtures::pursuer(0, 4, 0.1), fixtures::evader(1, 0, 0, 0.0, 2.0)};
  a = select_evader_action(w.robots[1], w, cfg);
  CHECK(a.acceleration == -0.4);

  // the result is always inside the discrete sets
  Rng rng(4);
  for (int i = 0; i < 200; ++i)
  {
    w.robots = {fixtures::pursuer(0, rng.uniform(-10, 10), rng.uniform(-10, 10)),
                fixtures::evader(1, rng.uniform(-45, 45), rng.uniform(-45, 45), rng.uniform(-kPi, kPi),
                                 rng.uniform(0, 3.5))};
    a = select_evader_action(w.robots[1], w, cfg);
    CHECK(std::count(cfg.evader_accelerations.begin(), cfg.evader_accelerations.end(), a.acceleration) == 1);
    CHECK(std::count(cfg.evader_angular_velocities.begin(), cfg.evader_angular_velocities.end(),
                     a.angular_velocity) == 1);
    const Action again = select_evader_action(w.robots[1], w, cfg);
    CHECK(again.acceleration == a.acceleration);
    CHECK(again.angular_velocity == a.angular_velocity);
  }
}

TEST_CASE("actions for every active evader")
{
  WorldConfig cfg;
  WorldState w;
  w.robots = {fixtures::pursuer(0, 0, 0), fixtures::evader(1, 10, 0), fixtures::evader(2, -10, 0),
              fixtures::evader(3, 0, 10)};
  w.robots[3].status = Status::Encircled;
  const auto m = evader_actions(w, cfg);
  CHECK(m.size() == 2);
  CHECK(m.count(1) == 1);
  CHECK(m.count(2) == 1);
}
