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

#include "terl/world.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace terl {

const char* to_string(Role role)
{
  return role == Role::Pursuer ? "pursuer" : "evader";
}

const char* to_string(Status status)
{
  switch (status)
  {
    case Status::Active:
      return "active";
    case Status::Inactive:
      return "inactive";
    case Status::Encircled:
      return "encircled";
  }
  return "unknown";
}

const char* to_string(Outcome outcome)
{
  switch (outcome)
  {
    case Outcome::AllEncircled:
      return "all_encircled";
    case Outcome::PursuersDepleted:
      return "pursuers_depleted";
    case Outcome::Timeout:
      return "timeout";
  }
  return "unknown";
}

std::optional<Outcome> outcome_from_string(const std::string& s)
{
  if (s == "all_encircled")
    return Outcome::AllEncircled;
  if (s == "pursuers_depleted")
    return Outcome::PursuersDepleted;
  if (s == "timeout")
    return Outcome::Timeout;
  return std::nullopt;
}

Vortex make_vortex(Vec2 center, double circulation, double core_radius)
{
  if (!(core_radius > 0.0))
    throw ConfigError("vortex core radius must be positive");
  return {center, circulation, core_radius, circulation / (kTwoPi * core_radius * core_radius)};
}

void WorldConfig::validate() const
{
  auto require = [](bool ok, const char* what) {
    if (!ok)
      throw ConfigError(what);
  };
  require(dt > 0.0, "dt must be positive");
  require(arena_half_extent > 0.0, "arena_half_extent must be positive");
  require(robot_radius > 0.0, "robot_radius must be positive");
  require(d_safe < d_encircle && d_encircle < r_percept,
          "require d_safe < d_encircle < r_percept");
  require(psi > 0.0 && kappa > 0.0, "psi and kappa must be positive");
  require(v_max_pursuer > 0.0 && v_max_evader > 0.0, "speed caps must be positive");
  require(!pursuer_accelerations.empty() && !pursuer_angular_velocities.empty(),
          "pursuer action sets must be non-empty");
  require(!evader_accelerations.empty() && !evader_angular_velocities.empty(),
          "evader action sets must be non-empty");
  require(num_pursuers >= 0 && num_evaders >= 0 && num_obstacles >= 0 && num_vortices >= 0,
          "entity counts must be non-negative");
  require(obstacle_radius_min > 0.0 && obstacle_radius_min <= obstacle_radius_max,
          "invalid obstacle radius range");
  require(vortex_core_radius_min > 0.0 && vortex_core_radius_min <= vortex_core_radius_max,
          "invalid vortex core radius range");
  require(vortex_circulation_min <= vortex_circulation_max, "invalid circulation range");
  require(spawn_margin >= 0.0, "spawn_margin must be non-negative");
  require(spawn_retry_cap > 0, "spawn_retry_cap must be positive");
  require(apf.gain_pursuer > 0.0 && apf.gain_obstacle > 0.0 && apf.gain_boundary > 0.0,
          "apf gains must be positive");
  require(apf.influence_radius > 0.0, "apf influence_radius must be positive");
}

const RobotState& WorldState::robot(int id) const
{
  if (id >= 0 && static_cast<std::size_t>(id) < robots.size() && robots[id].id == id)
    return robots[id];
  for (const auto& r : robots)
    if (r.id == id)
      return r;
  throw std::out_of_range("no robot with id " + std::to_string(id));
}

RobotState& WorldState::robot(int id)
{
  return const_cast<RobotState&>(static_cast<const WorldState&>(*this).robot(id));
}

int WorldState::count(Role role, Status status) const
{
  return static_cast<int>(std::count_if(robots.begin(), robots.end(), [&](const RobotState& r) {
    return r.role == role && r.status == status;
  }));
}

Vec2 vortex_velocity(const Vortex& v, Vec2 p)
{
  const Vec2 rel = p - v.center;
  const double r = rel.norm();
  if (r == 0.0)
    return {};
  const double strength = v.circulation / kTwoPi;
  const double speed = r <= v.core_radius ? strength * r / (v.core_radius * v.core_radius)
                                          : strength / r;
  // +90 degrees from the radial direction
  return Vec2{-rel.y / r, rel.x / r} * speed;
}

Vec2 ambient_flow(const std::vector<Vortex>& vortices, Vec2 p)
{
  Vec2 total;
  for (const auto& v : vortices)
    total += vortex_velocity(v, p);
  return total;
}

RobotState integrate_robot(
  const RobotState& r, Action action, Vec2 flow, double dt, double v_max)
{
  RobotState next = r;
  next.heading = wrap_angle(r.heading + action.angular_velocity * dt);
  next.speed = std::clamp(r.speed + action.acceleration * dt, 0.0, v_max);
  next.position = r.position + (unit_from_heading(next.heading) * next.speed + flow) * dt;
  return next;
}

double surface_distance(Vec2 center_a, double radius_a, Vec2 center_b, double radius_b)
{
  return (center_a - center_b).norm() - radius_a - radius_b;
}

double surface_distance(const RobotState& a, const RobotState& b)
{
  return surface_distance(a.position, a.radius, b.position, b.radius);
}

double surface_distance(const RobotState& a, const Obstacle& b)
{
  return surface_distance(a.position, a.radius, b.center, b.radius);
}

std::vector<double> angular_gaps(Vec2 center, const std::vector<Vec2>& positions)
{
  if (positions.empty())
    throw std::invalid_argument("angular_gaps requires at least one pursuer");
  std::vector<double> bearings;
  bearings.reserve(positions.size());
  for (const auto& p : positions)
    bearings.push_back(bearing(center, p));
  std::sort(bearings.begin(), bearings.end());
  if (bearings.size() == 1)
    return {kTwoPi};
  std::vector<double> gaps;
  gaps.reserve(bearings.size());
  for (std::size_t i = 1; i < bearings.size(); ++i)
    gaps.push_back(bearings[i] - bearings[i - 1]);
  gaps.push_back(kTwoPi - (bearings.back() - bearings.front()));
  return gaps;
}

std::vector<double> angular_gaps(
  const RobotState& evader, const std::vector<RobotState>& pursuers_in_radius)
{
  std::vector<Vec2> positions;
  positions.reserve(pursuers_in_radius.size());
  for (const auto& p : pursuers_in_radius)
    positions.push_back(p.position);
  return angular_gaps(evader.position, positions);
}

std::vector<RobotState> pursuers_in_encircle_radius(
  const RobotState& evader, const WorldState& world, const WorldConfig& cfg)
{
  std::vector<RobotState> near;
  for (const auto& r : world.robots)
  {
    if (r.role != Role::Pursuer || !r.active())
      continue;
    if ((r.position - evader.position).norm() <= cfg.d_encircle)
      near.push_back(r);
  }
  return near;
}

bool is_encircled(const RobotState& evader, const WorldState& world, const WorldConfig& cfg)
{
  const auto near = pursuers_in_encircle_radius(evader, world, cfg);
  if (near.size() < 3)
    return false;
  const auto gaps = angular_gaps(evader, near);
  const auto [lo, hi] = std::minmax_element(gaps.begin(), gaps.end());
  return *hi <= cfg.psi && *hi <= cfg.kappa * *lo;
}

bool out_of_bounds(Vec2 p, const WorldConfig& cfg)
{
  return std::abs(p.x) > cfg.arena_half_extent || std::abs(p.y) > cfg.arena_half_extent;
}

namespace {

void check_action_ids(const WorldState& world, Role role, const ActionMap& actions)
{
  std::size_t expected = 0;
  for (const auto& r : world.robots)
  {
    if (r.role != role || !r.active())
      continue;
    ++expected;
    if (!actions.contains(r.id))
      throw std::invalid_argument(
        std::string("missing action for active ") + to_string(role) + " " + std::to_string(r.id));
  }
  if (actions.size() != expected)
    throw std::invalid_argument(
      std::string("actions supplied for non-active or unknown ") + to_string(role) + " ids");
}

} // namespace

StepEvents step(
  WorldState& world,
  const ActionMap& pursuer_actions,
  const ActionMap& evader_actions,
  const WorldConfig& cfg)
{
  check_action_ids(world, Role::Pursuer, pursuer_actions);
  check_action_ids(world, Role::Evader, evader_actions);

  // Flow is sampled at pre-step positions for every robot before any moves.
  std::vector<Vec2> flows(world.robots.size());
  for (std::size_t i = 0; i < world.robots.size(); ++i)
    if (world.robots[i].active())
      flows[i] = ambient_flow(world.vortices, world.robots[i].position);

  std::vector<int> moved_pursuers;
  for (std::size_t i = 0; i < world.robots.size(); ++i)
  {
    auto& r = world.robots[i];
    if (!r.active())
      continue;
    if (r.role == Role::Pursuer)
    {
      r = integrate_robot(r, pursuer_actions.at(r.id), flows[i], cfg.dt, cfg.v_max_pursuer);
      moved_pursuers.push_back(r.id);
    }
    else
    {
      r = integrate_robot(r, evader_actions.at(r.id), flows[i], cfg.dt, cfg.v_max_evader);
    }
  }

  StepEvents events;

  std::set<int> collided;
  for (std::size_t i = 0; i < world.robots.size(); ++i)
  {
    const auto& p = world.robots[i];
    if (p.role != Role::Pursuer || !p.active())
      continue;
    for (const auto& o : world.obstacles)
      if (surface_distance(p, o) < 0.0)
        collided.insert(p.id);
    for (std::size_t j = 0; j < world.robots.size(); ++j)
    {
      if (j == i)
        continue;
      const auto& other = world.robots[j];
      if (!other.active())
        continue;
      if (surface_distance(p, other) < 0.0)
      {
        collided.insert(p.id);
        if (other.role == Role::Pursuer)
          collided.insert(other.id);
      }
    }
  }
  for (int id : collided)
  {
    auto& r = world.robot(id);
    r.status = Status::Inactive;
    r.speed = 0.0;
  }
  events.collided_pursuer_ids.assign(collided.begin(), collided.end());

  // All evaders are evaluated against the same post-collision snapshot.
  for (const auto& r : world.robots)
    if (r.role == Role::Evader && r.active() && is_encircled(r, world, cfg))
      events.newly_encircled_evader_ids.push_back(r.id);
  for (int id : events.newly_encircled_evader_ids)
  {
    auto& r = world.robot(id);
    r.status = Status::Encircled;
    r.speed = 0.0;
  }

  for (int id : moved_pursuers)
    if (out_of_bounds(world.robot(id).position, cfg))
      events.out_of_bounds_pursuer_ids.push_back(id);

  ++world.t;
  return events;
}

std::optional<Outcome> check_termination(const WorldState& world, std::int64_t limit)
{
  bool all_encircled = true;
  int active_pursuers = 0;
  for (const auto& r : world.robots)
  {
    if (r.role == Role::Evader && r.status != Status::Encircled)
      all_encircled = false;
    if (r.role == Role::Pursuer && r.active())
      ++active_pursuers;
  }
  if (all_encircled)
    return Outcome::AllEncircled;
  if (active_pursuers < 3)
    return Outcome::PursuersDepleted;
  if (world.t >= limit)
    return Outcome::Timeout;
  return std::nullopt;
}

namespace {

struct Disc
{
  Vec2 center;
  double radius;
};

Vec2 sample_disc_center(Rng& rng, double half_extent, double radius)
{
  const double lim = half_extent - radius;
  return {rng.uniform(-lim, lim), rng.uniform(-lim, lim)};
}

Vec2 place_disc(std::vector<Disc>& placed, Rng& rng, const WorldConfig& cfg, double radius)
{
  if (radius >= cfg.arena_half_extent)
    throw ConfigError("entity does not fit inside the arena");
  for (int attempt = 0; attempt < cfg.spawn_retry_cap; ++attempt)
  {
    const Vec2 c = sample_disc_center(rng, cfg.arena_half_extent, radius);
    const bool clear = std::all_of(placed.begin(), placed.end(), [&](const Disc& d) {
      return surface_distance(c, radius, d.center, d.radius) >= cfg.spawn_margin;
    });
    if (clear)
    {
      placed.push_back({c, radius});
      return c;
    }
  }
  throw ConfigError("entity placement failed after retry cap; arena too crowded");
}

} // namespace

WorldState init_episode(const WorldConfig& cfg, std::uint64_t seed)
{
  cfg.validate();
  WorldState world;
  world.rng = Rng(seed);
  Rng& rng = world.rng;

  std::vector<Disc> placed;
  for (int i = 0; i < cfg.num_obstacles; ++i)
  {
    const double radius = rng.uniform(cfg.obstacle_radius_min, cfg.obstacle_radius_max);
    world.obstacles.push_back({place_disc(placed, rng, cfg, radius), radius});
  }

  const int total = cfg.num_pursuers + cfg.num_evaders;
  for (int id = 0; id < total; ++id)
  {
    RobotState r;
    r.id = id;
    r.role = id < cfg.num_pursuers ? Role::Pursuer : Role::Evader;
    r.radius = cfg.robot_radius;
    r.position = place_disc(placed, rng, cfg, cfg.robot_radius);
    r.heading = wrap_angle(rng.uniform(-kPi, kPi));
    r.speed = 0.0;
    world.robots.push_back(r);
  }

  for (int i = 0; i < cfg.num_vortices; ++i)
  {
    const Vec2 c{rng.uniform(-cfg.arena_half_extent, cfg.arena_half_extent),
                 rng.uniform(-cfg.arena_half_extent, cfg.arena_half_extent)};
    const double r0 = rng.uniform(cfg.vortex_core_radius_min, cfg.vortex_core_radius_max);
    double gamma = rng.uniform(cfg.vortex_circulation_min, cfg.vortex_circulation_max);
    if (rng.uniform() < 0.5)
      gamma = -gamma;
    world.vortices.push_back(make_vortex(c, gamma, r0));
  }
  return world;
}

} // namespace terl
