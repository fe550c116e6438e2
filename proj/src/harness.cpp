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

#include "terl/harness.hpp"

#include "terl/evader_apf.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace terl {

using nlohmann::json;

const std::vector<ScenarioSpec>& scenario_catalog()
{
  static const std::vector<ScenarioSpec> catalog = {
    {"small-1", 11, 3, 2, 8},   {"small-2", 15, 4, 4, 8},   {"small-3", 19, 5, 6, 8},
    {"medium-1", 48, 12, 8, 8}, {"medium-2", 51, 13, 8, 8}, {"medium-3", 56, 14, 8, 8},
    {"large-1", 72, 18, 8, 8},  {"large-2", 76, 19, 8, 8},  {"large-3", 80, 20, 8, 8},
    {"CC", 28, 14, 8, 8},
  };
  return catalog;
}

const ScenarioSpec& find_scenario(const std::string& name, const std::vector<ScenarioSpec>& catalog)
{
  for (const auto& s : catalog)
    if (s.name == name)
      return s;
  throw ConfigError("unknown scenario '" + name + "'");
}

WorldConfig scenario_world(const WorldConfig& base, const ScenarioSpec& scenario)
{
  WorldConfig w = base;
  w.num_pursuers = scenario.pursuers;
  w.num_evaders = scenario.evaders;
  w.num_obstacles = scenario.obstacles;
  w.num_vortices = scenario.vortices;
  return w;
}

Metrics compute_metrics(std::span<const TrialRecord> records)
{
  Metrics m;
  m.trials = static_cast<int>(records.size());
  if (records.empty())
    return m;
  int successes = 0;
  long collided = 0;
  long pursuers = 0;
  double time_sum = 0.0;
  for (const auto& r : records)
  {
    successes += r.outcome == Outcome::AllEncircled;
    collided += r.collided;
    pursuers += r.pursuers;
    time_sum += r.travel_time_s;
  }
  const double n = static_cast<double>(records.size());
  m.success_rate = successes / n;
  m.mean_travel_time_s = time_sum / n;
  double var = 0.0;
  for (const auto& r : records)
    var += (r.travel_time_s - m.mean_travel_time_s) * (r.travel_time_s - m.mean_travel_time_s);
  m.std_travel_time_s = std::sqrt(var / n);
  m.collision_ratio = pursuers > 0 ? static_cast<double>(collided) / static_cast<double>(pursuers) : 0.0;
  return m;
}

// Controllers

std::string PolicyController::name() const
{
  return std::string(variant_name(policy_.variant()));
}

std::vector<int> PolicyController::act(std::span<const ObservationBundle* const> observations)
{
  return policy_.select_actions(observations, 0.0, rng_, true);
}

void RandomController::reset(std::uint64_t seed)
{
  rng_ = Rng(derive_seed(seed, 77));
}

std::vector<int> RandomController::act(std::span<const ObservationBundle* const> observations)
{
  std::vector<int> out;
  for (std::size_t i = 0; i < observations.size(); ++i)
    out.push_back(static_cast<int>(rng_.uniform_int(static_cast<std::uint64_t>(num_actions_))));
  return out;
}

std::vector<int> ConstantController::act(std::span<const ObservationBundle* const> observations)
{
  return std::vector<int>(observations.size(), action_);
}

// Episodes

TrialRecord run_episode_from(Controller& controller, WorldState world, const WorldConfig& cfg,
                             std::int64_t cap, const EpisodeSinks& sinks)
{
  TrialRecord rec;
  rec.variant = controller.name();
  rec.pursuers = cfg.num_pursuers;
  if (sinks.trajectory)
    *sinks.trajectory << trajectory_line(world) << '\n';

  std::optional<Outcome> outcome = check_termination(world, cap);
  while (!outcome)
  {
    std::vector<int> ids;
    std::vector<ObservationBundle> observations;
    for (const auto& r : world.robots)
      if (r.role == Role::Pursuer && r.active())
      {
        ids.push_back(r.id);
        observations.push_back(assemble_observation(r, world, cfg, controller.caps()));
      }
    std::vector<const ObservationBundle*> ptrs;
    for (const auto& o : observations)
      ptrs.push_back(&o);
    const auto actions = controller.act(ptrs);
    if (sinks.observations)
      for (std::size_t i = 0; i < ids.size(); ++i)
        *sinks.observations << observation_line(world.t, ids[i], observations[i]) << '\n';

    ActionMap pursuer_actions;
    for (std::size_t i = 0; i < ids.size(); ++i)
      pursuer_actions[ids[i]] = decode_action(actions[i], cfg);
    const ActionMap evader_moves = evader_actions(world, cfg);
    std::optional<WorldState> before;
    if (sinks.rewards)
      before = world;
    const StepEvents events = step(world, pursuer_actions, evader_moves, cfg);
    rec.collided += static_cast<int>(events.collided_pursuer_ids.size());
    if (sinks.rewards)
      for (const auto& [id, r] : step_rewards(*before, world, events, cfg))
        *sinks.rewards << reward_line(before->t, id, r) << '\n';
    if (sinks.trajectory)
      *sinks.trajectory << trajectory_line(world) << '\n';
    outcome = check_termination(world, cap);
  }
  rec.outcome = *outcome;
  rec.steps = world.t;
  rec.travel_time_s = static_cast<double>(world.t) * cfg.dt;
  return rec;
}

TrialRecord run_episode(Controller& controller, const WorldConfig& base, const ScenarioSpec& scenario,
                        std::uint64_t seed, const EpisodeSinks& sinks)
{
  const WorldConfig cfg = scenario_world(base, scenario);
  controller.reset(seed);
  TrialRecord rec = run_episode_from(controller, init_episode(cfg, seed), cfg, scenario.episode_cap, sinks);
  rec.scenario = scenario.name;
  rec.seed = seed;
  return rec;
}

Metrics evaluate(Controller& controller, const WorldConfig& base, const ScenarioSpec& scenario,
                 std::uint64_t base_seed, std::vector<TrialRecord>* records, const EpisodeSinks& sinks)
{
  if (scenario.trials < 1)
    throw ConfigError("evaluation needs at least one trial");
  std::vector<TrialRecord> local;
  for (int i = 0; i < scenario.trials; ++i)
    local.push_back(run_episode(controller, base, scenario, base_seed + static_cast<std::uint64_t>(i), sinks));
  const Metrics m = compute_metrics(local);
  if (records)
    records->insert(records->end(), local.begin(), local.end());
  return m;
}

// Result files

std::optional<ResultFormat> parse_result_format(const std::string& s)
{
  if (s == "csv")
    return ResultFormat::Csv;
  if (s == "jsonl" || s == "json-lines")
    return ResultFormat::JsonLines;
  return std::nullopt;
}

namespace {

constexpr const char* kCsvHeader = "scenario,variant,seed,outcome,travel_time_s,collided,pursuers";

std::string format_double(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep)
{
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep))
    out.push_back(cur);
  if (!line.empty() && line.back() == sep)
    out.emplace_back();
  return out;
}

Outcome parse_outcome(const std::string& s)
{
  const auto o = outcome_from_string(s);
  if (!o)
    throw std::runtime_error("unknown outcome '" + s + "'");
  return *o;
}

} // namespace

std::string format_results(std::vector<TrialRecord> records, ResultFormat format)
{
  std::sort(records.begin(), records.end(), [](const TrialRecord& a, const TrialRecord& b) {
    return std::tie(a.scenario, a.variant, a.seed) < std::tie(b.scenario, b.variant, b.seed);
  });
  std::ostringstream out;
  if (format == ResultFormat::Csv)
  {
    out << kCsvHeader << '\n';
    for (const auto& r : records)
      out << r.scenario << ',' << r.variant << ',' << r.seed << ',' << to_string(r.outcome) << ','
          << format_double(r.travel_time_s) << ',' << r.collided << ',' << r.pursuers << '\n';
    return out.str();
  }
  for (const auto& r : records)
  {
    const json j = {{"scenario", r.scenario},       {"variant", r.variant},
                    {"seed", r.seed},               {"outcome", to_string(r.outcome)},
                    {"steps", r.steps},             {"travel_time_s", r.travel_time_s},
                    {"collided", r.collided},       {"pursuers", r.pursuers}};
    out << j.dump() << '\n';
  }
  return out.str();
}

std::vector<TrialRecord> parse_results(const std::string& text, ResultFormat format)
{
  std::vector<TrialRecord> records;
  std::istringstream in(text);
  std::string line;
  if (format == ResultFormat::Csv)
  {
    if (!std::getline(in, line) || line != kCsvHeader)
      throw std::runtime_error("results CSV has an unexpected header");
    while (std::getline(in, line))
    {
      if (line.empty())
        continue;
      const auto f = split(line, ',');
      if (f.size() != 7)
        throw std::runtime_error("results CSV row has " + std::to_string(f.size()) + " fields");
      TrialRecord r;
      r.scenario = f[0];
      r.variant = f[1];
      r.seed = std::stoull(f[2]);
      r.outcome = parse_outcome(f[3]);
      r.travel_time_s = std::stod(f[4]);
      r.collided = std::stoi(f[5]);
      r.pursuers = std::stoi(f[6]);
      records.push_back(std::move(r));
    }
    return records;
  }
  while (std::getline(in, line))
  {
    if (line.empty())
      continue;
    const json j = json::parse(line);
    TrialRecord r;
    r.scenario = j.at("scenario").get<std::string>();
    r.variant = j.at("variant").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.outcome = parse_outcome(j.at("outcome").get<std::string>());
    r.steps = j.at("steps").get<std::int64_t>();
    r.travel_time_s = j.at("travel_time_s").get<double>();
    r.collided = j.at("collided").get<int>();
    r.pursuers = j.at("pursuers").get<int>();
    records.push_back(std::move(r));
  }
  return records;
}

void export_results(const std::vector<TrialRecord>& records, const std::string& path, ResultFormat format)
{
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot write results to '" + path + "'");
  out << format_results(records, format);
  if (!out)
    throw std::runtime_error("failed writing results to '" + path + "'");
}

std::string metrics_json(const Metrics& m)
{
  const json j = {{"trials", m.trials},
                  {"success_rate", m.success_rate},
                  {"travel_time_mean_s", m.mean_travel_time_s},
                  {"travel_time_std_s", m.std_travel_time_s},
                  {"collision_ratio", m.collision_ratio},
                  {"travel_time_averaging", "all_episodes"}};
  return j.dump();
}

// Dumps

std::string trajectory_line(const WorldState& world)
{
  json robots = json::array();
  for (const auto& r : world.robots)
    robots.push_back({{"id", r.id},
                      {"role", to_string(r.role)},
                      {"status", to_string(r.status)},
                      {"x", r.position.x},
                      {"y", r.position.y},
                      {"heading", r.heading},
                      {"speed", r.speed}});
  return json{{"t", world.t}, {"robots", robots}}.dump();
}

namespace {

json block_json(const EntityBlock& b, std::initializer_list<const char*> names)
{
  json rows = json::array();
  for (int i = 0; i < b.capacity; ++i)
  {
    if (!b.mask[i])
      continue;
    json row;
    int c = 0;
    for (const char* name : names)
      row[name] = b.row(i)[c++];
    rows.push_back(row);
  }
  return rows;
}

} // namespace

std::string observation_line(std::int64_t t, int pursuer_id, const ObservationBundle& obs)
{
  const json j = {
    {"t", t},
    {"pursuer", pursuer_id},
    {"ego",
     {{"vx", obs.ego[0]}, {"vy", obs.ego[1]}, {"d_nearest", obs.ego[2]}, {"pursuit_status", obs.ego[3]}}},
    {"team", block_json(obs.team, {"px", "py", "vx", "vy", "d", "theta", "pursuit_status"})},
    {"evaders", block_json(obs.evaders, {"px", "py", "vx", "vy", "d", "theta", "heading_error"})},
    {"obstacles", block_json(obs.obstacles, {"px", "py", "radius", "d", "theta"})},
  };
  return j.dump();
}

std::string reward_line(std::int64_t t, int pursuer_id, const RewardBreakdown& r)
{
  const json j = {{"t", t},
                  {"pursuer", pursuer_id},
                  {"r_d1", r.r_d1},
                  {"r_d2_sum", r.r_d2_sum},
                  {"r_coop", r.r_coop},
                  {"r_boundary", r.r_boundary},
                  {"r_completion", r.r_completion},
                  {"r_time", r.r_time},
                  {"total", r.total}};
  return j.dump();
}

std::vector<TrajectoryFrame> parse_trajectory(const std::string& text)
{
  std::vector<TrajectoryFrame> frames;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
  {
    if (line.empty())
      continue;
    const json j = json::parse(line);
    TrajectoryFrame f;
    f.t = j.at("t").get<std::int64_t>();
    for (const auto& r : j.at("robots"))
    {
      RobotState s;
      s.id = r.at("id").get<int>();
      const auto role = r.at("role").get<std::string>();
      s.role = role == to_string(Role::Evader) ? Role::Evader : Role::Pursuer;
      const auto status = r.at("status").get<std::string>();
      s.status = status == to_string(Status::Inactive)    ? Status::Inactive
                 : status == to_string(Status::Encircled) ? Status::Encircled
                                                          : Status::Active;
      s.position = {r.at("x").get<double>(), r.at("y").get<double>()};
      s.heading = r.at("heading").get<double>();
      s.speed = r.at("speed").get<double>();
      f.robots.push_back(s);
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

} // namespace terl
