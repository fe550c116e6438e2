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

#include "terl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace terl {

using nlohmann::json;

namespace {

/// Reads known keys out of one JSON object and rejects the rest.
class Fields
{
public:
  Fields(const json& j, std::string section) : j_(j), section_(std::move(section))
  {
    if (!j_.is_object())
      throw ConfigError("'" + section_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out)
  {
    if (!j_.contains(key))
      return;
    seen_.insert(key);
    try
    {
      out = j_.at(key).get<T>();
    }
    catch (const json::exception&)
    {
      throw ConfigError("'" + section_ + "." + key + "' has the wrong type");
    }
  }

  bool has(const char* key)
  {
    if (!j_.contains(key))
      return false;
    seen_.insert(key);
    return true;
  }

  const json& at(const char* key) const { return j_.at(key); }

  void finish() const
  {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key))
        throw ConfigError("unknown key '" + section_ + "." + key + "'");
  }

private:
  const json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

CurriculumStage stage_from_json(const json& j)
{
  CurriculumStage s;
  Fields f(j, "train.curriculum[]");
  f.get("begin_million", s.begin_million);
  f.get("end_million", s.end_million);
  f.get("pursuers", s.pursuers);
  f.get("evaders", s.evaders);
  f.get("obstacles", s.obstacles);
  f.get("vortices", s.vortices);
  f.finish();
  return s;
}

json stage_to_json(const CurriculumStage& s)
{
  return {{"begin_million", s.begin_million}, {"end_million", s.end_million},
          {"pursuers", s.pursuers},           {"evaders", s.evaders},
          {"obstacles", s.obstacles},         {"vortices", s.vortices}};
}

} // namespace

json to_json(const WorldConfig& c)
{
  return {
    {"arena_half_extent", c.arena_half_extent},
    {"dt", c.dt},
    {"d_encircle", c.d_encircle},
    {"d_safe", c.d_safe},
    {"r_percept", c.r_percept},
    {"robot_radius", c.robot_radius},
    {"psi", c.psi},
    {"kappa", c.kappa},
    {"v_max_pursuer", c.v_max_pursuer},
    {"v_max_evader", c.v_max_evader},
    {"pursuer_accelerations", c.pursuer_accelerations},
    {"pursuer_angular_velocities", c.pursuer_angular_velocities},
    {"evader_accelerations", c.evader_accelerations},
    {"evader_angular_velocities", c.evader_angular_velocities},
    {"num_pursuers", c.num_pursuers},
    {"num_evaders", c.num_evaders},
    {"num_obstacles", c.num_obstacles},
    {"num_vortices", c.num_vortices},
    {"obstacle_radius_min", c.obstacle_radius_min},
    {"obstacle_radius_max", c.obstacle_radius_max},
    {"vortex_core_radius_min", c.vortex_core_radius_min},
    {"vortex_core_radius_max", c.vortex_core_radius_max},
    {"vortex_circulation_min", c.vortex_circulation_min},
    {"vortex_circulation_max", c.vortex_circulation_max},
    {"spawn_margin", c.spawn_margin},
    {"spawn_retry_cap", c.spawn_retry_cap},
    {"seed", c.seed},
    {"apf",
     {{"gain_pursuer", c.apf.gain_pursuer},
      {"gain_obstacle", c.apf.gain_obstacle},
      {"gain_boundary", c.apf.gain_boundary},
      {"influence_radius", c.apf.influence_radius}}},
  };
}

WorldConfig world_config_from_json(const json& j, WorldConfig c)
{
  Fields f(j, "world");
  f.get("arena_half_extent", c.arena_half_extent);
  f.get("dt", c.dt);
  f.get("d_encircle", c.d_encircle);
  f.get("d_safe", c.d_safe);
  f.get("r_percept", c.r_percept);
  f.get("robot_radius", c.robot_radius);
  f.get("psi", c.psi);
  f.get("kappa", c.kappa);
  f.get("v_max_pursuer", c.v_max_pursuer);
  f.get("v_max_evader", c.v_max_evader);
  f.get("pursuer_accelerations", c.pursuer_accelerations);
  f.get("pursuer_angular_velocities", c.pursuer_angular_velocities);
  f.get("evader_accelerations", c.evader_accelerations);
  f.get("evader_angular_velocities", c.evader_angular_velocities);
  f.get("num_pursuers", c.num_pursuers);
  f.get("num_evaders", c.num_evaders);
  f.get("num_obstacles", c.num_obstacles);
  f.get("num_vortices", c.num_vortices);
  f.get("obstacle_radius_min", c.obstacle_radius_min);
  f.get("obstacle_radius_max", c.obstacle_radius_max);
  f.get("vortex_core_radius_min", c.vortex_core_radius_min);
  f.get("vortex_core_radius_max", c.vortex_core_radius_max);
  f.get("vortex_circulation_min", c.vortex_circulation_min);
  f.get("vortex_circulation_max", c.vortex_circulation_max);
  f.get("spawn_margin", c.spawn_margin);
  f.get("spawn_retry_cap", c.spawn_retry_cap);
  f.get("seed", c.seed);
  if (f.has("apf"))
  {
    Fields a(f.at("apf"), "world.apf");
    a.get("gain_pursuer", c.apf.gain_pursuer);
    a.get("gain_obstacle", c.apf.gain_obstacle);
    a.get("gain_boundary", c.apf.gain_boundary);
    a.get("influence_radius", c.apf.influence_radius);
    a.finish();
  }
  f.finish();
  c.validate();
  return c;
}

json to_json(const PolicyConfig& c)
{
  return {
    {"latent_dim", c.latent_dim},
    {"heads", c.heads},
    {"relation_layers", c.relation_layers},
    {"quantile_samples", c.quantile_samples},
    {"target_quantile_samples", c.target_quantile_samples},
    {"eval_quantiles", c.eval_quantiles},
    {"quantile_embedding_dim", c.quantile_embedding_dim},
    {"huber_kappa", c.huber_kappa},
    {"target_heads", c.target_heads},
    {"residual", c.residual},
    {"variant", std::string(variant_name(c.variant))},
    {"caps", {{"team", c.caps.team}, {"evaders", c.caps.evaders}, {"obstacles", c.caps.obstacles}}},
    {"num_accelerations", c.num_accelerations},
    {"num_angular_velocities", c.num_angular_velocities},
  };
}

PolicyConfig policy_config_from_json(const json& j, PolicyConfig c)
{
  Fields f(j, "policy");
  f.get("latent_dim", c.latent_dim);
  f.get("heads", c.heads);
  f.get("relation_layers", c.relation_layers);
  f.get("quantile_samples", c.quantile_samples);
  f.get("target_quantile_samples", c.target_quantile_samples);
  f.get("eval_quantiles", c.eval_quantiles);
  f.get("quantile_embedding_dim", c.quantile_embedding_dim);
  f.get("huber_kappa", c.huber_kappa);
  f.get("target_heads", c.target_heads);
  f.get("residual", c.residual);
  std::string variant(variant_name(c.variant));
  f.get("variant", variant);
  const auto parsed = parse_variant(variant);
  if (!parsed)
    throw ConfigError("unknown variant '" + variant + "'");
  c.variant = *parsed;
  if (f.has("caps"))
  {
    Fields caps(f.at("caps"), "policy.caps");
    caps.get("team", c.caps.team);
    caps.get("evaders", c.caps.evaders);
    caps.get("obstacles", c.caps.obstacles);
    caps.finish();
  }
  f.get("num_accelerations", c.num_accelerations);
  f.get("num_angular_velocities", c.num_angular_velocities);
  f.finish();
  c.validate();
  return c;
}

json to_json(const TrainConfig& c)
{
  json curriculum = json::array();
  for (const auto& s : c.curriculum)
    curriculum.push_back(stage_to_json(s));
  return {
    {"total_steps", c.total_steps},
    {"lr", c.lr},
    {"gamma", c.gamma},
    {"batch_size", c.batch_size},
    {"target_sync_interval", c.target_sync_interval},
    {"epsilon_start", c.epsilon_start},
    {"epsilon_end", c.epsilon_end},
    {"epsilon_decay_steps", c.epsilon_decay_steps},
    {"replay_capacity", c.replay_capacity},
    {"seed", c.seed},
    {"episode_cap", c.episode_cap},
    {"train_frequency", c.train_frequency},
    {"learning_starts", c.learning_starts},
    {"grad_clip", c.grad_clip},
    {"checkpoint_interval", c.checkpoint_interval},
    {"compression", c.compression},
    {"curriculum", curriculum},
  };
}

TrainConfig train_config_from_json(const json& j, TrainConfig c)
{
  Fields f(j, "train");
  f.get("total_steps", c.total_steps);
  f.get("lr", c.lr);
  f.get("gamma", c.gamma);
  f.get("batch_size", c.batch_size);
  f.get("target_sync_interval", c.target_sync_interval);
  f.get("epsilon_start", c.epsilon_start);
  f.get("epsilon_end", c.epsilon_end);
  f.get("epsilon_decay_steps", c.epsilon_decay_steps);
  f.get("replay_capacity", c.replay_capacity);
  f.get("seed", c.seed);
  f.get("episode_cap", c.episode_cap);
  f.get("train_frequency", c.train_frequency);
  f.get("learning_starts", c.learning_starts);
  f.get("grad_clip", c.grad_clip);
  f.get("checkpoint_interval", c.checkpoint_interval);
  f.get("compression", c.compression);
  if (f.has("curriculum"))
  {
    const json& arr = f.at("curriculum");
    if (!arr.is_array())
      throw ConfigError("'train.curriculum' must be an array");
    c.curriculum.clear();
    for (const auto& s : arr)
      c.curriculum.push_back(stage_from_json(s));
  }
  f.finish();
  c.validate();
  return c;
}

json to_json(const ScenarioSpec& s)
{
  return {{"name", s.name},           {"pursuers", s.pursuers},   {"evaders", s.evaders},
          {"obstacles", s.obstacles}, {"vortices", s.vortices},   {"episode_cap", s.episode_cap},
          {"trials", s.trials}};
}

ScenarioSpec scenario_from_json(const json& j)
{
  ScenarioSpec s;
  Fields f(j, "scenarios[]");
  f.get("name", s.name);
  f.get("pursuers", s.pursuers);
  f.get("evaders", s.evaders);
  f.get("obstacles", s.obstacles);
  f.get("vortices", s.vortices);
  f.get("episode_cap", s.episode_cap);
  f.get("trials", s.trials);
  f.finish();
  if (s.name.empty())
    throw ConfigError("scenario needs a name");
  if (s.pursuers < 0 || s.evaders < 0 || s.obstacles < 0 || s.vortices < 0)
    throw ConfigError("scenario '" + s.name + "' has a negative count");
  if (s.episode_cap < 1 || s.trials < 1)
    throw ConfigError("scenario '" + s.name + "' needs episode_cap >= 1 and trials >= 1");
  return s;
}

json to_json(const LabConfig& c)
{
  json scenarios = json::array();
  for (const auto& s : c.scenarios)
    scenarios.push_back(to_json(s));
  return {{"world", to_json(c.world)},
          {"policy", to_json(c.policy)},
          {"train", to_json(c.train)},
          {"scenarios", scenarios}};
}

LabConfig lab_config_from_json(const json& j)
{
  LabConfig c;
  Fields f(j, "config");
  if (f.has("world"))
    c.world = world_config_from_json(f.at("world"));
  if (f.has("policy"))
    c.policy = policy_config_from_json(f.at("policy"));
  if (f.has("train"))
    c.train = train_config_from_json(f.at("train"));
  if (f.has("scenarios"))
  {
    const json& arr = f.at("scenarios");
    if (!arr.is_array())
      throw ConfigError("'scenarios' must be an array");
    c.scenarios.clear();
    for (const auto& s : arr)
      c.scenarios.push_back(scenario_from_json(s));
  }
  f.finish();
  return c;
}

LabConfig parse_lab_config(const std::string& text)
{
  json j;
  try
  {
    j = json::parse(text);
  }
  catch (const json::parse_error& e)
  {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return lab_config_from_json(j);
}

LabConfig load_lab_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_lab_config(ss.str());
}

} // namespace terl
