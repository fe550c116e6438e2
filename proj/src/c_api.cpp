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

#include "terl/terl.h"

#include "terl/checkpoint.hpp"
#include "terl/config.hpp"
#include "terl/evader_apf.hpp"
#include "terl/harness.hpp"
#include "terl/policy.hpp"
#include "terl/training.hpp"

#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <string>

struct terl_config
{
  terl::LabConfig lab;
};

struct terl_policy
{
  terl::Policy policy;
  std::string variant;
};

struct terl_world
{
  terl::WorldConfig cfg;
  terl::WorldState state;
};

namespace {

thread_local std::string last_error;

terl_status fail(terl_status status, const std::string& message)
{
  last_error = message;
  return status;
}

/// Runs f, translating exceptions into status codes.
template <typename F>
terl_status guarded(F&& f)
{
  try
  {
    f();
    last_error.clear();
    return TERL_OK;
  }
  catch (const terl::ConfigError& e)
  {
    return fail(TERL_ERR_CONFIG, e.what());
  }
  catch (const terl::nn::CheckpointError& e)
  {
    return fail(TERL_ERR_CHECKPOINT, e.what());
  }
  catch (const std::invalid_argument& e)
  {
    return fail(TERL_ERR_INVALID_ARGUMENT, e.what());
  }
  catch (const std::out_of_range& e)
  {
    return fail(TERL_ERR_INVALID_ARGUMENT, e.what());
  }
  catch (const std::bad_alloc&)
  {
    return fail(TERL_ERR_INTERNAL, "out of memory");
  }
  catch (const std::exception& e)
  {
    return fail(TERL_ERR_IO, e.what());
  }
}

#define TERL_REQUIRE(cond)                                                                    \
  do                                                                                          \
  {                                                                                           \
    if (!(cond))                                                                              \
      return fail(TERL_ERR_INVALID_ARGUMENT, "invalid argument: " #cond);                     \
  } while (0)

int outcome_code(std::optional<terl::Outcome> o)
{
  if (!o)
    return TERL_OUTCOME_NONE;
  switch (*o)
  {
    case terl::Outcome::AllEncircled:
      return TERL_OUTCOME_ALL_ENCIRCLED;
    case terl::Outcome::PursuersDepleted:
      return TERL_OUTCOME_PURSUERS_DEPLETED;
    case terl::Outcome::Timeout:
      return TERL_OUTCOME_TIMEOUT;
  }
  return TERL_OUTCOME_NONE;
}

std::vector<int> active_pursuer_ids(const terl::WorldState& w)
{
  std::vector<int> ids;
  for (const auto& r : w.robots)
    if (r.role == terl::Role::Pursuer && r.active())
      ids.push_back(r.id);
  return ids;
}

std::ofstream open_output(const char* path)
{
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw std::runtime_error(std::string("cannot write '") + path + "'");
  return out;
}

} // namespace

extern "C" {

const char* terl_version(void)
{
  return "1.0.0";
}

const char* terl_last_error(void)
{
  return last_error.c_str();
}

const char* terl_status_string(terl_status status)
{
  switch (status)
  {
    case TERL_OK:
      return "ok";
    case TERL_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case TERL_ERR_CONFIG:
      return "configuration error";
    case TERL_ERR_IO:
      return "i/o error";
    case TERL_ERR_CHECKPOINT:
      return "checkpoint error";
    case TERL_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

terl_status terl_config_default(terl_config** out)
{
  TERL_REQUIRE(out);
  return guarded([&] { *out = new terl_config{}; });
}

terl_status terl_config_load(const char* path, terl_config** out)
{
  TERL_REQUIRE(path && out);
  return guarded([&] { *out = new terl_config{terl::load_lab_config(path)}; });
}

terl_status terl_config_parse(const char* json_text, terl_config** out)
{
  TERL_REQUIRE(json_text && out);
  return guarded([&] { *out = new terl_config{terl::parse_lab_config(json_text)}; });
}

void terl_config_destroy(terl_config* cfg)
{
  delete cfg;
}

terl_status terl_config_set_variant(terl_config* cfg, const char* variant)
{
  TERL_REQUIRE(cfg && variant);
  const auto v = terl::parse_variant(variant);
  if (!v)
    return fail(TERL_ERR_CONFIG, std::string("unknown variant '") + variant + "'");
  cfg->lab.policy.variant = *v;
  last_error.clear();
  return TERL_OK;
}

terl_status terl_config_set_train_seed(terl_config* cfg, uint64_t seed)
{
  TERL_REQUIRE(cfg);
  cfg->lab.train.seed = seed;
  return TERL_OK;
}

terl_status terl_config_dump(const terl_config* cfg, char* buf, size_t cap, size_t* needed)
{
  TERL_REQUIRE(cfg);
  return guarded([&] {
    const std::string text = terl::to_json(cfg->lab).dump(2);
    if (needed)
      *needed = text.size() + 1;
    if (buf && cap > 0)
    {
      const std::size_t n = std::min(cap - 1, text.size());
      std::memcpy(buf, text.data(), n);
      buf[n] = '\0';
    }
  });
}

terl_status terl_policy_create(const terl_config* cfg, uint64_t seed, terl_policy** out)
{
  TERL_REQUIRE(cfg && out);
  return guarded([&] {
    terl::Policy p(cfg->lab.policy, seed);
    *out = new terl_policy{std::move(p), std::string(terl::variant_name(cfg->lab.policy.variant))};
  });
}

terl_status terl_policy_load(const char* path, const char* expected_variant, terl_policy** out)
{
  TERL_REQUIRE(path && out);
  std::optional<terl::Variant> expected;
  if (expected_variant)
  {
    expected = terl::parse_variant(expected_variant);
    if (!expected)
      return fail(TERL_ERR_CONFIG, std::string("unknown variant '") + expected_variant + "'");
  }
  return guarded([&] {
    terl::Policy p = terl::load_policy(path, expected);
    const std::string name(terl::variant_name(p.variant()));
    *out = new terl_policy{std::move(p), name};
  });
}

terl_status terl_policy_save(const terl_policy* policy, const char* path)
{
  TERL_REQUIRE(policy && path);
  return guarded([&] { terl::save_policy(policy->policy, path); });
}

void terl_policy_destroy(terl_policy* policy)
{
  delete policy;
}

const char* terl_policy_variant(const terl_policy* policy)
{
  return policy ? policy->variant.c_str() : "";
}

int terl_policy_num_actions(const terl_policy* policy)
{
  return policy ? policy->policy.config().num_actions() : 0;
}

terl_status terl_world_create(const terl_config* cfg, const char* scenario, uint64_t seed, terl_world** out)
{
  TERL_REQUIRE(cfg && out);
  return guarded([&] {
    terl::WorldConfig w = cfg->lab.world;
    if (scenario)
      w = terl::scenario_world(w, terl::find_scenario(scenario, cfg->lab.scenarios));
    auto state = terl::init_episode(w, seed);
    *out = new terl_world{w, std::move(state)};
  });
}

void terl_world_destroy(terl_world* world)
{
  delete world;
}

int64_t terl_world_time(const terl_world* world)
{
  return world ? world->state.t : 0;
}

size_t terl_world_robot_count(const terl_world* world)
{
  return world ? world->state.robots.size() : 0;
}

terl_status terl_world_robot(const terl_world* world, size_t index, terl_robot* out)
{
  TERL_REQUIRE(world && out && index < world->state.robots.size());
  const auto& r = world->state.robots[index];
  *out = terl_robot{r.id,
                    r.role == terl::Role::Pursuer ? 0 : 1,
                    static_cast<int>(r.status),
                    r.position.x,
                    r.position.y,
                    r.heading,
                    r.speed};
  return TERL_OK;
}

size_t terl_world_active_pursuers(const terl_world* world)
{
  return world ? active_pursuer_ids(world->state).size() : 0;
}

terl_status terl_world_policy_actions(const terl_world* world, const terl_policy* policy, int* actions,
                                      size_t n)
{
  TERL_REQUIRE(world && policy && (actions || n == 0));
  const auto ids = active_pursuer_ids(world->state);
  if (ids.size() != n)
    return fail(TERL_ERR_INVALID_ARGUMENT, "action buffer length must equal the active pursuer count");
  return guarded([&] {
    terl::PolicyController controller(policy->policy);
    std::vector<terl::ObservationBundle> obs;
    for (int id : ids)
      obs.push_back(terl::assemble_observation(world->state.robot(id), world->state, world->cfg,
                                               policy->policy.config().caps));
    std::vector<const terl::ObservationBundle*> ptrs;
    for (const auto& o : obs)
      ptrs.push_back(&o);
    const auto chosen = controller.act(ptrs);
    std::copy(chosen.begin(), chosen.end(), actions);
  });
}

terl_status terl_world_step(terl_world* world, const int* actions, size_t n)
{
  TERL_REQUIRE(world && (actions || n == 0));
  const auto ids = active_pursuer_ids(world->state);
  if (ids.size() != n)
    return fail(TERL_ERR_INVALID_ARGUMENT, "action count must equal the active pursuer count");
  return guarded([&] {
    terl::ActionMap pursuers;
    for (std::size_t i = 0; i < n; ++i)
      pursuers[ids[i]] = terl::decode_action(actions[i], world->cfg);
    const auto evaders = terl::evader_actions(world->state, world->cfg);
    terl::step(world->state, pursuers, evaders, world->cfg);
  });
}

int terl_world_outcome(const terl_world* world, int64_t cap)
{
  if (!world)
    return TERL_OUTCOME_NONE;
  return outcome_code(terl::check_termination(world->state, cap));
}

terl_status terl_evaluate(const terl_config* cfg, const terl_policy* policy, const terl_eval_options* options,
                          terl_metrics* out)
{
  TERL_REQUIRE(cfg && options && options->scenario && out);
  const std::string controller_name = options->controller ? options->controller : "policy";
  if (controller_name == "policy" && !policy)
    return fail(TERL_ERR_INVALID_ARGUMENT, "the policy controller needs a policy");
  if (options->episodes < 0)
    return fail(TERL_ERR_INVALID_ARGUMENT, "episodes must be non-negative");
  const auto format = terl::parse_result_format(options->results_format ? options->results_format : "csv");
  if (!format)
    return fail(TERL_ERR_INVALID_ARGUMENT, "results format must be csv or jsonl");
  return guarded([&] {
    terl::ScenarioSpec scenario = terl::find_scenario(options->scenario, cfg->lab.scenarios);
    if (options->episodes > 0)
      scenario.trials = options->episodes;

    std::unique_ptr<terl::Controller> controller;
    const int n_actions = static_cast<int>(cfg->lab.world.pursuer_accelerations.size() *
                                           cfg->lab.world.pursuer_angular_velocities.size());
    if (controller_name == "policy")
      controller = std::make_unique<terl::PolicyController>(policy->policy);
    else if (controller_name == "random")
      controller = std::make_unique<terl::RandomController>(n_actions);
    else if (controller_name == "constant")
      controller = std::make_unique<terl::ConstantController>(n_actions / 2);
    else
      throw std::invalid_argument("unknown controller '" + controller_name + "'");

    std::ofstream trajectory;
    terl::EpisodeSinks sinks;
    if (options->trajectory_path)
    {
      trajectory = open_output(options->trajectory_path);
      sinks.trajectory = &trajectory;
    }
    std::vector<terl::TrialRecord> records;
    const terl::Metrics m =
      terl::evaluate(*controller, cfg->lab.world, scenario, options->base_seed, &records, sinks);
    if (options->results_path)
      terl::export_results(records, options->results_path, *format);
    *out = terl_metrics{m.trials, m.success_rate, m.mean_travel_time_s, m.std_travel_time_s, m.collision_ratio};
  });
}

terl_status terl_train(const terl_config* cfg, const char* out_dir, terl_train_summary* out)
{
  TERL_REQUIRE(cfg && out_dir);
  return guarded([&] {
    const auto result = terl::run_training(cfg->lab.policy, cfg->lab.world, cfg->lab.train, out_dir);
    if (out)
      *out = terl_train_summary{result.steps, result.episodes, result.gradient_steps};
  });
}

terl_status terl_replay(const terl_config* cfg, const terl_policy* policy, const char* scenario, uint64_t seed,
                        const char* trajectory_path, const char* observations_path, const char* rewards_path,
                        terl_trial* out)
{
  TERL_REQUIRE(cfg && policy && scenario);
  return guarded([&] {
    const terl::ScenarioSpec& spec = terl::find_scenario(scenario, cfg->lab.scenarios);
    std::ofstream trajectory, observations, rewards;
    terl::EpisodeSinks sinks;
    if (trajectory_path)
    {
      trajectory = open_output(trajectory_path);
      sinks.trajectory = &trajectory;
    }
    if (observations_path)
    {
      observations = open_output(observations_path);
      sinks.observations = &observations;
    }
    if (rewards_path)
    {
      rewards = open_output(rewards_path);
      sinks.rewards = &rewards;
    }
    terl::PolicyController controller(policy->policy);
    const auto rec = terl::run_episode(controller, cfg->lab.world, spec, seed, sinks);
    if (out)
      *out = terl_trial{rec.seed,        outcome_code(rec.outcome), rec.steps, rec.travel_time_s,
                        rec.collided,    rec.pursuers};
  });
}

} // extern "C"
