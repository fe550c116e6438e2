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

// Command-line front end. Uses only the C interface of libterl.

#include "terl/terl.h"

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>

namespace {

struct Common
{
  std::string config;
  std::string variant;
  std::optional<std::uint64_t> seed;
};

int report(terl_status status)
{
  if (status == TERL_OK)
    return 0;
  std::fprintf(stderr, "terl: %s: %s\n", terl_status_string(status), terl_last_error());
  return 1;
}

/// Owns a handle and releases it with the matching destroy function.
template <typename T, void (*Destroy)(T*)>
struct Handle
{
  T* ptr = nullptr;
  ~Handle()
  {
    if (ptr)
      Destroy(ptr);
  }
};

using ConfigHandle = Handle<terl_config, terl_config_destroy>;
using PolicyHandle = Handle<terl_policy, terl_policy_destroy>;

terl_status load_config(const Common& c, ConfigHandle& cfg)
{
  terl_status s = c.config.empty() ? terl_config_default(&cfg.ptr) : terl_config_load(c.config.c_str(), &cfg.ptr);
  if (s == TERL_OK && !c.variant.empty())
    s = terl_config_set_variant(cfg.ptr, c.variant.c_str());
  return s;
}

void add_common(CLI::App* cmd, Common& c)
{
  cmd->add_option("--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--variant", c.variant, "policy variant")
    ->check(CLI::IsMember({"terl", "terl-no-re", "terl-no-ts", "iqn", "dqn", "mean", "terl_no_re",
                           "terl_no_ts", "iqn_avgpool", "dqn_avgpool", "mean_embedding"}));
  cmd->add_option("--seed", c.seed, "random seed");
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Multi-robot multi-target encirclement lab"};
  app.require_subcommand(1);

  Common train_opts;
  std::string train_out = "run";
  auto* train = app.add_subcommand("train", "train a policy; writes train_log.csv and checkpoints");
  add_common(train, train_opts);
  train->add_option("--out", train_out, "output directory");

  Common eval_opts;
  std::string scenario, checkpoint, out, format = "csv", trajectories, controller = "policy";
  int episodes = 0;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a scenario; prints metrics JSON");
  add_common(eval, eval_opts);
  eval->add_option("--scenario", scenario, "scenario name")->required();
  eval->add_option("--checkpoint", checkpoint, "policy checkpoint");
  eval->add_option("--episodes", episodes, "number of trials (default: scenario setting)")
    ->check(CLI::NonNegativeNumber);
  eval->add_option("--out", out, "per-trial results file");
  eval->add_option("--format", format, "results format")->check(CLI::IsMember({"csv", "jsonl"}));
  eval->add_option("--trajectories", trajectories, "per-step trajectory dump");
  eval->add_option("--controller", controller, "policy, random or constant")
    ->check(CLI::IsMember({"policy", "random", "constant"}));

  Common replay_opts;
  std::string replay_scenario, replay_checkpoint, replay_trajectories = "trajectory.jsonl", replay_out;
  auto* replay = app.add_subcommand("replay", "run one episode and dump its trajectory");
  add_common(replay, replay_opts);
  replay->add_option("--scenario", replay_scenario, "scenario name")->required();
  replay->add_option("--checkpoint", replay_checkpoint, "policy checkpoint")->required();
  replay->add_option("--trajectories", replay_trajectories, "trajectory dump path");
  replay->add_option("--out", replay_out, "per-step reward log path");

  CLI11_PARSE(app, argc, argv);

  if (train->parsed())
  {
    ConfigHandle cfg;
    if (int rc = report(load_config(train_opts, cfg)))
      return rc;
    if (train_opts.seed)
      terl_config_set_train_seed(cfg.ptr, *train_opts.seed);
    terl_train_summary summary{};
    if (int rc = report(terl_train(cfg.ptr, train_out.c_str(), &summary)))
      return rc;
    std::printf("{\"steps\":%lld,\"episodes\":%lld,\"gradient_steps\":%lld,\"out\":\"%s\"}\n",
                static_cast<long long>(summary.steps), static_cast<long long>(summary.episodes),
                static_cast<long long>(summary.gradient_steps), train_out.c_str());
    return 0;
  }

  if (eval->parsed())
  {
    ConfigHandle cfg;
    if (int rc = report(load_config(eval_opts, cfg)))
      return rc;
    PolicyHandle policy;
    if (controller == "policy")
    {
      if (checkpoint.empty())
      {
        std::fprintf(stderr, "terl: eval needs --checkpoint unless --controller is random or constant\n");
        return 2;
      }
      const char* expected = eval_opts.variant.empty() ? nullptr : eval_opts.variant.c_str();
      if (int rc = report(terl_policy_load(checkpoint.c_str(), expected, &policy.ptr)))
        return rc;
    }
    terl_eval_options options{};
    options.scenario = scenario.c_str();
    options.controller = controller.c_str();
    options.episodes = episodes;
    options.base_seed = eval_opts.seed.value_or(1000);
    options.results_path = out.empty() ? nullptr : out.c_str();
    options.results_format = format.c_str();
    options.trajectory_path = trajectories.empty() ? nullptr : trajectories.c_str();
    terl_metrics m{};
    if (int rc = report(terl_evaluate(cfg.ptr, policy.ptr, &options, &m)))
      return rc;
    std::printf("{\"scenario\":\"%s\",\"controller\":\"%s\",\"variant\":\"%s\",\"trials\":%d,"
                "\"success_rate\":%.17g,\"travel_time_mean_s\":%.17g,\"travel_time_std_s\":%.17g,"
                "\"collision_ratio\":%.17g,\"travel_time_averaging\":\"all_episodes\"}\n",
                scenario.c_str(), controller.c_str(), policy.ptr ? terl_policy_variant(policy.ptr) : "",
                m.trials, m.success_rate, m.travel_time_mean_s, m.travel_time_std_s, m.collision_ratio);
    return 0;
  }

  ConfigHandle cfg;
  if (int rc = report(load_config(replay_opts, cfg)))
    return rc;
  PolicyHandle policy;
  const char* expected = replay_opts.variant.empty() ? nullptr : replay_opts.variant.c_str();
  if (int rc = report(terl_policy_load(replay_checkpoint.c_str(), expected, &policy.ptr)))
    return rc;
  terl_trial trial{};
  if (int rc = report(terl_replay(cfg.ptr, policy.ptr, replay_scenario.c_str(), replay_opts.seed.value_or(1000),
                                  replay_trajectories.c_str(), nullptr,
                                  replay_out.empty() ? nullptr : replay_out.c_str(), &trial)))
    return rc;
  static const char* outcomes[] = {"all_encircled", "pursuers_depleted", "timeout"};
  std::printf("{\"seed\":%llu,\"outcome\":\"%s\",\"steps\":%lld,\"travel_time_s\":%.17g,\"collided\":%d,"
              "\"pursuers\":%d}\n",
              static_cast<unsigned long long>(trial.seed), trial.outcome >= 0 ? outcomes[trial.outcome] : "none",
              static_cast<long long>(trial.steps), trial.travel_time_s, trial.collided, trial.pursuers);
  return 0;
}
