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

#include "terl/perception.hpp"
#include "terl/policy.hpp"
#include "terl/rewards.hpp"
#include "terl/world.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace terl {

struct ScenarioSpec
{
  std::string name;
  int pursuers = 0;
  int evaders = 0;
  int obstacles = 0;
  int vortices = 0;
  std::int64_t episode_cap = 1000;
  int trials = 20;

  bool operator==(const ScenarioSpec&) const = default;
};

/// The ten built-in evaluation scenarios.
const std::vector<ScenarioSpec>& scenario_catalog();
/// Looks a scenario up in the given catalog; unknown names throw ConfigError.
const ScenarioSpec& find_scenario(const std::string& name,
                                  const std::vector<ScenarioSpec>& catalog = scenario_catalog());

/// base with the scenario's robot counts substituted.
WorldConfig scenario_world(const WorldConfig& base, const ScenarioSpec& scenario);

struct TrialRecord
{
  std::string scenario;
  std::string variant;
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::Timeout;
  std::int64_t steps = 0;
  double travel_time_s = 0.0;
  int collided = 0;
  int pursuers = 0;

  bool operator==(const TrialRecord&) const = default;
};

struct Metrics
{
  int trials = 0;
  double success_rate = 0.0;
  double mean_travel_time_s = 0.0; // over all trials
  double std_travel_time_s = 0.0;  // population std over all trials
  double collision_ratio = 0.0;    // collided / pursuers, pooled

  bool operator==(const Metrics&) const = default;
};

Metrics compute_metrics(std::span<const TrialRecord> records);

/// Maps each active pursuer's own observation to a joint action index.
class Controller
{
public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  /// Called once per episode with the episode seed.
  virtual void reset(std::uint64_t seed) { (void)seed; }
  /// Observation capacities the controller expects.
  virtual ObservationCaps caps() const { return {}; }
  virtual std::vector<int> act(std::span<const ObservationBundle* const> observations) = 0;
};

/// Greedy evaluation of a policy (epsilon 0, deterministic tau grid).
class PolicyController : public Controller
{
public:
  explicit PolicyController(const Policy& policy) : policy_(policy) {}
  std::string name() const override;
  ObservationCaps caps() const override { return policy_.config().caps; }
  std::vector<int> act(std::span<const ObservationBundle* const> observations) override;

private:
  const Policy& policy_;
  Rng rng_{0};
};

/// Uniform over the joint action set, reseeded from each episode seed.
class RandomController : public Controller
{
public:
  explicit RandomController(int num_actions) : num_actions_(num_actions) {}
  std::string name() const override { return "random"; }
  void reset(std::uint64_t seed) override;
  std::vector<int> act(std::span<const ObservationBundle* const> observations) override;

private:
  int num_actions_;
  Rng rng_{0};
};

/// Always the same action; index 4 of the 3x3 set is (0, 0), "do nothing".
class ConstantController : public Controller
{
public:
  explicit ConstantController(int action) : action_(action) {}
  std::string name() const override { return "constant"; }
  std::vector<int> act(std::span<const ObservationBundle* const> observations) override;

private:
  int action_;
};

/// Optional per-step dumps.
struct EpisodeSinks
{
  std::ostream* trajectory = nullptr;   // one JSON line per timestep
  std::ostream* observations = nullptr; // one JSON line per pursuer per step
  std::ostream* rewards = nullptr;      // one JSON line per pursuer per step
};

/// Runs one evaluation episode from a freshly initialized world.
TrialRecord run_episode(Controller& controller, const WorldConfig& base, const ScenarioSpec& scenario,
                        std::uint64_t seed, const EpisodeSinks& sinks = {});
/// Runs from a given state (for pre-arranged situations).
TrialRecord run_episode_from(Controller& controller, WorldState world, const WorldConfig& cfg,
                             std::int64_t cap, const EpisodeSinks& sinks = {});

constexpr std::uint64_t kEvalBaseSeed = 1000;

/// Trials use seeds base_seed .. base_seed + trials - 1.
Metrics evaluate(Controller& controller, const WorldConfig& base, const ScenarioSpec& scenario,
                 std::uint64_t base_seed = kEvalBaseSeed, std::vector<TrialRecord>* records = nullptr,
                 const EpisodeSinks& sinks = {});

enum class ResultFormat { Csv, JsonLines };

std::optional<ResultFormat> parse_result_format(const std::string& s);

/// Records sorted by (scenario, variant, seed).
std::string format_results(std::vector<TrialRecord> records, ResultFormat format);
std::vector<TrialRecord> parse_results(const std::string& text, ResultFormat format);
/// Throws std::runtime_error when the path cannot be written.
void export_results(const std::vector<TrialRecord>& records, const std::string& path,
                    ResultFormat format);

std::string metrics_json(const Metrics& m);

// Line formats shared by the dumps.
std::string trajectory_line(const WorldState& world);
std::string observation_line(std::int64_t t, int pursuer_id, const ObservationBundle& obs);
std::string reward_line(std::int64_t t, int pursuer_id, const RewardBreakdown& r);

/// Replays a trajectory dump, checking every line parses; returns the
/// per-line world snapshots as (t, robots).
struct TrajectoryFrame
{
  std::int64_t t = 0;
  std::vector<RobotState> robots;
};
std::vector<TrajectoryFrame> parse_trajectory(const std::string& text);

} // namespace terl
