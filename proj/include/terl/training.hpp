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
#include "terl/rng.hpp"
#include "terl/tensor.hpp"
#include "terl/world.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace terl {

struct Transition
{
  ObservationBundle observation;
  int action = 0;
  double reward = 0.0;
  ObservationBundle next_observation;
  bool done = false;
  int pursuer_id = 0;
  std::int64_t episode_id = 0;
  std::int64_t step = 0; // environment step at which it was recorded
};

/// Fixed-capacity ring of transitions with uniform sampling.
class ReplayBuffer
{
public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t insertions() const { return insertions_; }
  const Transition& at(std::size_t i) const { return items_[i]; }

  /// n distinct transitions chosen uniformly (partial Fisher-Yates).
  /// Requires n <= size().
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::size_t next_ = 0;
  std::uint64_t insertions_ = 0;
};

/// Curriculum row. Bounds are in millions of (uncompressed) steps.
struct CurriculumStage
{
  double begin_million = 0.0;
  double end_million = 0.0;
  int pursuers = 0;
  int evaders = 0;
  int obstacles = 0;
  int vortices = 0;

  bool operator==(const CurriculumStage&) const = default;
};

/// The five-stage 7M-step schedule.
const std::vector<CurriculumStage>& default_curriculum();

/// Stage whose [begin, end) range holds t; t past the end yields the final
/// stage. Negative t throws std::invalid_argument.
CurriculumStage curriculum_stage_at(std::int64_t t);
CurriculumStage curriculum_stage_at(std::int64_t t, const std::vector<CurriculumStage>& schedule);
/// Stage for training step t under compression c: the schedule is stretched
/// so its boundaries fall at c times their nominal step counts.
CurriculumStage compressed_stage_at(std::int64_t t, double compression,
                                    const std::vector<CurriculumStage>& schedule);

/// Throws ConfigError unless stages are ordered, contiguous and start at 0.
void validate_curriculum(const std::vector<CurriculumStage>& schedule);

struct TrainConfig
{
  std::int64_t total_steps = 7'000'000;
  double lr = 5e-4;
  double gamma = 0.99;
  int batch_size = 64;
  std::int64_t target_sync_interval = 1000; // gradient steps
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::int64_t epsilon_decay_steps = -1; // < 0 means 30% of total_steps
  std::size_t replay_capacity = 100'000;
  std::uint64_t seed = 0;
  std::int64_t episode_cap = 3000;
  int train_frequency = 1;     // environment steps per gradient step
  std::int64_t learning_starts = 1000;
  double grad_clip = 10.0;     // global-norm clip, 0 disables
  std::int64_t checkpoint_interval = 0; // 0 disables periodic checkpoints
  double compression = 1.0;
  std::vector<CurriculumStage> curriculum; // empty means default_curriculum()

  void validate() const;
  std::int64_t decay_steps() const;
  double epsilon_at(std::int64_t step) const;
  const std::vector<CurriculumStage>& schedule() const;
};

// Losses

/// Per-transition quantile Huber loss: online quantiles z at fractions taus
/// against target samples y.
double quantile_huber_loss(std::span<const double> z, std::span<const double> taus,
                           std::span<const double> y, double kappa);

/// Batch version on the graph: z is (B*K x 1) sample-major, taus is B x K, y
/// is B x K'. Returns the batch mean.
nn::Var quantile_huber_loss(nn::Graph& g, nn::Var z, const nn::Matrix& taus, const nn::Matrix& y,
                            double kappa);

/// Mean Huber TD error: q is B x 1, y is B x 1.
double huber_td_loss(std::span<const double> q, std::span<const double> y, double kappa);
nn::Var huber_td_loss(nn::Graph& g, nn::Var q, const nn::Matrix& y, double kappa);

/// Bootstrapped targets, B x K' (one column for dqn). Next-state greedy
/// actions come from the target network's mean Q over the same taus.
nn::Matrix td_targets(const Policy& target, std::span<const Transition* const> batch, double gamma,
                      const nn::Matrix& target_taus);

/// Online network, target network, optimizer state and replay.
class Trainer
{
public:
  Trainer(const PolicyConfig& policy_cfg, const TrainConfig& cfg);

  Policy& online() { return online_; }
  const Policy& online() const { return online_; }
  const Policy& target() const { return target_; }
  ReplayBuffer& buffer() { return buffer_; }
  Rng& rng() { return rng_; }
  std::int64_t gradient_steps() const { return gradient_steps_; }
  const TrainConfig& config() const { return cfg_; }

  /// One sampled gradient update; nullopt (and no change) when the buffer
  /// holds fewer than batch_size transitions.
  std::optional<double> train_step();

  /// Loss on a fixed batch with the given fractions, accumulating gradients
  /// when requested. Exposed for tests.
  double batch_loss(std::span<const Transition* const> batch, const nn::Matrix& taus,
                    const nn::Matrix& target_taus, bool accumulate);

  void sync_target();

private:
  TrainConfig cfg_;
  Policy online_;
  Policy target_;
  ReplayBuffer buffer_;
  Rng rng_;
  std::int64_t gradient_steps_ = 0;
};

struct TrainingResult
{
  std::int64_t steps = 0;
  std::int64_t episodes = 0;
  std::int64_t gradient_steps = 0;
  std::string log_path;
  std::string final_checkpoint;
  std::vector<std::string> checkpoints;
};

/// Full loop: curriculum environments, epsilon-greedy rollouts of the shared
/// policy, replay, periodic checkpoints. Writes train_log.csv and
/// checkpoint_<step>.terl into out_dir.
TrainingResult run_training(const PolicyConfig& policy_cfg, const WorldConfig& world_cfg,
                            const TrainConfig& cfg, const std::string& out_dir);

/// Header line of the learning log.
const char* training_log_header();

} // namespace terl
