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

#include "terl/training.hpp"

#include "terl/checkpoint.hpp"
#include "terl/evader_apf.hpp"
#include "terl/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

namespace terl {

using nn::Graph;
using nn::Matrix;
using nn::Var;

// Replay

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity)
{
  if (capacity == 0)
    throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t)
{
  if (items_.size() < capacity_)
    items_.push_back(std::move(t));
  else
    items_[next_] = std::move(t);
  next_ = (next_ + 1) % capacity_;
  ++insertions_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, Rng& rng) const
{
  if (n > items_.size())
    throw std::invalid_argument("cannot sample more transitions than stored");
  std::vector<const Transition*> out;
  out.reserve(n);
  std::unordered_set<std::size_t> taken;
  while (out.size() < n)
  {
    const auto i = static_cast<std::size_t>(rng.uniform_int(items_.size()));
    if (taken.insert(i).second)
      out.push_back(&items_[i]);
  }
  return out;
}

// Curriculum

const std::vector<CurriculumStage>& default_curriculum()
{
  static const std::vector<CurriculumStage> stages = {
    {0.0, 2.0, 3, 1, 0, 4},
    {2.0, 4.0, 4, 1, 1, 6},
    {4.0, 5.0, 7, 2, 2, 8},
    {5.0, 6.0, 11, 3, 4, 8},
    {6.0, 7.0, 15, 4, 6, 8},
  };
  return stages;
}

void validate_curriculum(const std::vector<CurriculumStage>& schedule)
{
  if (schedule.empty())
    throw ConfigError("curriculum needs at least one stage");
  if (schedule.front().begin_million != 0.0)
    throw ConfigError("curriculum must start at step 0");
  for (std::size_t i = 0; i < schedule.size(); ++i)
  {
    const auto& s = schedule[i];
    if (!(s.end_million > s.begin_million))
      throw ConfigError("curriculum stage has an empty range");
    if (i > 0 && s.begin_million != schedule[i - 1].end_million)
      throw ConfigError("curriculum stages must be contiguous");
    if (s.pursuers < 3 || s.evaders < 1 || s.obstacles < 0 || s.vortices < 0)
      throw ConfigError("curriculum stage has invalid robot counts");
  }
}

namespace {

CurriculumStage stage_at_nominal(double t, const std::vector<CurriculumStage>& schedule)
{
  if (t < 0)
    throw std::invalid_argument("curriculum step must be non-negative");
  for (const auto& s : schedule)
    if (t < s.end_million * 1e6)
      return s;
  return schedule.back();
}

} // namespace

CurriculumStage curriculum_stage_at(std::int64_t t)
{
  return curriculum_stage_at(t, default_curriculum());
}

CurriculumStage curriculum_stage_at(std::int64_t t, const std::vector<CurriculumStage>& schedule)
{
  return stage_at_nominal(static_cast<double>(t), schedule);
}

CurriculumStage compressed_stage_at(std::int64_t t, double compression,
                                    const std::vector<CurriculumStage>& schedule)
{
  if (!(compression > 0.0))
    throw std::invalid_argument("compression must be positive");
  return stage_at_nominal(static_cast<double>(t) / compression, schedule);
}

// Config

void TrainConfig::validate() const
{
  auto require = [](bool ok, const char* what) {
    if (!ok)
      throw ConfigError(what);
  };
  require(total_steps >= 0, "total_steps must be non-negative");
  require(lr >= 0.0, "lr must be non-negative");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
  require(batch_size > 0, "batch_size must be positive");
  require(target_sync_interval > 0, "target_sync_interval must be positive");
  require(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0,
          "epsilon values must lie in [0, 1]");
  require(replay_capacity > 0, "replay_capacity must be positive");
  require(episode_cap > 0, "episode_cap must be positive");
  require(train_frequency > 0, "train_frequency must be positive");
  require(learning_starts >= 0, "learning_starts must be non-negative");
  require(grad_clip >= 0.0, "grad_clip must be non-negative");
  require(checkpoint_interval >= 0, "checkpoint_interval must be non-negative");
  require(compression > 0.0, "compression must be positive");
  validate_curriculum(schedule());
}

std::int64_t TrainConfig::decay_steps() const
{
  if (epsilon_decay_steps >= 0)
    return epsilon_decay_steps;
  return static_cast<std::int64_t>(std::llround(0.3 * static_cast<double>(total_steps)));
}

double TrainConfig::epsilon_at(std::int64_t step) const
{
  const std::int64_t n = decay_steps();
  if (n <= 0 || step >= n)
    return epsilon_end;
  const double frac = static_cast<double>(step) / static_cast<double>(n);
  return epsilon_start + (epsilon_end - epsilon_start) * frac;
}

const std::vector<CurriculumStage>& TrainConfig::schedule() const
{
  return curriculum.empty() ? default_curriculum() : curriculum;
}

// Losses

double quantile_huber_loss(std::span<const double> z, std::span<const double> taus,
                           std::span<const double> y, double kappa)
{
  if (z.size() != taus.size())
    throw std::invalid_argument("one tau per online quantile required");
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i)
    for (double yj : y)
    {
      const double u = yj - z[i];
      const double weight = std::abs(taus[i] - (u < 0.0 ? 1.0 : 0.0));
      total += weight * nn::huber(u, kappa) / kappa;
    }
  return total / static_cast<double>(y.size());
}

Var quantile_huber_loss(Graph& g, Var z, const Matrix& taus, const Matrix& y, double kappa)
{
  const Matrix& zv = g.value(z);
  const Eigen::Index batch = taus.rows();
  const Eigen::Index k = taus.cols();
  const Eigen::Index kp = y.cols();
  if (zv.rows() != batch * k || zv.cols() != 1 || y.rows() != batch)
    throw std::invalid_argument("quantile_huber_loss: shape mismatch");

  Matrix dz(zv.rows(), 1);
  double total = 0.0;
  const double norm = 1.0 / (static_cast<double>(batch) * static_cast<double>(kp));
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index i = 0; i < k; ++i)
    {
      const double zi = zv(b * k + i, 0);
      const double tau = taus(b, i);
      double grad = 0.0;
      for (Eigen::Index j = 0; j < kp; ++j)
      {
        const double u = y(b, j) - zi;
        const double weight = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
        total += weight * nn::huber(u, kappa) / kappa;
        grad -= weight * nn::huber_derivative(u, kappa) / kappa;
      }
      dz(b * k + i, 0) = grad * norm;
    }
  Matrix out(1, 1);
  out(0, 0) = total * norm;
  return g.emit(std::move(out), {z}, [z, dz](Graph& gr, int self) {
    gr.grad_acc(z) += dz * gr.grad_of(self)(0, 0);
  });
}

double huber_td_loss(std::span<const double> q, std::span<const double> y, double kappa)
{
  if (q.size() != y.size() || q.empty())
    throw std::invalid_argument("huber_td_loss: shape mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i)
    total += nn::huber(y[i] - q[i], kappa);
  return total / static_cast<double>(q.size());
}

Var huber_td_loss(Graph& g, Var q, const Matrix& y, double kappa)
{
  const Matrix& qv = g.value(q);
  if (qv.rows() != y.rows() || qv.cols() != 1 || y.cols() != 1)
    throw std::invalid_argument("huber_td_loss: shape mismatch");
  const double n = static_cast<double>(qv.rows());
  Matrix dq(qv.rows(), 1);
  double total = 0.0;
  for (Eigen::Index i = 0; i < qv.rows(); ++i)
  {
    const double u = y(i, 0) - qv(i, 0);
    total += nn::huber(u, kappa);
    dq(i, 0) = -nn::huber_derivative(u, kappa) / n;
  }
  Matrix out(1, 1);
  out(0, 0) = total / n;
  return g.emit(std::move(out), {q}, [q, dq](Graph& gr, int self) {
    gr.grad_acc(q) += dq * gr.grad_of(self)(0, 0);
  });
}

namespace {

std::vector<const ObservationBundle*> observations_of(std::span<const Transition* const> batch,
                                                      bool next)
{
  std::vector<const ObservationBundle*> out;
  out.reserve(batch.size());
  for (const Transition* t : batch)
    out.push_back(next ? &t->next_observation : &t->observation);
  return out;
}

/// Picks column actions[r / rows_per_sample] of each row of x.
Var select_action_column(Graph& g, Var x, const std::vector<int>& actions, int rows_per_sample)
{
  const Matrix& xv = g.value(x);
  Matrix one_hot = Matrix::Zero(xv.rows(), xv.cols());
  for (Eigen::Index r = 0; r < xv.rows(); ++r)
    one_hot(r, actions[r / rows_per_sample]) = 1.0;
  const Var picked = nn::mul(g, x, g.constant(std::move(one_hot)));
  return nn::matmul(g, picked, g.constant(Matrix::Ones(xv.cols(), 1)));
}

} // namespace

Matrix td_targets(const Policy& target, std::span<const Transition* const> batch, double gamma,
                  const Matrix& target_taus)
{
  const int n = static_cast<int>(batch.size());
  const bool distributional = is_distributional(target.variant());
  const Eigen::Index kp = distributional ? target_taus.cols() : 1;
  Matrix y(n, kp);
  for (int b = 0; b < n; ++b)
    y.row(b).setConstant(batch[b]->reward);
  if (gamma == 0.0 || std::all_of(batch.begin(), batch.end(), [](auto* t) { return t->done; }))
    return y;

  const auto next = observations_of(batch, true);
  Graph g(false);
  const Matrix& z = g.value(target.head(g, target.representation(g, pack_observations(next)),
                                        target_taus));
  const int n_actions = target.config().num_actions();
  for (int b = 0; b < n; ++b)
  {
    if (batch[b]->done)
      continue;
    if (!distributional)
    {
      y(b, 0) += gamma * z.row(b).maxCoeff();
      continue;
    }
    const auto block = z.middleRows(b * kp, kp);
    const Eigen::RowVectorXd mean_q = block.colwise().mean();
    const int best = argmax_lowest(std::span<const double>(mean_q.data(), n_actions));
    for (Eigen::Index j = 0; j < kp; ++j)
      y(b, j) += gamma * block(j, best);
  }
  return y;
}

// Trainer

Trainer::Trainer(const PolicyConfig& policy_cfg, const TrainConfig& cfg)
  : cfg_(cfg), online_(policy_cfg, derive_seed(cfg.seed, 0)), target_(online_),
    buffer_(cfg.replay_capacity), rng_(derive_seed(cfg.seed, 3))
{
  cfg_.validate();
}

void Trainer::sync_target()
{
  target_.params().copy_values_from(online_.params());
}

double Trainer::batch_loss(std::span<const Transition* const> batch, const Matrix& taus,
                           const Matrix& target_taus, bool accumulate)
{
  const Matrix y = td_targets(target_, batch, cfg_.gamma, target_taus);
  const double kappa = online_.config().huber_kappa;
  std::vector<int> actions;
  for (const Transition* t : batch)
    actions.push_back(t->action);

  Graph g(accumulate);
  const auto obs = observations_of(batch, false);
  const Var out = online_.head(g, online_.representation(g, pack_observations(obs)), taus);
  Var loss;
  if (is_distributional(online_.variant()))
  {
    const Var z = select_action_column(g, out, actions, static_cast<int>(taus.cols()));
    loss = quantile_huber_loss(g, z, taus, y, kappa);
  }
  else
  {
    loss = huber_td_loss(g, select_action_column(g, out, actions, 1), y, kappa);
  }
  if (accumulate)
    g.backward(loss);
  return g.value(loss)(0, 0);
}

std::optional<double> Trainer::train_step()
{
  const auto n = static_cast<std::size_t>(cfg_.batch_size);
  if (buffer_.size() < n)
    return std::nullopt;
  const auto batch = buffer_.sample(n, rng_);
  const bool distributional = is_distributional(online_.variant());
  const PolicyConfig& pc = online_.config();
  Matrix taus(static_cast<Eigen::Index>(n), distributional ? pc.quantile_samples : 0);
  Matrix target_taus(static_cast<Eigen::Index>(n), distributional ? pc.target_quantile_samples : 0);
  for (Eigen::Index i = 0; i < taus.size(); ++i)
    taus.data()[i] = rng_.uniform_open();
  for (Eigen::Index i = 0; i < target_taus.size(); ++i)
    target_taus.data()[i] = rng_.uniform_open();

  online_.params().zero_grad();
  const double loss = batch_loss(batch, taus, target_taus, true);
  if (cfg_.grad_clip > 0.0)
  {
    const double norm = online_.params().grad_norm();
    if (norm > cfg_.grad_clip)
      online_.params().scale_grad(cfg_.grad_clip / norm);
  }
  nn::adam_step(online_.params(), cfg_.lr);
  online_.params().round_to_float();
  ++gradient_steps_;
  if (gradient_steps_ % cfg_.target_sync_interval == 0)
    sync_target();
  return loss;
}

// Training loop

const char* training_log_header()
{
  return "step,episode,loss,epsilon,episode_return,success";
}

namespace {

std::string format_double(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

WorldConfig stage_world(const WorldConfig& base, const CurriculumStage& s)
{
  WorldConfig w = base;
  w.num_pursuers = s.pursuers;
  w.num_evaders = s.evaders;
  w.num_obstacles = s.obstacles;
  w.num_vortices = s.vortices;
  return w;
}

} // namespace

TrainingResult run_training(const PolicyConfig& policy_cfg, const WorldConfig& world_cfg,
                            const TrainConfig& cfg, const std::string& out_dir)
{
  cfg.validate();
  world_cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  TrainingResult result;
  result.log_path = (fs::path(out_dir) / "train_log.csv").string();
  std::ofstream log(result.log_path, std::ios::trunc);
  if (!log)
    throw std::runtime_error("cannot write training log '" + result.log_path + "'");
  log << training_log_header() << '\n';

  Trainer trainer(policy_cfg, cfg);
  Rng rollout_rng(derive_seed(cfg.seed, 2));
  const ObservationCaps caps = policy_cfg.caps;

  auto checkpoint = [&](std::int64_t step) {
    const auto path = (fs::path(out_dir) / ("checkpoint_" + std::to_string(step) + ".terl")).string();
    save_policy(trainer.online(), path);
    result.checkpoints.push_back(path);
    result.final_checkpoint = path;
  };
  checkpoint(0);

  std::optional<WorldState> world;
  WorldConfig wcfg;
  double episode_return = 0.0;
  double loss_sum = 0.0;
  int loss_count = 0;
  std::int64_t episode = 0;

  for (std::int64_t t = 0; t < cfg.total_steps;)
  {
    if (!world)
    {
      wcfg = stage_world(world_cfg, compressed_stage_at(t, cfg.compression, cfg.schedule()));
      world = init_episode(wcfg, derive_seed(cfg.seed, 1'000'000 + static_cast<std::uint64_t>(episode)));
      episode_return = 0.0;
      loss_sum = 0.0;
      loss_count = 0;
    }

    const double epsilon = cfg.epsilon_at(t);
    std::vector<int> ids;
    std::vector<ObservationBundle> observations;
    for (const auto& r : world->robots)
      if (r.role == Role::Pursuer && r.active())
      {
        ids.push_back(r.id);
        observations.push_back(assemble_observation(r, *world, wcfg, caps));
      }
    std::vector<const ObservationBundle*> ptrs;
    for (const auto& o : observations)
      ptrs.push_back(&o);
    const auto actions = trainer.online().select_actions(ptrs, epsilon, rollout_rng, false);

    ActionMap pursuer_actions;
    for (std::size_t i = 0; i < ids.size(); ++i)
      pursuer_actions[ids[i]] = decode_action(actions[i], wcfg);
    const ActionMap evader_moves = evader_actions(*world, wcfg);
    const WorldState before = *world;
    const StepEvents events = step(*world, pursuer_actions, evader_moves, wcfg);
    const auto rewards = step_rewards(before, *world, events, wcfg);
    const auto outcome = check_termination(*world, cfg.episode_cap);
    const bool terminal =
      outcome && (*outcome == Outcome::AllEncircled || *outcome == Outcome::PursuersDepleted);

    double step_reward = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i)
    {
      const RobotState& now = world->robot(ids[i]);
      Transition tr;
      tr.observation = std::move(observations[i]);
      tr.action = actions[i];
      tr.reward = rewards.at(ids[i]).total;
      tr.next_observation = assemble_observation(now, *world, wcfg, caps);
      tr.done = terminal || !now.active();
      tr.pursuer_id = ids[i];
      tr.episode_id = episode;
      tr.step = t;
      step_reward += tr.reward;
      trainer.buffer().push(std::move(tr));
    }
    episode_return += step_reward / static_cast<double>(wcfg.num_pursuers);
    ++t;

    if (t >= cfg.learning_starts && t % cfg.train_frequency == 0)
      if (const auto loss = trainer.train_step())
      {
        loss_sum += *loss;
        ++loss_count;
      }
    if (cfg.checkpoint_interval > 0 && t % cfg.checkpoint_interval == 0 && t < cfg.total_steps)
      checkpoint(t);

    if (outcome)
    {
      const double mean_loss = loss_count > 0 ? loss_sum / loss_count : std::nan("");
      log << t << ',' << episode << ',' << format_double(mean_loss) << ','
          << format_double(epsilon) << ',' << format_double(episode_return) << ','
          << (*outcome == Outcome::AllEncircled ? 1 : 0) << '\n';
      ++episode;
      world.reset();
    }
  }
  if (cfg.total_steps > 0)
    checkpoint(cfg.total_steps);
  log.flush();
  result.steps = cfg.total_steps;
  result.episodes = episode;
  result.gradient_steps = trainer.gradient_steps();
  return result;
}

} // namespace terl
