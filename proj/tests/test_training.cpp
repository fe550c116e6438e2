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
#include "oracles.hpp"

#include "terl/training.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace terl;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

PolicyConfig tiny(Variant v = Variant::Terl)
{
  PolicyConfig c;
  c.latent_dim = 8;
  c.heads = 2;
  c.relation_layers = 1;
  c.quantile_embedding_dim = 8;
  c.quantile_samples = 4;
  c.target_quantile_samples = 4;
  c.variant = v;
  return c;
}

ObservationBundle observation_near_evader(double ex, double ey)
{
  WorldState w;
  w.robots = {fixtures::pursuer(0, 0, 0, 0.3, 1.0), fixtures::pursuer(1, 4, -2), fixtures::evader(2, ex, ey, 1.0, 2.0)};
  return assemble_observation(w.robots[0], w, WorldConfig{});
}

Transition transition(double reward, bool done, int action = 3)
{
  Transition t;
  t.observation = observation_near_evader(6, 2);
  t.next_observation = observation_near_evader(5, 3);
  t.action = action;
  t.reward = reward;
  t.done = done;
  return t;
}

std::string slurp(const fs::path& p)
{
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name)
{
  const auto d = fs::temp_directory_path() / ("terl_training_test_" + name);
  fs::remove_all(d);
  return d;
}

} // namespace

TEST_CASE("quantile huber loss fixtures")
{
  const double z0[] = {0.0};
  const double z1[] = {3.0};
  const double half[] = {0.5};
  const double y2[] = {2.0};

  // Z = y everywhere
  CHECK(quantile_huber_loss(z1, half, std::span<const double>(z1), 1.0) == 0.0);

  // K = K' = 1, tau 0.5, y - Z = 2: 0.5 * 1.5
  CHECK(std::abs(quantile_huber_loss(z0, half, y2, 1.0) - 0.75) <= 1e-12);

  // K = K' = 2 by hand:
  //   z = (0, 1), tau = (0.25, 0.75), y = (0.5, 3)
  //   i=0: u=0.5 -> 0.25*0.125, u=3 -> 0.25*2.5     sum 0.65625
  //   i=1: u=-0.5 -> 0.25*0.125, u=2 -> 0.75*1.5    sum 1.15625
  //   total 1.8125 / K' = 0.90625
  const double z[] = {0.0, 1.0};
  const double taus[] = {0.25, 0.75};
  const double y[] = {0.5, 3.0};
  CHECK(std::abs(quantile_huber_loss(z, taus, y, 1.0) - 0.90625) <= 1e-12);

  // the DQN loss on the same pairs is the mean Huber TD error
  const double q1[] = {0.0};
  CHECK(std::abs(huber_td_loss(q1, y2, 1.0) - 1.5) <= 1e-12);
  const double qs[] = {0.0, 1.0};
  const double ys[] = {0.5, 3.0};
  CHECK(std::abs(huber_td_loss(qs, ys, 1.0) - (0.125 + 1.5) / 2) <= 1e-12);

  // at the median the quantile loss is half the symmetric Huber loss
  Rng rng(4);
  for (int i = 0; i < 50; ++i)
  {
    const double a[] = {rng.uniform(-5, 5)};
    const double b[] = {rng.uniform(-5, 5)};
    CHECK(quantile_huber_loss(a, half, b, 1.0) == Approx(0.5 * huber_td_loss(a, b, 1.0)).epsilon(1e-14));
    CHECK(huber_td_loss(a, b, 1.0) == oracle::huber(b[0] - a[0], 1.0));
  }
}

TEST_CASE("graph losses agree with the span versions and their gradients")
{
  Rng rng(8);
  const int B = 3;
  const int K = 4;
  const int KP = 5;
  nn::Matrix taus(B, K);
  nn::Matrix y(B, KP);
  std::vector<double> zflat(B * K);
  for (Eigen::Index i = 0; i < taus.size(); ++i)
    taus.data()[i] = rng.uniform_open();
  for (Eigen::Index i = 0; i < y.size(); ++i)
    y.data()[i] = rng.uniform(-3, 3);
  for (double& v : zflat)
    v = rng.uniform(-3, 3);

  auto graph_loss = [&](const std::vector<double>& zv, std::vector<double>* grad) {
    nn::ParamStore s;
    nn::Matrix zm(B * K, 1);
    std::copy(zv.begin(), zv.end(), zm.data());
    s.add("z", zm);
    nn::Graph g;
    const auto loss = quantile_huber_loss(g, g.param(s, "z"), taus, y, 1.0);
    if (grad)
    {
      g.backward(loss);
      *grad = s.flat_grads();
    }
    return g.value(loss)(0, 0);
  };

  double expect = 0.0;
  for (int b = 0; b < B; ++b)
  {
    const std::vector<double> zb(zflat.begin() + b * K, zflat.begin() + (b + 1) * K);
    const std::vector<double> tb(taus.row(b).data(), taus.row(b).data() + K);
    const std::vector<double> yb(y.row(b).data(), y.row(b).data() + KP);
    expect += quantile_huber_loss(zb, tb, yb, 1.0);
  }
  std::vector<double> grad;
  CHECK(graph_loss(zflat, &grad) == Approx(expect / B).epsilon(1e-14));
  std::vector<std::size_t> coords(zflat.size());
  std::iota(coords.begin(), coords.end(), 0);
  CHECK(oracle::gradient_error([&](const std::vector<double>& z) { return graph_loss(z, nullptr); }, zflat, grad,
                               coords) < 1e-6);

  // DQN
  nn::Matrix q(B, 1);
  nn::Matrix yq(B, 1);
  for (int b = 0; b < B; ++b)
  {
    q(b, 0) = rng.uniform(-3, 3);
    yq(b, 0) = rng.uniform(-3, 3);
  }
  nn::Graph g(false);
  const auto l = huber_td_loss(g, g.constant(q), yq, 1.0);
  CHECK(g.value(l)(0, 0) ==
        Approx(huber_td_loss(std::span<const double>(q.data(), B), std::span<const double>(yq.data(), B), 1.0))
          .epsilon(1e-14));
}

TEST_CASE("bootstrapped targets")
{
  const Policy target(tiny(), 3);
  nn::Matrix taus{{0.2, 0.5, 0.9}};

  SUBCASE("terminal transition")
  {
    const Transition t = transition(-80.0, true);
    const Transition* batch[] = {&t};
    const auto y = td_targets(target, batch, 0.99, taus);
    REQUIRE(y.cols() == 3);
    for (int j = 0; j < 3; ++j)
      CHECK(y(0, j) == -80.0);
  }

  SUBCASE("zero discount")
  {
    const Transition t = transition(2.5, false);
    const Transition* batch[] = {&t};
    const auto y = td_targets(target, batch, 0.0, taus);
    for (int j = 0; j < 3; ++j)
      CHECK(y(0, j) == 2.5);
  }

  SUBCASE("unit discount matches a hand backup")
  {
    const Transition t = transition(1.25, false);
    const Transition* batch[] = {&t};
    const auto y = td_targets(target, batch, 1.0, taus);
    const auto next = target.action_quantiles(target.forward_variant(t.next_observation), {0.2, 0.5, 0.9});
    const auto mean = next.q_values();
    const int best = static_cast<int>(std::max_element(mean.begin(), mean.end()) - mean.begin());
    for (int j = 0; j < 3; ++j)
      CHECK(y(0, j) == Approx(1.25 + next.quantiles(j, best)).epsilon(1e-12));
  }

  SUBCASE("dqn uses the max action value")
  {
    const Policy dqn(tiny(Variant::DqnAvgPool), 3);
    const Transition t = transition(1.0, false);
    const Transition* batch[] = {&t};
    const auto y = td_targets(dqn, batch, 0.5, nn::Matrix(1, 0));
    REQUIRE(y.cols() == 1);
    const auto q = dqn.q_values(t.next_observation, {});
    CHECK(y(0, 0) == Approx(1.0 + 0.5 * *std::max_element(q.begin(), q.end())).epsilon(1e-12));
  }
}

TEST_CASE("replay buffer")
{
  ReplayBuffer buf(4);
  for (int i = 0; i < 6; ++i)
    buf.push(transition(i, false));
  CHECK(buf.size() == 4);
  CHECK(buf.insertions() == 6);
  std::multiset<double> rewards;
  for (std::size_t i = 0; i < buf.size(); ++i)
    rewards.insert(buf.at(i).reward);
  CHECK(rewards == std::multiset<double>{2, 3, 4, 5});

  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial)
  {
    const auto s = buf.sample(4, rng);
    std::set<const Transition*> distinct(s.begin(), s.end());
    CHECK(distinct.size() == 4);
  }
  CHECK_THROWS(buf.sample(5, rng));

  Rng a(9);
  Rng b(9);
  CHECK(buf.sample(3, a) == buf.sample(3, b));

  // every slot is reachable
  std::map<const Transition*, int> hits;
  for (int i = 0; i < 4000; ++i)
    ++hits[buf.sample(1, rng)[0]];
  CHECK(hits.size() == 4);
  for (const auto& [ptr, n] : hits)
    CHECK(n > 800);
}

TEST_CASE("curriculum schedule")
{
  using S = CurriculumStage;
  CHECK(curriculum_stage_at(0) == S{0, 2, 3, 1, 0, 4});
  CHECK(curriculum_stage_at(1'999'999) == S{0, 2, 3, 1, 0, 4});
  CHECK(curriculum_stage_at(2'000'000) == S{2, 4, 4, 1, 1, 6});
  CHECK(curriculum_stage_at(4'000'000) == S{4, 5, 7, 2, 2, 8});
  CHECK(curriculum_stage_at(4'500'000) == S{4, 5, 7, 2, 2, 8});
  CHECK(curriculum_stage_at(5'000'000) == S{5, 6, 11, 3, 4, 8});
  CHECK(curriculum_stage_at(6'000'000) == S{6, 7, 15, 4, 6, 8});
  CHECK(curriculum_stage_at(7'000'000) == S{6, 7, 15, 4, 6, 8});
  CHECK(curriculum_stage_at(50'000'000).pursuers == 15);
  CHECK_THROWS_AS(curriculum_stage_at(-1), std::invalid_argument);

  const auto& sched = default_curriculum();
  auto pursuers_at = [&](std::int64_t t) { return compressed_stage_at(t, 0.01, sched).pursuers; };
  CHECK(pursuers_at(0) == 3);
  CHECK(pursuers_at(19'999) == 3);
  CHECK(pursuers_at(20'000) == 4);
  CHECK(pursuers_at(39'999) == 4);
  CHECK(pursuers_at(40'000) == 7);
  CHECK(pursuers_at(50'000) == 11);
  CHECK(pursuers_at(60'000) == 15);
  CHECK(pursuers_at(70'000) == 15);
  CHECK_THROWS(compressed_stage_at(0, 0.0, sched));

  CHECK_NOTHROW(validate_curriculum(sched));
  CHECK_THROWS_AS(validate_curriculum({}), ConfigError);
  CHECK_THROWS_AS(validate_curriculum({{1, 2, 3, 1, 0, 0}}), ConfigError);
  CHECK_THROWS_AS(validate_curriculum({{0, 1, 3, 1, 0, 0}, {2, 3, 3, 1, 0, 0}}), ConfigError);
  CHECK_THROWS_AS(validate_curriculum({{0, 1, 2, 1, 0, 0}}), ConfigError);
}

TEST_CASE("training configuration")
{
  TrainConfig c;
  CHECK(c.lr == 5e-4);
  CHECK(c.gamma == 0.99);
  CHECK(c.batch_size == 64);
  CHECK(c.replay_capacity == 100'000);
  CHECK(c.target_sync_interval == 1000);
  CHECK(c.decay_steps() == 2'100'000);
  CHECK(c.epsilon_at(0) == 1.0);
  CHECK(c.epsilon_at(1'050'000) == Approx(0.525));
  CHECK(c.epsilon_at(2'100'000) == 0.05);
  CHECK(c.epsilon_at(6'000'000) == 0.05);
  c.gamma = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("trainer updates")
{
  TrainConfig tc;
  tc.batch_size = 4;
  tc.seed = 5;
  tc.target_sync_interval = 3;

  SUBCASE("too few transitions is a no-op")
  {
    Trainer tr(tiny(), tc);
    tr.buffer().push(transition(1, false));
    const auto before = tr.online().params().flat_values();
    CHECK_FALSE(tr.train_step().has_value());
    CHECK(tr.gradient_steps() == 0);
    CHECK(tr.online().params().flat_values() == before);
  }

  SUBCASE("zero learning rate leaves parameters unchanged")
  {
    tc.lr = 0.0;
    for (Variant v : {Variant::Terl, Variant::DqnAvgPool})
    {
      Trainer tr(tiny(v), tc);
      for (int i = 0; i < 8; ++i)
        tr.buffer().push(transition(i, i % 3 == 0, i % 9));
      const auto before = tr.online().params().flat_values();
      for (int i = 0; i < 5; ++i)
        CHECK(tr.train_step().has_value());
      CHECK(tr.online().params().flat_values() == before);
    }
  }

  SUBCASE("identical seeds give identical loss sequences")
  {
    auto run = [&] {
      Trainer tr(tiny(), tc);
      for (int i = 0; i < 10; ++i)
        tr.buffer().push(transition(i, i % 4 == 0, i % 9));
      std::vector<double> losses;
      for (int i = 0; i < 6; ++i)
        losses.push_back(*tr.train_step());
      return std::pair{losses, tr.online().params().flat_values()};
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
  }

  SUBCASE("target network follows the sync interval")
  {
    Trainer tr(tiny(), tc);
    for (int i = 0; i < 8; ++i)
      tr.buffer().push(transition(i, false, i % 9));
    CHECK(tr.target().params().values_identical(tr.online().params()));
    tr.train_step();
    CHECK_FALSE(tr.target().params().values_identical(tr.online().params()));
    tr.train_step();
    tr.train_step();
    CHECK(tr.target().params().values_identical(tr.online().params()));
  }
}

TEST_CASE("overfitting one transition decreases the loss monotonically")
{
  for (Variant v : {Variant::Terl, Variant::DqnAvgPool})
  {
    CAPTURE(variant_name(v));
    TrainConfig tc;
    tc.batch_size = 1;
    tc.seed = 2;
    Trainer tr(tiny(v), tc);
    const Transition t = transition(3.0, true);
    const Transition* batch[] = {&t};
    const bool dist = is_distributional(v);
    const nn::Matrix taus = dist ? nn::Matrix{{0.1, 0.4, 0.6, 0.9}} : nn::Matrix(1, 0);
    double prev = std::numeric_limits<double>::infinity();
    double first = 0.0;
    for (int i = 0; i < 100; ++i)
    {
      tr.online().params().zero_grad();
      const double loss = tr.batch_loss(batch, taus, taus, true);
      if (i == 0)
        first = loss;
      CHECK(loss < prev);
      prev = loss;
      nn::adam_step(tr.online().params(), 1e-4);
    }
    CHECK(prev < 0.5 * first);
  }
}

TEST_CASE("training loop outputs")
{
  WorldConfig w;
  w.num_vortices = 2;
  TrainConfig tc;
  tc.seed = 3;
  tc.batch_size = 8;
  tc.learning_starts = 50;
  tc.episode_cap = 120;
  tc.curriculum = {{0, 7, 3, 1, 0, 2}};

  SUBCASE("zero steps writes only the initial checkpoint")
  {
    const auto dir = scratch_dir("zero");
    tc.total_steps = 0;
    const auto r = run_training(tiny(), w, tc, dir.string());
    CHECK(r.checkpoints.size() == 1);
    CHECK(fs::exists(dir / "checkpoint_0.terl"));
    CHECK(slurp(dir / "train_log.csv") == std::string(training_log_header()) + "\n");
    fs::remove_all(dir);
  }

  SUBCASE("identical seeds give identical logs and checkpoints")
  {
    tc.total_steps = 400;
    tc.checkpoint_interval = 200;
    const auto a = scratch_dir("a");
    const auto b = scratch_dir("b");
    const auto ra = run_training(tiny(), w, tc, a.string());
    run_training(tiny(), w, tc, b.string());
    CHECK(ra.episodes >= 3);
    CHECK(ra.gradient_steps == 351);
    CHECK(ra.checkpoints.size() == 3);
    const auto log = slurp(a / "train_log.csv");
    CHECK(log == slurp(b / "train_log.csv"));
    CHECK(log.rfind(training_log_header(), 0) == 0);
    for (const char* ck : {"checkpoint_0.terl", "checkpoint_200.terl", "checkpoint_400.terl"})
      CHECK(slurp(a / ck) == slurp(b / ck));
    CHECK(slurp(a / "checkpoint_0.terl") != slurp(a / "checkpoint_400.terl"));
    const Policy loaded = load_policy((a / "checkpoint_400.terl").string(), Variant::Terl);
    CHECK(loaded.config().latent_dim == 8);
    fs::remove_all(a);
    fs::remove_all(b);
  }

  SUBCASE("invalid configuration is rejected before anything is written")
  {
    const auto dir = scratch_dir("bad");
    tc.batch_size = 0;
    CHECK_THROWS_AS(run_training(tiny(), w, tc, dir.string()), ConfigError);
    CHECK_FALSE(fs::exists(dir));
  }
}
