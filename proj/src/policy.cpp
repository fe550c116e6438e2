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

#include "terl/policy.hpp"

#include "terl/checkpoint.hpp"
#include "terl/config.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace terl {

using nn::Graph;
using nn::Matrix;
using nn::Segment;
using nn::Var;

std::string_view variant_name(Variant v)
{
  switch (v)
  {
    case Variant::Terl:
      return "terl";
    case Variant::TerlNoRe:
      return "terl_no_re";
    case Variant::TerlNoTs:
      return "terl_no_ts";
    case Variant::IqnAvgPool:
      return "iqn_avgpool";
    case Variant::DqnAvgPool:
      return "dqn_avgpool";
    case Variant::MeanEmbedding:
      return "mean_embedding";
  }
  return "unknown";
}

std::optional<Variant> parse_variant(std::string_view name)
{
  struct Alias
  {
    std::string_view name;
    Variant variant;
  };
  static constexpr Alias aliases[] = {
    {"terl", Variant::Terl},
    {"terl_no_re", Variant::TerlNoRe},
    {"terl-no-re", Variant::TerlNoRe},
    {"terl_no_ts", Variant::TerlNoTs},
    {"terl-no-ts", Variant::TerlNoTs},
    {"iqn_avgpool", Variant::IqnAvgPool},
    {"iqn", Variant::IqnAvgPool},
    {"dqn_avgpool", Variant::DqnAvgPool},
    {"dqn", Variant::DqnAvgPool},
    {"mean_embedding", Variant::MeanEmbedding},
    {"mean", Variant::MeanEmbedding},
  };
  for (const auto& a : aliases)
    if (a.name == name)
      return a.variant;
  return std::nullopt;
}

bool is_distributional(Variant v)
{
  return v != Variant::DqnAvgPool;
}

void PolicyConfig::validate() const
{
  auto require = [](bool ok, const char* what) {
    if (!ok)
      throw ConfigError(what);
  };
  require(latent_dim > 0 && heads > 0 && latent_dim % heads == 0,
          "latent_dim must be positive and divisible by heads");
  require(target_heads > 0 && latent_dim % target_heads == 0,
          "latent_dim must be divisible by target_heads");
  require(relation_layers >= 0, "relation_layers must be non-negative");
  require(quantile_samples > 0 && target_quantile_samples > 0 && eval_quantiles > 0,
          "quantile sample counts must be positive");
  require(quantile_embedding_dim > 0, "quantile_embedding_dim must be positive");
  require(huber_kappa > 0.0, "huber_kappa must be positive");
  require(caps.team >= 0 && caps.obstacles >= 0 && caps.evaders >= 0, "caps must be non-negative");
  require(num_accelerations > 0 && num_angular_velocities > 0, "action set sizes must be positive");
}

Action decode_action(int index, const WorldConfig& cfg)
{
  const int n_omega = static_cast<int>(cfg.pursuer_angular_velocities.size());
  const int n_total = n_omega * static_cast<int>(cfg.pursuer_accelerations.size());
  if (index < 0 || index >= n_total)
    throw std::out_of_range("action index out of range");
  return {cfg.pursuer_accelerations[index / n_omega], cfg.pursuer_angular_velocities[index % n_omega]};
}

std::vector<double> QuantileBatch::q_values() const
{
  std::vector<double> q(static_cast<std::size_t>(quantiles.cols()), 0.0);
  if (quantiles.rows() == 0)
    return q;
  for (Eigen::Index c = 0; c < quantiles.cols(); ++c)
    q[c] = quantiles.col(c).mean();
  return q;
}

namespace {

void append_valid_rows(const EntityBlock& block, std::vector<double>& out, int& rows)
{
  for (int i = 0; i < block.capacity; ++i)
  {
    if (!block.mask[i])
      continue;
    const auto r = block.row(i);
    out.insert(out.end(), r.begin(), r.end());
    ++rows;
  }
}

Matrix to_matrix(const std::vector<double>& flat, int rows, int cols)
{
  Matrix m(rows, cols);
  std::copy(flat.begin(), flat.end(), m.data());
  return m;
}

} // namespace

PackedBatch pack_observations(std::span<const ObservationBundle* const> bundles)
{
  PackedBatch batch;
  batch.batch = static_cast<int>(bundles.size());
  std::vector<double> ego, team, obstacles, evaders;
  int n_team = 0, n_obstacles = 0, n_evaders = 0;
  for (const ObservationBundle* b : bundles)
  {
    ego.insert(ego.end(), b->ego.begin(), b->ego.end());
    int start = n_team;
    append_valid_rows(b->team, team, n_team);
    batch.team_segments.push_back({start, n_team});
    start = n_obstacles;
    append_valid_rows(b->obstacles, obstacles, n_obstacles);
    batch.obstacle_segments.push_back({start, n_obstacles});
    start = n_evaders;
    append_valid_rows(b->evaders, evaders, n_evaders);
    batch.evader_segments.push_back({start, n_evaders});
  }
  batch.ego = to_matrix(ego, batch.batch, kEgoWidth);
  batch.team = to_matrix(team, n_team, kTeamWidth);
  batch.obstacles = to_matrix(obstacles, n_obstacles, kObstacleWidth);
  batch.evaders = to_matrix(evaders, n_evaders, kEvaderWidth);
  return batch;
}

PackedBatch pack_observations(const ObservationBundle& bundle)
{
  const ObservationBundle* ptr = &bundle;
  return pack_observations(std::span<const ObservationBundle* const>(&ptr, 1));
}

std::vector<double> quantile_grid(int n)
{
  std::vector<double> taus(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    taus[i] = (i + 0.5) / n;
  return taus;
}

int argmax_lowest(std::span<const double> values)
{
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i)
    if (values[i] > values[best])
      best = i;
  return best;
}

// Policy

Policy::Policy(const PolicyConfig& cfg, std::uint64_t seed) : cfg_(cfg)
{
  cfg_.validate();
  Rng rng(seed);
  init_params(rng);
  params_.round_to_float();
}

Policy::Policy(const PolicyConfig& cfg, nn::ParamStore params) : cfg_(cfg)
{
  cfg_.validate();
  Rng rng(0);
  init_params(rng);
  if (params.size() != params_.size())
    throw nn::CheckpointError("parameter count does not match the policy configuration");
  for (std::size_t i = 0; i < params_.size(); ++i)
  {
    const auto& expected = params_.params()[i];
    if (!params.contains(expected.name))
      throw nn::CheckpointError("missing parameter '" + expected.name + "'");
    const auto& got = params.at(expected.name);
    if (got.value.rows() != expected.value.rows() || got.value.cols() != expected.value.cols())
      throw nn::CheckpointError("parameter '" + expected.name + "' has the wrong shape");
    params_.params()[i].value = got.value;
  }
}

int Policy::representation_dim() const
{
  const int f = cfg_.latent_dim;
  switch (cfg_.variant)
  {
    case Variant::Terl:
    case Variant::TerlNoRe:
    case Variant::TerlNoTs:
      return 2 * f;
    case Variant::IqnAvgPool:
    case Variant::DqnAvgPool:
      return 4 * f;
    case Variant::MeanEmbedding:
      return f;
  }
  return f;
}

void Policy::init_params(Rng& rng)
{
  const int f = cfg_.latent_dim;
  const struct
  {
    const char* kind;
    int width;
  } kinds[] = {{"ego", kEgoWidth}, {"team", kTeamWidth}, {"obstacle", kObstacleWidth},
               {"evader", kEvaderWidth}};
  for (const auto& k : kinds)
  {
    nn::add_dense_params(params_, std::string("embed.") + k.kind + ".0", k.width, f, rng);
    nn::add_dense_params(params_, std::string("embed.") + k.kind + ".1", f, f, rng);
  }

  const Variant v = cfg_.variant;
  const bool uses_relation = v == Variant::Terl || v == Variant::TerlNoTs;
  if (uses_relation)
  {
    Matrix types(4, f);
    for (Eigen::Index i = 0; i < types.size(); ++i)
      types.data()[i] = rng.uniform(-0.1, 0.1);
    params_.add("type_embedding", std::move(types));
    for (int l = 0; l < cfg_.relation_layers; ++l)
      nn::add_attention_params(params_, "relation." + std::to_string(l), f, rng);
  }
  if (v == Variant::Terl || v == Variant::TerlNoRe)
  {
    nn::add_dense_params(params_, "target.query", 2 * f, f, rng);
    nn::add_dense_params(params_, "target.key", f, f, rng);
    nn::add_dense_params(params_, "target.value", f, f, rng);
  }

  nn::add_dense_params(params_, "head.state", representation_dim(), f, rng);
  if (is_distributional(v))
    nn::add_dense_params(params_, "head.tau", cfg_.quantile_embedding_dim, f, rng);
  nn::add_dense_params(params_, "head.hidden", f, f, rng);
  nn::add_dense_params(params_, "head.out", f, cfg_.num_actions(), rng);
}

Var Policy::embed(Graph& g, const std::string& kind, const Matrix& x) const
{
  const Var in = g.constant(x);
  const Var h = nn::relu(g, nn::dense_layer(g, params_, "embed." + kind + ".0", in));
  return nn::dense_layer(g, params_, "embed." + kind + ".1", h);
}

Var Policy::relation_stack(Graph& g, Var e, const std::vector<Segment>& samples) const
{
  for (int l = 0; l < cfg_.relation_layers; ++l)
  {
    const Var attended = nn::multi_head_attention(g, params_, "relation." + std::to_string(l), e,
                                                  e, samples, samples, cfg_.heads);
    e = cfg_.residual ? nn::add(g, e, attended) : attended;
  }
  return e;
}

Var Policy::target_attention(Graph& g, Var m, const std::vector<int>& ego_rows,
                             const std::vector<Segment>& samples,
                             const std::vector<int>& evader_rows,
                             const std::vector<Segment>& evader_segments) const
{
  const Var pooled = nn::segment_max(g, m, samples);
  const Var ego = nn::gather_rows(g, m, ego_rows);
  const Var query = nn::dense_layer(g, params_, "target.query", nn::concat_cols(g, {ego, pooled}));
  const Var ev = nn::gather_rows(g, m, evader_rows);
  const Var keys = nn::dense_layer(g, params_, "target.key", ev);
  const Var values = nn::dense_layer(g, params_, "target.value", ev);
  std::vector<Segment> query_segments;
  for (int b = 0; b < static_cast<int>(ego_rows.size()); ++b)
    query_segments.push_back({b, b + 1});
  const Var context = nn::ragged_attention(g, query, keys, values, std::move(query_segments),
                                           evader_segments, cfg_.target_heads);
  return nn::concat_cols(g, {context, query});
}

Var Policy::representation(Graph& g, const PackedBatch& batch) const
{
  const int B = batch.batch;
  const Var e_ego = embed(g, "ego", batch.ego);
  const Var e_team = embed(g, "team", batch.team);
  const Var e_obstacle = embed(g, "obstacle", batch.obstacles);
  const Var e_evader = embed(g, "evader", batch.evaders);

  const Variant v = cfg_.variant;
  if (v == Variant::IqnAvgPool || v == Variant::DqnAvgPool || v == Variant::MeanEmbedding)
  {
    const Var team_mean = nn::segment_mean(g, e_team, batch.team_segments);
    const Var obstacle_mean = nn::segment_mean(g, e_obstacle, batch.obstacle_segments);
    const Var evader_mean = nn::segment_mean(g, e_evader, batch.evader_segments);
    if (v != Variant::MeanEmbedding)
      return nn::concat_cols(g, {e_ego, team_mean, obstacle_mean, evader_mean});
    // Average over the categories present for each sample.
    std::vector<double> inv_counts(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b)
    {
      const int present = 1 + (batch.team_segments[b].size() > 0) +
                          (batch.obstacle_segments[b].size() > 0) +
                          (batch.evader_segments[b].size() > 0);
      inv_counts[b] = 1.0 / present;
    }
    const Var total =
      nn::add(g, nn::add(g, e_ego, team_mean), nn::add(g, obstacle_mean, evader_mean));
    return nn::scale_rows(g, total, std::move(inv_counts));
  }

  // Stack per sample as [ego, teammates, obstacles, evaders].
  const int n_team = static_cast<int>(batch.team.rows());
  const int n_obstacle = static_cast<int>(batch.obstacles.rows());
  std::vector<int> order;
  std::vector<int> kinds;
  std::vector<Segment> samples;
  std::vector<int> ego_rows;
  std::vector<int> evader_rows;
  std::vector<Segment> evader_segments;
  for (int b = 0; b < B; ++b)
  {
    const int start = static_cast<int>(order.size());
    ego_rows.push_back(start);
    order.push_back(b);
    kinds.push_back(static_cast<int>(EntityKind::Ego));
    for (int r = batch.team_segments[b].begin; r < batch.team_segments[b].end; ++r)
    {
      order.push_back(B + r);
      kinds.push_back(static_cast<int>(EntityKind::Team));
    }
    for (int r = batch.obstacle_segments[b].begin; r < batch.obstacle_segments[b].end; ++r)
    {
      order.push_back(B + n_team + r);
      kinds.push_back(static_cast<int>(EntityKind::Obstacle));
    }
    const int ev_start = static_cast<int>(evader_rows.size());
    for (int r = batch.evader_segments[b].begin; r < batch.evader_segments[b].end; ++r)
    {
      evader_rows.push_back(static_cast<int>(order.size()));
      order.push_back(B + n_team + n_obstacle + r);
      kinds.push_back(static_cast<int>(EntityKind::Evader));
    }
    evader_segments.push_back({ev_start, static_cast<int>(evader_rows.size())});
    samples.push_back({start, static_cast<int>(order.size())});
  }
  Var e = nn::gather_rows(g, nn::concat_rows(g, {e_ego, e_team, e_obstacle, e_evader}),
                          std::move(order));

  if (v != Variant::TerlNoRe)
  {
    e = nn::add(g, e, nn::gather_rows(g, g.param(params_, "type_embedding"), std::move(kinds)));
    e = relation_stack(g, e, samples);
  }
  if (v == Variant::TerlNoTs)
    return nn::concat_cols(g, {nn::gather_rows(g, e, ego_rows), nn::segment_max(g, e, samples)});
  return target_attention(g, e, ego_rows, samples, evader_rows, evader_segments);
}

namespace {

Matrix cosine_features(const Matrix& taus, int n)
{
  Matrix out(taus.size(), n);
  for (Eigen::Index r = 0; r < taus.size(); ++r)
  {
    const double tau = taus.data()[r];
    for (int i = 0; i < n; ++i)
      out(r, i) = std::cos(kPi * i * tau);
  }
  return out;
}

} // namespace

Var Policy::head(Graph& g, Var rep, const Matrix& taus) const
{
  const Var state = nn::relu(g, nn::dense_layer(g, params_, "head.state", rep));
  if (!is_distributional(cfg_.variant))
  {
    const Var hidden = nn::relu(g, nn::dense_layer(g, params_, "head.hidden", state));
    return nn::dense_layer(g, params_, "head.out", hidden);
  }
  if (taus.rows() != g.value(rep).rows())
    throw std::invalid_argument("head: one row of taus per sample required");
  const int k = static_cast<int>(taus.cols());
  const Var phi = nn::relu(
    g, nn::dense_layer(g, params_, "head.tau",
                       g.constant(cosine_features(taus, cfg_.quantile_embedding_dim))));
  const Var mixed = nn::mul(g, nn::repeat_rows(g, state, k), phi);
  const Var hidden = nn::relu(g, nn::dense_layer(g, params_, "head.hidden", mixed));
  return nn::dense_layer(g, params_, "head.out", hidden);
}

Matrix Policy::action_values(const PackedBatch& batch, const Matrix& taus) const
{
  Graph g(false);
  const Var out = head(g, representation(g, batch), taus);
  const Matrix& z = g.value(out);
  if (!is_distributional(cfg_.variant))
    return z;
  const Eigen::Index k = taus.cols();
  Matrix q(batch.batch, z.cols());
  for (Eigen::Index b = 0; b < batch.batch; ++b)
    q.row(b) = z.middleRows(b * k, k).colwise().mean();
  return q;
}

LatentSet Policy::embed_observations(const ObservationBundle& obs) const
{
  Graph g(false);
  auto block_matrix = [](const EntityBlock& b) {
    return to_matrix(b.values, b.capacity, b.width);
  };
  const Var parts[] = {
    embed(g, "ego", to_matrix(obs.ego, 1, kEgoWidth)),
    embed(g, "team", block_matrix(obs.team)),
    embed(g, "obstacle", block_matrix(obs.obstacles)),
    embed(g, "evader", block_matrix(obs.evaders)),
  };
  LatentSet out;
  out.rows = g.value(nn::concat_rows(g, {parts[0], parts[1], parts[2], parts[3]}));
  out.kinds.push_back(EntityKind::Ego);
  out.mask.push_back(1);
  for (const EntityBlock* b : {&obs.team, &obs.obstacles, &obs.evaders})
    for (int i = 0; i < b->capacity; ++i)
    {
      out.kinds.push_back(b->kind);
      out.mask.push_back(b->mask[i]);
    }
  return out;
}

LatentSet Policy::add_type_embeddings(const LatentSet& latent) const
{
  LatentSet out = latent;
  const Matrix& types = params_.at("type_embedding").value;
  for (std::size_t r = 0; r < latent.kinds.size(); ++r)
    out.rows.row(static_cast<Eigen::Index>(r)) += types.row(static_cast<int>(latent.kinds[r]));
  return out;
}

namespace {

std::vector<int> valid_rows(const LatentSet& latent)
{
  std::vector<int> rows;
  for (std::size_t i = 0; i < latent.mask.size(); ++i)
    if (latent.mask[i])
      rows.push_back(static_cast<int>(i));
  return rows;
}

} // namespace

LatentSet Policy::relation_extraction(const LatentSet& latent) const
{
  Graph g(false);
  const auto rows = valid_rows(latent);
  const int n = static_cast<int>(rows.size());
  const Var compact = nn::gather_rows(g, g.constant(latent.rows), rows);
  const Matrix& m = g.value(relation_stack(g, compact, {Segment{0, n}}));
  LatentSet out = latent;
  out.rows.setZero();
  for (int i = 0; i < n; ++i)
    out.rows.row(rows[i]) = m.row(i);
  return out;
}

std::vector<double> Policy::target_selection(const LatentSet& m) const
{
  Graph g(false);
  const auto rows = valid_rows(m);
  const int n = static_cast<int>(rows.size());
  std::vector<int> evader_rows;
  for (int i = 0; i < n; ++i)
    if (m.kinds[rows[i]] == EntityKind::Evader)
      evader_rows.push_back(i);
  const int n_ev = static_cast<int>(evader_rows.size());
  const Var compact = nn::gather_rows(g, g.constant(m.rows), rows);
  const Var out =
    target_attention(g, compact, {0}, {Segment{0, n}}, evader_rows, {Segment{0, n_ev}});
  const Matrix& v = g.value(out);
  return {v.data(), v.data() + v.size()};
}

std::vector<double> Policy::quantile_embed(double tau) const
{
  Graph g(false);
  Matrix taus(1, 1);
  taus(0, 0) = tau;
  const Var phi = nn::relu(
    g, nn::dense_layer(g, params_, "head.tau",
                       g.constant(cosine_features(taus, cfg_.quantile_embedding_dim))));
  const Matrix& v = g.value(phi);
  return {v.data(), v.data() + v.size()};
}

QuantileBatch Policy::action_quantiles(const std::vector<double>& rep,
                                       const std::vector<double>& taus) const
{
  Graph g(false);
  Matrix r(1, static_cast<Eigen::Index>(rep.size()));
  std::copy(rep.begin(), rep.end(), r.data());
  QuantileBatch out;
  Matrix t(1, static_cast<Eigen::Index>(taus.size()));
  std::copy(taus.begin(), taus.end(), t.data());
  if (is_distributional(cfg_.variant))
    out.taus = taus;
  out.quantiles = g.value(head(g, g.constant(std::move(r)), t));
  return out;
}

std::vector<double> Policy::forward_variant(const ObservationBundle& obs) const
{
  Graph g(false);
  const Matrix& v = g.value(representation(g, pack_observations(obs)));
  return {v.data(), v.data() + v.size()};
}

std::vector<double> Policy::q_values(const ObservationBundle& obs,
                                     const std::vector<double>& taus) const
{
  Matrix t(1, static_cast<Eigen::Index>(taus.size()));
  std::copy(taus.begin(), taus.end(), t.data());
  const Matrix q = action_values(pack_observations(obs), t);
  return {q.data(), q.data() + q.size()};
}

int Policy::select_action(const ObservationBundle& obs, double epsilon, Rng& rng,
                          bool eval_mode) const
{
  const ObservationBundle* ptr = &obs;
  return select_actions(std::span<const ObservationBundle* const>(&ptr, 1), epsilon, rng,
                        eval_mode)
    .front();
}

std::vector<int> Policy::select_actions(std::span<const ObservationBundle* const> bundles,
                                        double epsilon, Rng& rng, bool eval_mode) const
{
  const int n_actions = cfg_.num_actions();
  const int k = eval_mode ? cfg_.eval_quantiles : cfg_.quantile_samples;
  const bool distributional = is_distributional(cfg_.variant);
  std::vector<int> actions(bundles.size(), -1);
  std::vector<const ObservationBundle*> greedy;
  std::vector<std::size_t> greedy_index;
  std::vector<double> taus;
  const auto grid = quantile_grid(k);
  for (std::size_t i = 0; i < bundles.size(); ++i)
  {
    if (rng.uniform() < epsilon)
    {
      actions[i] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n_actions)));
      continue;
    }
    greedy.push_back(bundles[i]);
    greedy_index.push_back(i);
    if (!distributional)
      continue;
    if (eval_mode)
      taus.insert(taus.end(), grid.begin(), grid.end());
    else
      for (int j = 0; j < k; ++j)
        taus.push_back(rng.uniform_open());
  }
  if (greedy.empty())
    return actions;

  const int n_greedy = static_cast<int>(greedy.size());
  Matrix tau_matrix = distributional ? Matrix(n_greedy, k) : Matrix(n_greedy, 0);
  std::copy(taus.begin(), taus.end(), tau_matrix.data());
  const Matrix q = action_values(pack_observations(greedy), tau_matrix);
  for (int i = 0; i < n_greedy; ++i)
    actions[greedy_index[i]] = argmax_lowest(std::span<const double>(q.row(i).data(), n_actions));
  return actions;
}

std::string Policy::checkpoint_header() const
{
  nlohmann::json header;
  header["kind"] = "terl-policy";
  header["variant"] = std::string(variant_name(cfg_.variant));
  header["policy"] = to_json(cfg_);
  return header.dump();
}

void save_policy(const Policy& policy, const std::string& path)
{
  nn::write_checkpoint(path, policy.checkpoint_header(), policy.params());
}

Policy load_policy(const std::string& path, std::optional<Variant> expected)
{
  auto ckpt = nn::read_checkpoint(path);
  nlohmann::json header;
  try
  {
    header = nlohmann::json::parse(ckpt.header);
  }
  catch (const nlohmann::json::exception& e)
  {
    throw nn::CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  if (header.value("kind", "") != "terl-policy" || !header.contains("policy"))
    throw nn::CheckpointError("checkpoint is not a policy checkpoint");
  const auto variant = parse_variant(header.value("variant", ""));
  if (!variant)
    throw nn::CheckpointError("checkpoint records an unknown variant");
  PolicyConfig cfg = policy_config_from_json(header["policy"]);
  if (cfg.variant != *variant)
    throw nn::CheckpointError("checkpoint header variant is inconsistent");
  if (expected && *expected != *variant)
    throw nn::CheckpointError("checkpoint variant '" + std::string(variant_name(*variant)) +
                              "' does not match requested '" +
                              std::string(variant_name(*expected)) + "'");
  return Policy(cfg, std::move(ckpt.params));
}

} // namespace terl
