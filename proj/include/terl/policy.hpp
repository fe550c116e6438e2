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
#include "terl/rng.hpp"
#include "terl/tensor.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace terl {

enum class Variant { Terl, TerlNoRe, TerlNoTs, IqnAvgPool, DqnAvgPool, MeanEmbedding };

/// Canonical name (terl, terl_no_re, terl_no_ts, iqn_avgpool, dqn_avgpool,
/// mean_embedding).
std::string_view variant_name(Variant v);
/// Accepts canonical names and the short CLI spellings (terl-no-re, iqn, ...).
std::optional<Variant> parse_variant(std::string_view name);
bool is_distributional(Variant v);

struct PolicyConfig
{
  int latent_dim = 64;
  int heads = 4;
  int relation_layers = 2;
  int quantile_samples = 8;
  int target_quantile_samples = 8;
  int eval_quantiles = 32;
  int quantile_embedding_dim = 64;
  double huber_kappa = 1.0;
  int target_heads = 1;
  bool residual = true;
  Variant variant = Variant::Terl;
  ObservationCaps caps;
  int num_accelerations = 3;
  int num_angular_velocities = 3;

  int num_actions() const { return num_accelerations * num_angular_velocities; }
  int entity_rows() const { return 1 + caps.team + caps.obstacles + caps.evaders; }
  void validate() const;
};

/// Joint action index = acceleration_index * |omega set| + omega_index.
Action decode_action(int index, const WorldConfig& cfg);

/// Entity latent rows in the order [ego, teammates, obstacles, evaders],
/// padded to the full capacity with a validity mask.
struct LatentSet
{
  nn::Matrix rows;
  std::vector<EntityKind> kinds;
  nn::Mask mask;
};

struct QuantileBatch
{
  std::vector<double> taus;
  nn::Matrix quantiles; // taus.size() x num_actions
  std::vector<double> q_values() const;
};

/// Several observation bundles stacked for one forward pass. Only valid
/// entity rows are kept; each sample owns a segment of each kind.
struct PackedBatch
{
  int batch = 0;
  nn::Matrix ego;
  nn::Matrix team;
  nn::Matrix obstacles;
  nn::Matrix evaders;
  std::vector<nn::Segment> team_segments;
  std::vector<nn::Segment> obstacle_segments;
  std::vector<nn::Segment> evader_segments;
};

PackedBatch pack_observations(std::span<const ObservationBundle* const> bundles);
PackedBatch pack_observations(const ObservationBundle& bundle);

/// Deterministic mid-point quantile grid (i + 0.5) / n.
std::vector<double> quantile_grid(int n);

/// The shared pursuer policy network for every variant.
class Policy
{
public:
  Policy(const PolicyConfig& cfg, std::uint64_t seed);
  /// Adopts existing parameters; names and shapes must match cfg.
  Policy(const PolicyConfig& cfg, nn::ParamStore params);

  const PolicyConfig& config() const { return cfg_; }
  Variant variant() const { return cfg_.variant; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // Batched graph construction, used by training.

  /// Head input representation, one row per sample.
  nn::Var representation(nn::Graph& g, const PackedBatch& batch) const;
  /// Quantile values (B*K x A, sample-major) for distributional variants, or
  /// Q-values (B x A) for dqn_avgpool. taus is B x K; ignored by dqn.
  nn::Var head(nn::Graph& g, nn::Var rep, const nn::Matrix& taus) const;
  /// Mean-over-tau action values, B x A.
  nn::Matrix action_values(const PackedBatch& batch, const nn::Matrix& taus) const;

  // Per-observation stages.

  LatentSet embed_observations(const ObservationBundle& obs) const;
  LatentSet add_type_embeddings(const LatentSet& latent) const;
  LatentSet relation_extraction(const LatentSet& latent) const;
  std::vector<double> target_selection(const LatentSet& m) const;
  std::vector<double> quantile_embed(double tau) const;
  QuantileBatch action_quantiles(const std::vector<double>& rep, const std::vector<double>& taus) const;
  std::vector<double> forward_variant(const ObservationBundle& obs) const;
  std::vector<double> q_values(const ObservationBundle& obs, const std::vector<double>& taus) const;

  /// Epsilon-greedy joint action index from one pursuer's own observation.
  /// Greedy actions use K fresh taus, or the evaluation grid in eval mode;
  /// ties go to the lowest index.
  int select_action(const ObservationBundle& obs, double epsilon, Rng& rng, bool eval_mode) const;

  /// Same decision rule applied independently to each bundle, with one
  /// batched forward pass.
  std::vector<int> select_actions(std::span<const ObservationBundle* const> bundles,
                                  double epsilon, Rng& rng, bool eval_mode) const;

  /// Width of the head input for this variant.
  int representation_dim() const;

  std::string checkpoint_header() const;

private:
  void init_params(Rng& rng);
  nn::Var embed(nn::Graph& g, const std::string& kind, const nn::Matrix& x) const;
  nn::Var relation_stack(nn::Graph& g, nn::Var e, const std::vector<nn::Segment>& samples) const;
  nn::Var target_attention(nn::Graph& g, nn::Var m, const std::vector<int>& ego_rows,
                           const std::vector<nn::Segment>& samples,
                           const std::vector<int>& evader_rows,
                           const std::vector<nn::Segment>& evader_segments) const;

  PolicyConfig cfg_;
  nn::ParamStore params_;
};

/// Writes the policy (config header + float32 parameters).
void save_policy(const Policy& policy, const std::string& path);
/// Loads a checkpoint; when expected is set, a different variant is rejected
/// with nn::CheckpointError.
Policy load_policy(const std::string& path, std::optional<Variant> expected = std::nullopt);

int argmax_lowest(std::span<const double> values);

} // namespace terl
