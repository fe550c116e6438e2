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

// Minimal reverse-mode differentiable kernel over 2D row-major matrices.
//
// A Graph records values and backward closures for one forward pass. Leaves
// are either constants or parameters bound to a ParamStore; Graph::backward
// accumulates parameter gradients into the store.
//
// Ragged batches are handled with row segments: a set of samples with
// different entity counts is stacked into one matrix and each sample owns a
// contiguous [begin, end) row range. Masked (padded) entities never enter a
// segment, so they cannot influence any output.

#include "terl/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace terl::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mask = std::vector<std::uint8_t>;

struct Segment
{
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
};

struct Parameter
{
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;
};

/// Insertion-ordered named parameters with gradient and Adam moment slots.
class ParamStore
{
public:
  Parameter& add(const std::string& name, Matrix init);

  bool contains(std::string_view name) const;
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  double grad_norm() const;
  void scale_grad(double factor);

  /// Copies values from a store with identical names and shapes.
  void copy_values_from(const ParamStore& other);

  /// Rounds every value to the nearest 32-bit float. Keeps in-memory
  /// parameters exactly representable in the checkpoint payload.
  void round_to_float();

  bool values_identical(const ParamStore& other) const;

  std::int64_t adam_steps() const { return adam_steps_; }

  /// Flattened view helpers used by gradient checks.
  std::vector<double> flat_values() const;
  std::vector<double> flat_grads() const;
  void set_flat_values(const std::vector<double>& flat);

private:
  friend void adam_step(ParamStore&, double, double, double, double);

  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
  std::int64_t adam_steps_ = 0;
};

/// Bias-corrected Adam update from the stored gradients.
void adam_step(ParamStore& store, double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

struct Var
{
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Graph
{
public:
  using Backward = std::function<void(Graph&, int self)>;

  explicit Graph(bool track_gradients = true) : track_(track_gradients) {}

  Var constant(Matrix value);
  /// Parameter leaf. Backward passes accumulate into the store's gradient
  /// slots, which are mutable state even through a const store.
  Var param(const ParamStore& store, std::string_view name);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient of the last backward pass; zero-sized if none reached v.
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  bool tracking() const { return track_; }
  std::size_t size() const { return nodes_.size(); }

  /// Backpropagates from a 1x1 output.
  void backward(Var output);
  /// Backpropagates a seed gradient of output's shape.
  void backward(Var output, const Matrix& seed);

  // Op-construction interface.
  Var emit(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var emit(Matrix value, const std::vector<Var>& inputs, Backward backward);
  /// Gradient accumulator for an input, zero-initialized on first use.
  Matrix& grad_acc(Var v);
  const Matrix& grad_of(int self) const { return nodes_[self].grad; }

private:
  struct Node
  {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
    const ParamStore* store = nullptr;
    std::size_t param_index = 0;
  };

  bool track_;
  std::vector<Node> nodes_;
};

// Differentiable ops

Var matmul(Graph& g, Var a, Var b);
Var add(Graph& g, Var a, Var b);
/// Adds the 1xN row `bias` to every row of x.
Var add_row(Graph& g, Var x, Var bias);
/// x W + b
Var dense(Graph& g, Var x, Var weight, Var bias);
Var relu(Graph& g, Var x);
Var mul(Graph& g, Var a, Var b);
Var scale(Graph& g, Var x, double factor);
/// Multiplies row i by factors[i].
Var scale_rows(Graph& g, Var x, std::vector<double> factors);
Var concat_cols(Graph& g, const std::vector<Var>& parts);
Var concat_rows(Graph& g, const std::vector<Var>& parts);
Var gather_rows(Graph& g, Var x, std::vector<int> rows);
/// Row r of x becomes rows [r*times, (r+1)*times).
Var repeat_rows(Graph& g, Var x, int times);
/// Per-segment column-wise max. Empty segments are a contract violation.
Var segment_max(Graph& g, Var x, std::vector<Segment> segments);
/// Per-segment column-wise mean; empty segments produce a zero row.
Var segment_mean(Graph& g, Var x, std::vector<Segment> segments);
Var sum(Graph& g, Var x);

/// Scaled dot-product attention per segment and head. Query rows of
/// q_segments[s] attend over key/value rows of kv_segments[s]; a segment
/// with no keys yields zero output rows.
Var ragged_attention(Graph& g, Var q, Var k, Var v, std::vector<Segment> q_segments,
                     std::vector<Segment> kv_segments, int heads);

/// Max-pool over the rows of x whose mask entry is 1.
Var masked_max_pool(Graph& g, Var x, const Mask& row_mask);

// Layers built from the ops above

Matrix glorot_uniform(int rows, int cols, Rng& rng);

/// Registers prefix.w / prefix.b for a fan_in -> fan_out dense layer.
void add_dense_params(ParamStore& store, const std::string& prefix, int fan_in, int fan_out,
                      Rng& rng);
Var dense_layer(Graph& g, const ParamStore& store, const std::string& prefix, Var x);

/// Registers query/key/value/output projections under prefix.
void add_attention_params(ParamStore& store, const std::string& prefix, int dim, Rng& rng);

/// Multi-head attention: project, attend per segment and head, concatenate
/// heads, then output-project.
Var multi_head_attention(Graph& g, const ParamStore& store, const std::string& prefix, Var q_in,
                         Var kv_in, const std::vector<Segment>& q_segments,
                         const std::vector<Segment>& kv_segments, int heads);

/// Single-segment convenience: every query row attends over the kv rows
/// whose mask entry is 1.
Var multi_head_attention(Graph& g, const ParamStore& store, const std::string& prefix, Var q_in,
                         Var kv_in, const Mask& kv_mask, int heads);

// Plain (non-graph) numerics

/// Row-wise softmax over entries whose mask is 1. Masked entries get exactly
/// zero weight; an all-masked row is all zeros.
Matrix masked_softmax(const Matrix& logits, const Matrix& mask);

double huber(double u, double kappa);
double huber_derivative(double u, double kappa);

} // namespace terl::nn
