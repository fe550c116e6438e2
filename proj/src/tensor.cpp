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

#include "terl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace terl::nn {

namespace {

void require(bool ok, const char* what)
{
  if (!ok)
    throw std::invalid_argument(what);
}

} // namespace

// ParamStore

Parameter& ParamStore::add(const std::string& name, Matrix init)
{
  require(!index_.contains(name), "duplicate parameter name");
  Parameter p;
  p.name = name;
  p.grad = Matrix::Zero(init.rows(), init.cols());
  p.adam_m = Matrix::Zero(init.rows(), init.cols());
  p.adam_v = Matrix::Zero(init.rows(), init.cols());
  p.value = std::move(init);
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return params_.back();
}

bool ParamStore::contains(std::string_view name) const
{
  return index_.contains(std::string(name));
}

std::size_t ParamStore::index_of(std::string_view name) const
{
  auto it = index_.find(std::string(name));
  if (it == index_.end())
    throw std::out_of_range("unknown parameter " + std::string(name));
  return it->second;
}

Parameter& ParamStore::at(std::string_view name)
{
  return params_[index_of(name)];
}

const Parameter& ParamStore::at(std::string_view name) const
{
  return params_[index_of(name)];
}

std::size_t ParamStore::scalar_count() const
{
  std::size_t n = 0;
  for (const auto& p : params_)
    n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParamStore::zero_grad()
{
  for (auto& p : params_)
    p.grad.setZero();
}

double ParamStore::grad_norm() const
{
  double ss = 0.0;
  for (const auto& p : params_)
    ss += p.grad.squaredNorm();
  return std::sqrt(ss);
}

void ParamStore::scale_grad(double factor)
{
  for (auto& p : params_)
    p.grad *= factor;
}

void ParamStore::copy_values_from(const ParamStore& other)
{
  require(other.params_.size() == params_.size(), "parameter stores differ in size");
  for (std::size_t i = 0; i < params_.size(); ++i)
  {
    require(params_[i].name == other.params_[i].name, "parameter names differ");
    require(params_[i].value.rows() == other.params_[i].value.rows() &&
              params_[i].value.cols() == other.params_[i].value.cols(),
            "parameter shapes differ");
    params_[i].value = other.params_[i].value;
  }
}

void ParamStore::round_to_float()
{
  for (auto& p : params_)
    p.value = p.value.unaryExpr([](double x) { return static_cast<double>(static_cast<float>(x)); });
}

bool ParamStore::values_identical(const ParamStore& other) const
{
  if (other.params_.size() != params_.size())
    return false;
  for (std::size_t i = 0; i < params_.size(); ++i)
  {
    const auto& a = params_[i];
    const auto& b = other.params_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols())
      return false;
    if (std::memcmp(a.value.data(), b.value.data(), sizeof(double) * a.value.size()) != 0)
      return false;
  }
  return true;
}

std::vector<double> ParamStore::flat_values() const
{
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& p : params_)
    out.insert(out.end(), p.value.data(), p.value.data() + p.value.size());
  return out;
}

std::vector<double> ParamStore::flat_grads() const
{
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& p : params_)
    out.insert(out.end(), p.grad.data(), p.grad.data() + p.grad.size());
  return out;
}

void ParamStore::set_flat_values(const std::vector<double>& flat)
{
  require(flat.size() == scalar_count(), "flat parameter vector has wrong length");
  std::size_t offset = 0;
  for (auto& p : params_)
  {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), p.value.size(), p.value.data());
    offset += static_cast<std::size_t>(p.value.size());
  }
}

void adam_step(ParamStore& store, double lr, double beta1, double beta2, double eps)
{
  ++store.adam_steps_;
  const double t = static_cast<double>(store.adam_steps_);
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  for (auto& p : store.params_)
  {
    p.adam_m = beta1 * p.adam_m + (1.0 - beta1) * p.grad;
    p.adam_v = beta2 * p.adam_v + (1.0 - beta2) * p.grad.cwiseProduct(p.grad);
    const auto m_hat = p.adam_m.array() / c1;
    const auto v_hat = p.adam_v.array() / c2;
    p.value.array() -= lr * m_hat / (v_hat.sqrt() + eps);
  }
}

// Graph

Var Graph::constant(Matrix value)
{
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

Var Graph::param(const ParamStore& store, std::string_view name)
{
  const std::size_t idx = store.index_of(name);
  Node n;
  n.value = store.params()[idx].value;
  n.requires_grad = track_;
  n.store = &store;
  n.param_index = idx;
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

Var Graph::emit(Matrix value, std::initializer_list<Var> inputs, Backward backward)
{
  return emit(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Graph::emit(Matrix value, const std::vector<Var>& inputs, Backward backward)
{
  Node n;
  n.value = std::move(value);
  if (track_)
  {
    n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                  [&](Var v) { return nodes_[v.id].requires_grad; });
    if (n.requires_grad)
      n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

Matrix& Graph::grad_acc(Var v)
{
  Node& n = nodes_[v.id];
  if (n.grad.size() == 0)
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Graph::backward(Var output)
{
  require(value(output).size() == 1, "backward(output) requires a 1x1 output");
  backward(output, Matrix::Ones(1, 1));
}

void Graph::backward(Var output, const Matrix& seed)
{
  require(track_, "graph was built without gradient tracking");
  require(seed.rows() == value(output).rows() && seed.cols() == value(output).cols(),
          "seed shape mismatch");
  for (auto& n : nodes_)
    n.grad.resize(0, 0);
  grad_acc(output) = seed;
  for (int i = output.id; i >= 0; --i)
  {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || !n.requires_grad)
      continue;
    if (n.backward)
      n.backward(*this, i);
    else if (n.store)
      const_cast<ParamStore*>(n.store)->params()[n.param_index].grad += n.grad;
  }
}

// Ops

Var matmul(Graph& g, Var a, Var b)
{
  const Matrix& A = g.value(a);
  const Matrix& B = g.value(b);
  require(A.cols() == B.rows(), "matmul: inner extents differ");
  Matrix out(A.rows(), B.cols());
  out.noalias() = A * B;
  return g.emit(std::move(out), {a, b}, [a, b](Graph& g, int self) {
    const Matrix& G = g.grad_of(self);
    if (g.requires_grad(a))
      g.grad_acc(a).noalias() += G * g.value(b).transpose();
    if (g.requires_grad(b))
      g.grad_acc(b).noalias() += g.value(a).transpose() * G;
  });
}

Var add(Graph& g, Var a, Var b)
{
  const Matrix& A = g.value(a);
  const Matrix& B = g.value(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "add: shape mismatch");
  return g.emit(A + B, {a, b}, [a, b](Graph& g, int self) {
    if (g.requires_grad(a))
      g.grad_acc(a) += g.grad_of(self);
    if (g.requires_grad(b))
      g.grad_acc(b) += g.grad_of(self);
  });
}

Var add_row(Graph& g, Var x, Var bias)
{
  const Matrix& X = g.value(x);
  const Matrix& B = g.value(bias);
  require(B.rows() == 1 && B.cols() == X.cols(), "add_row: bias must be 1 x cols");
  Matrix out = X.rowwise() + B.row(0);
  return g.emit(std::move(out), {x, bias}, [x, bias](Graph& g, int self) {
    const Matrix& G = g.grad_of(self);
    if (g.requires_grad(x))
      g.grad_acc(x) += G;
    if (g.requires_grad(bias))
      g.grad_acc(bias) += G.colwise().sum();
  });
}

Var dense(Graph& g, Var x, Var weight, Var bias)
{
  const Matrix& X = g.value(x);
  const Matrix& W = g.value(weight);
  const Matrix& B = g.value(bias);
  require(X.cols() == W.rows(), "dense: input width does not match weight rows");
  require(B.rows() == 1 && B.cols() == W.cols(), "dense: bias must be 1 x fan_out");
  Matrix out(X.rows(), W.cols());
  out.noalias() = X * W;
  out.rowwise() += B.row(0);
  return g.emit(std::move(out), {x, weight, bias}, [x, weight, bias](Graph& g, int self) {
    const Matrix& G = g.grad_of(self);
    if (g.requires_grad(x))
      g.grad_acc(x).noalias() += G * g.value(weight).transpose();
    if (g.requires_grad(weight))
      g.grad_acc(weight).noalias() += g.value(x).transpose() * G;
    if (g.requires_grad(bias))
      g.grad_acc(bias) += G.colwise().sum();
  });
}

Var relu(Graph& g, Var x)
{
  Matrix out = g.value(x).cwiseMax(0.0);
  return g.emit(std::move(out), {x}, [x](Graph& g, int self) {
    const Matrix& X = g.value(x);
    g.grad_acc(x).array() += (X.array() > 0.0).select(g.grad_of(self).array(), 0.0);
  });
}

Var mul(Graph& g, Var a, Var b)
{
  const Matrix& A = g.value(a);
  const Matrix& B = g.value(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "mul: shape mismatch");
  return g.emit(A.cwiseProduct(B), {a, b}, [a, b](Graph& g, int self) {
    const Matrix& G = g.grad_of(self);
    if (g.requires_grad(a))
      g.grad_acc(a) += G.cwiseProduct(g.value(b));
    if (g.requires_grad(b))
      g.grad_acc(b) += G.cwiseProduct(g.value(a));
  });
}

Var scale(Graph& g, Var x, double factor)
{
  return g.emit(g.value(x) * factor, {x}, [x, factor](Graph& g, int self) {
    g.grad_acc(x) += g.grad_of(self) * factor;
  });
}

Var scale_rows(Graph& g, Var x, std::vector<double> factors)
{
  const Matrix& X = g.value(x);
  require(static_cast<Eigen::Index>(factors.size()) == X.rows(), "scale_rows: one factor per row");
  Matrix out = X;
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    out.row(r) *= factors[r];
  return g.emit(std::move(out), {x}, [x, factors = std::move(factors)](Graph& g, int self) {
    const Matrix& G = g.grad_of(self);
    Matrix& acc = g.grad_acc(x);
    for (Eigen::Index r = 0; r < G.rows(); ++r)
      acc.row(r) += G.row(r) * factors[r];
  });
}

Var concat_cols(Graph& g, const std::vector<Var>& parts)
{
  require(!parts.empty(), "concat_cols: no inputs");
  const Eigen::Index rows = g.value(parts[0]).rows();
  Eigen::Index cols = 0;
  for (Var p : parts)
  {
    require(g.value(p).rows() == rows, "concat_cols: row counts differ");
    cols += g.value(p).cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (Var p : parts)
  {
    out.middleCols(c, g.value(p).cols()) = g.value(p);
    c += g.value(p).cols();
  }
  return g.emit(std::move(out), parts, [parts](Graph& g, int self) {
    const Matrix& G = g.grad_of(self);
    Eigen::Index c = 0;
    for (Var p : parts)
    {
      const Eigen::Index w = g.value(p).cols();
      if (g.requires_grad(p))
        g.grad_acc(p) += G.middleCols(c, w);
      c += w;
    }
  });
}

Var concat_rows(Graph& g, const std::vector<Var>& parts)
{
  require(!parts.empty(), "concat_rows: no inputs");
  const Eigen::Index cols = g.value(parts[0]).cols();
  Eigen::Index rows = 0;
  for (Var p : parts)
  {
    require(g.value(p).cols() == cols || g.value(p).rows() == 0, "concat_rows: widths differ");
    rows += g.value(p).rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (Var p : parts)
  {
    if (g.value(p).rows() == 0)
      continue;
    out.middleRows(r, g.value(p).rows()) = g.value(p);
    r += g.value(p).rows();
  }
  return g.emit(std::move(out), parts, [parts](Graph& g, int self) {
    const Matrix& G = g.grad_of(self);
    Eigen::Index r = 0;
    for (Var p : parts)
    {
      const Eigen::Index h = g.value(p).rows();
      if (h > 0 && g.requires_grad(p))
        g.grad_acc(p) += G.middleRows(r, h);
      r += h;
    }
  });
}

Var gather_rows(Graph& g, Var x, std::vector<int> rows)
{
  const Matrix& X = g.value(x);
  Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
  {
    require(rows[i] >= 0 && rows[i] < X.rows(), "gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  }
  return g.emit(std::move(out), {x}, [x, rows = std::move(rows)](Graph& g, int self) {
    const Matrix& G = g.grad_of(self);
    Matrix& acc = g.grad_acc(x);
    for (std::size_t i = 0; i < rows.size(); ++i)
      acc.row(rows[i]) += G.row(static_cast<Eigen::Index>(i));
  });
}

Var repeat_rows(Graph& g, Var x, int times)
{
  require(times >= 1, "repeat_rows: times must be positive");
  const Matrix& X = g.value(x);
  Matrix out(X.rows() * times, X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r)
    out.middleRows(r * times, times).rowwise() = X.row(r);
  return g.emit(std::move(out), {x}, [x, times](Graph& g, int self) {
    const Matrix& G = g.grad_of(self);
    Matrix& acc = g.grad_acc(x);
    for (Eigen::Index r = 0; r < acc.rows(); ++r)
      acc.row(r) += G.middleRows(r * times, times).colwise().sum();
  });
}

Var segment_max(Graph& g, Var x, std::vector<Segment> segments)
{
  const Matrix& X = g.value(x);
  const Eigen::Index cols = X.cols();
  Matrix out(static_cast<Eigen::Index>(segments.size()), cols);
  std::vector<int> argmax(segments.size() * static_cast<std::size_t>(cols));
  for (std::size_t s = 0; s < segments.size(); ++s)
  {
    const Segment seg = segments[s];
    require(seg.size() > 0, "segment_max: empty segment");
    require(seg.begin >= 0 && seg.end <= X.rows(), "segment_max: segment out of range");
    for (Eigen::Index c = 0; c < cols; ++c)
    {
      int best = seg.begin;
      for (int r = seg.begin + 1; r < seg.end; ++r)
        if (X(r, c) > X(best, c))
          best = r;
      argmax[s * cols + c] = best;
      out(static_cast<Eigen::Index>(s), c) = X(best, c);
    }
  }
  return g.emit(std::move(out), {x}, [x, argmax = std::move(argmax), cols](Graph& g, int self) {
    const Matrix& G = g.grad_of(self);
    Matrix& acc = g.grad_acc(x);
    for (Eigen::Index s = 0; s < G.rows(); ++s)
      for (Eigen::Index c = 0; c < cols; ++c)
        acc(argmax[s * cols + c], c) += G(s, c);
  });
}

Var segment_mean(Graph& g, Var x, std::vector<Segment> segments)
{
  const Matrix& X = g.value(x);
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(segments.size()), X.cols());
  for (std::size_t s = 0; s < segments.size(); ++s)
  {
    const Segment seg = segments[s];
    require(seg.begin >= 0 && seg.end <= X.rows() && seg.size() >= 0,
            "segment_mean: segment out of range");
    if (seg.size() > 0)
      out.row(static_cast<Eigen::Index>(s)) =
        X.middleRows(seg.begin, seg.size()).colwise().sum() / static_cast<double>(seg.size());
  }
  return g.emit(std::move(out), {x}, [x, segments = std::move(segments)](Graph& g, int self) {
    const Matrix& G = g.grad_of(self);
    Matrix& acc = g.grad_acc(x);
    for (std::size_t s = 0; s < segments.size(); ++s)
    {
      const Segment seg = segments[s];
      if (seg.size() == 0)
        continue;
      acc.middleRows(seg.begin, seg.size()).rowwise() +=
        G.row(static_cast<Eigen::Index>(s)) / static_cast<double>(seg.size());
    }
  });
}

Var sum(Graph& g, Var x)
{
  Matrix out(1, 1);
  out(0, 0) = g.value(x).sum();
  return g.emit(std::move(out), {x}, [x](Graph& g, int self) {
    g.grad_acc(x).array() += g.grad_of(self)(0, 0);
  });
}

Var ragged_attention(Graph& g, Var q, Var k, Var v, std::vector<Segment> q_segments,
                     std::vector<Segment> kv_segments, int heads)
{
  const Matrix& Q = g.value(q);
  const Matrix& K = g.value(k);
  const Matrix& V = g.value(v);
  require(q_segments.size() == kv_segments.size(), "ragged_attention: segment lists differ");
  require(Q.cols() == K.cols() && K.cols() == V.cols(), "ragged_attention: widths differ");
  require(K.rows() == V.rows(), "ragged_attention: key and value rows differ");
  require(heads >= 1 && Q.cols() % heads == 0, "ragged_attention: width not divisible by heads");
  const Eigen::Index dk = Q.cols() / heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  Matrix out = Matrix::Zero(Q.rows(), Q.cols());
  // weights[s * heads + h] holds the (nq x nk) softmax for segment s, head h
  std::vector<Matrix> weights(q_segments.size() * static_cast<std::size_t>(heads));
  for (std::size_t s = 0; s < q_segments.size(); ++s)
  {
    const Segment qs = q_segments[s];
    const Segment ks = kv_segments[s];
    require(qs.begin >= 0 && qs.end <= Q.rows() && ks.begin >= 0 && ks.end <= K.rows(),
            "ragged_attention: segment out of range");
    if (ks.size() == 0 || qs.size() == 0)
      continue;
    for (int h = 0; h < heads; ++h)
    {
      const auto Qh = Q.block(qs.begin, h * dk, qs.size(), dk);
      const auto Kh = K.block(ks.begin, h * dk, ks.size(), dk);
      const auto Vh = V.block(ks.begin, h * dk, ks.size(), dk);
      Matrix W(qs.size(), ks.size());
      W.noalias() = Qh * Kh.transpose();
      W *= inv_sqrt_dk;
      for (Eigen::Index r = 0; r < W.rows(); ++r)
      {
        const double m = W.row(r).maxCoeff();
        W.row(r) = (W.row(r).array() - m).exp();
        W.row(r) /= W.row(r).sum();
      }
      out.block(qs.begin, h * dk, qs.size(), dk).noalias() = W * Vh;
      weights[s * heads + h] = std::move(W);
    }
  }

  return g.emit(
    std::move(out), {q, k, v},
    [q, k, v, q_segments = std::move(q_segments), kv_segments = std::move(kv_segments), heads,
     dk, inv_sqrt_dk, weights = std::move(weights)](Graph& g, int self) {
      const Matrix& G = g.grad_of(self);
      const Matrix& Q = g.value(q);
      const Matrix& K = g.value(k);
      const Matrix& V = g.value(v);
      const bool need_q = g.requires_grad(q);
      const bool need_k = g.requires_grad(k);
      const bool need_v = g.requires_grad(v);
      Matrix* dQ = need_q ? &g.grad_acc(q) : nullptr;
      Matrix* dK = need_k ? &g.grad_acc(k) : nullptr;
      Matrix* dV = need_v ? &g.grad_acc(v) : nullptr;
      for (std::size_t s = 0; s < q_segments.size(); ++s)
      {
        const Segment qs = q_segments[s];
        const Segment ks = kv_segments[s];
        if (ks.size() == 0 || qs.size() == 0)
          continue;
        for (int h = 0; h < heads; ++h)
        {
          const Matrix& W = weights[s * heads + h];
          const auto Gh = G.block(qs.begin, h * dk, qs.size(), dk);
          const auto Vh = V.block(ks.begin, h * dk, ks.size(), dk);
          if (dV)
            dV->block(ks.begin, h * dk, ks.size(), dk).noalias() += W.transpose() * Gh;
          if (!dQ && !dK)
            continue;
          Matrix dW(qs.size(), ks.size());
          dW.noalias() = Gh * Vh.transpose();
          // softmax backward: dS = W * (dW - rowsum(dW * W))
          Matrix dS = W.cwiseProduct(dW);
          const Eigen::VectorXd row_dot = dS.rowwise().sum();
          dS -= W.cwiseProduct(row_dot.replicate(1, W.cols()));
          dS *= inv_sqrt_dk;
          if (dQ)
            dQ->block(qs.begin, h * dk, qs.size(), dk).noalias() +=
              dS * K.block(ks.begin, h * dk, ks.size(), dk);
          if (dK)
            dK->block(ks.begin, h * dk, ks.size(), dk).noalias() +=
              dS.transpose() * Q.block(qs.begin, h * dk, qs.size(), dk);
        }
      }
    });
}

Var masked_max_pool(Graph& g, Var x, const Mask& row_mask)
{
  require(static_cast<Eigen::Index>(row_mask.size()) == g.value(x).rows(),
          "masked_max_pool: mask length must equal row count");
  std::vector<int> rows;
  for (std::size_t i = 0; i < row_mask.size(); ++i)
    if (row_mask[i])
      rows.push_back(static_cast<int>(i));
  require(!rows.empty(), "masked_max_pool: no valid rows");
  const int n = static_cast<int>(rows.size());
  return segment_max(g, gather_rows(g, x, std::move(rows)), {Segment{0, n}});
}

// Layers

Matrix glorot_uniform(int rows, int cols, Rng& rng)
{
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = rng.uniform(-limit, limit);
  return m;
}

void add_dense_params(ParamStore& store, const std::string& prefix, int fan_in, int fan_out,
                      Rng& rng)
{
  store.add(prefix + ".w", glorot_uniform(fan_in, fan_out, rng));
  store.add(prefix + ".b", Matrix::Zero(1, fan_out));
}

Var dense_layer(Graph& g, const ParamStore& store, const std::string& prefix, Var x)
{
  return dense(g, x, g.param(store, prefix + ".w"), g.param(store, prefix + ".b"));
}

void add_attention_params(ParamStore& store, const std::string& prefix, int dim, Rng& rng)
{
  for (const char* name : {".q", ".k", ".v", ".o"})
    add_dense_params(store, prefix + name, dim, dim, rng);
}

Var multi_head_attention(Graph& g, const ParamStore& store, const std::string& prefix, Var q_in,
                         Var kv_in, const std::vector<Segment>& q_segments,
                         const std::vector<Segment>& kv_segments, int heads)
{
  const Var q = dense_layer(g, store, prefix + ".q", q_in);
  const Var k = dense_layer(g, store, prefix + ".k", kv_in);
  const Var v = dense_layer(g, store, prefix + ".v", kv_in);
  const Var attended = ragged_attention(g, q, k, v, q_segments, kv_segments, heads);
  return dense_layer(g, store, prefix + ".o", attended);
}

Var multi_head_attention(Graph& g, const ParamStore& store, const std::string& prefix, Var q_in,
                         Var kv_in, const Mask& kv_mask, int heads)
{
  require(static_cast<Eigen::Index>(kv_mask.size()) == g.value(kv_in).rows(),
          "multi_head_attention: mask length must equal key rows");
  std::vector<int> rows;
  for (std::size_t i = 0; i < kv_mask.size(); ++i)
    if (kv_mask[i])
      rows.push_back(static_cast<int>(i));
  const int n = static_cast<int>(rows.size());
  const Var kv = gather_rows(g, kv_in, std::move(rows));
  const int nq = static_cast<int>(g.value(q_in).rows());
  return multi_head_attention(g, store, prefix, q_in, kv, {Segment{0, nq}}, {Segment{0, n}},
                              heads);
}

// Plain numerics

Matrix masked_softmax(const Matrix& logits, const Matrix& mask)
{
  require(logits.rows() == mask.rows() && logits.cols() == mask.cols(),
          "masked_softmax: mask shape mismatch");
  Matrix out = Matrix::Zero(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r)
  {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < logits.cols(); ++c)
      if (mask(r, c) != 0.0)
        m = std::max(m, logits(r, c));
    if (m == -std::numeric_limits<double>::infinity())
      continue;
    double total = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c)
      if (mask(r, c) != 0.0)
      {
        out(r, c) = std::exp(logits(r, c) - m);
        total += out(r, c);
      }
    out.row(r) /= total;
  }
  return out;
}

double huber(double u, double kappa)
{
  const double a = std::abs(u);
  return a <= kappa ? 0.5 * u * u : kappa * (a - 0.5 * kappa);
}

double huber_derivative(double u, double kappa)
{
  if (std::abs(u) <= kappa)
    return u;
  return u > 0.0 ? kappa : -kappa;
}

} // namespace terl::nn
