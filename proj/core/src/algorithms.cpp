// Copyright 2026 The bicomp Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "bicomp/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bicomp/errors.hpp"

namespace bicomp {

Algorithm algorithm_from_string(std::string_view name) {
  if (name == "gd") return Algorithm::kGD;
  if (name == "ef21p") return Algorithm::kEF21P;
  if (name == "dcgd") return Algorithm::kDCGD;
  if (name == "diana") return Algorithm::kDIANA;
  if (name == "ef21p_dcgd") return Algorithm::kEF21P_DCGD;
  if (name == "ef21p_diana") return Algorithm::kEF21P_DIANA;
  throw ConfigError("unknown algorithm '" + std::string(name) +
                    "' (expected gd, ef21p, dcgd, diana, ef21p_dcgd or ef21p_diana)");
}

std::string_view to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::kGD: return "gd";
    case Algorithm::kEF21P: return "ef21p";
    case Algorithm::kDCGD: return "dcgd";
    case Algorithm::kDIANA: return "diana";
    case Algorithm::kEF21P_DCGD: return "ef21p_dcgd";
    case Algorithm::kEF21P_DIANA: return "ef21p_diana";
  }
  return "?";
}

bool uses_dual_compressor(Algorithm algo) {
  return algo == Algorithm::kDCGD || algo == Algorithm::kDIANA ||
         algo == Algorithm::kEF21P_DCGD || algo == Algorithm::kEF21P_DIANA;
}

bool uses_primal_compressor(Algorithm algo) {
  return algo == Algorithm::kEF21P || algo == Algorithm::kEF21P_DCGD ||
         algo == Algorithm::kEF21P_DIANA;
}

bool uses_gradient_shifts(Algorithm algo) {
  return algo == Algorithm::kDIANA || algo == Algorithm::kEF21P_DIANA;
}

AlgoState init_state(const Problem& problem, std::span<const double> x0, double gamma,
                     double beta, ShiftInit shift_init) {
  if (x0.size() != problem.dim())
    throw ConfigError("x0 has dimension " + std::to_string(x0.size()) + ", problem expects " +
                      std::to_string(problem.dim()));
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be positive");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be >= 0");
  const std::size_t n = problem.n_workers();
  AlgoState s;
  s.x.assign(x0.begin(), x0.end());
  s.w_server = s.x;
  s.w_workers.assign(n, s.x);
  s.h_workers.assign(n, DenseVector(problem.dim(), 0.0));
  if (shift_init == ShiftInit::kGradient)
    for (std::size_t i = 0; i < n; ++i) problem.grad_i(i, s.x, s.h_workers[i]);
  s.h_server.assign(problem.dim(), 0.0);
  mean_into(s.h_workers, s.h_server);
  s.gamma = gamma;
  s.beta = beta;
  return s;
}

GradientSource GradientSource::stochastic(std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  GradientSource g;
  g.batch_size_ = batch_size;
  g.seed_ = seed;
  return g;
}

void GradientSource::worker_grad(const Problem& problem, std::size_t worker,
                                 std::span<const double> x, std::uint64_t round,
                                 std::span<double> out) const {
  if (!batch_size_) {
    problem.grad_i(worker, x, out);
    return;
  }
  Rng rng(StreamKey{seed_, StreamRole::kSample, worker, round});
  problem.stochastic_grad_i(worker, x, *batch_size_, rng, out);
}

RoundContext attach_stochastic(RoundContext ctx, std::size_t batch_size, std::uint64_t seed) {
  ctx.gradients = GradientSource::stochastic(batch_size, seed);
  return ctx;
}

namespace {

std::size_t stored_total(const std::vector<SparseVector>& msgs) {
  std::size_t total = 0;
  for (const auto& m : msgs) total += m.stored();
  return total;
}

// Worker i evaluates its gradient at its own copy of the model shift.
void worker_gradients(const AlgoState& state, const RoundContext& ctx,
                      std::vector<DenseVector>& grads) {
  const Problem& p = *ctx.problem;
  const std::size_t n = p.n_workers();
  grads.assign(n, DenseVector(p.dim()));
  for_each_worker(ctx.pool, n, [&](std::size_t i) {
    ctx.gradients.worker_grad(p, i, state.w_workers[i], state.t, grads[i]);
  });
}

// Algorithms without a model shift broadcast the new model in full.
void broadcast_model(AlgoState& state, RoundMessages& msgs) {
  state.w_server = state.x;
  for (auto& w : state.w_workers) w = state.x;
  msgs.downlink = SparseVector::from_dense(state.x);
  msgs.downlink_assigns = true;
}

// w^{t+1} = w^t + C^P(x^{t+1} - w^t) on the server and every worker.
void primal_update(AlgoState& state, const RoundContext& ctx, RoundMessages& msgs) {
  const std::size_t d = state.x.size();
  DenseVector diff(d);
  for (std::size_t j = 0; j < d; ++j) diff[j] = state.x[j] - state.w_server[j];
  msgs.shift_gap_sq = norm_sq(diff);
  CompressorStream stream(*ctx.primal, ctx.seed, StreamRole::kPrimal, 0);
  SparseVector p = stream.compress(diff, state.t);
  if (ctx.primal->preserves_values()) {
    // Every kept coordinate of p equals x - w exactly, so replicas take the
    // coordinate of x^{t+1} itself; w then tracks x without rounding drift.
    for (std::size_t s = 0; s < p.indices.size(); ++s) p.values[s] = state.x[p.indices[s]];
    p.assign_to(state.w_server);
    for (auto& w : state.w_workers) p.assign_to(w);
    msgs.downlink_assigns = true;
  } else {
    p.add_to(state.w_server);
    for (auto& w : state.w_workers) p.add_to(w);
    msgs.downlink_assigns = false;
  }
  msgs.downlink = std::move(p);
  msgs.perturbation_sq = dist_sq(state.w_server, state.x);
}

void finish(AlgoState& state, const RoundContext& ctx, RoundMessages& msgs) {
  msgs.uplink_coords = stored_total(msgs.uplink);
  msgs.downlink_coords = msgs.downlink.stored();
  if (ctx.downlink_times_n) msgs.downlink_coords *= ctx.problem->n_workers();
  ++state.t;
}

void require_problem(const RoundContext& ctx) {
  if (ctx.problem == nullptr) throw ConfigError("round context has no problem");
}

// Uncompressed uplink: workers send dense gradients.
RoundMessages dense_uplink_step(AlgoState& state, const RoundContext& ctx) {
  require_problem(ctx);
  std::vector<DenseVector> grads;
  worker_gradients(state, ctx, grads);
  DenseVector g(state.x.size());
  mean_into(grads, g);
  gradient_step(state.x, state.gamma, g);
  RoundMessages msgs;
  msgs.uplink.reserve(grads.size());
  for (const auto& gi : grads) msgs.uplink.push_back(SparseVector::from_dense(gi));
  return msgs;
}

// g_i = C_i^D(grad f_i(w^t)); x^{t+1} = x^t - gamma * mean g_i.
RoundMessages dcgd_uplink_step(AlgoState& state, const RoundContext& ctx) {
  require_problem(ctx);
  const std::size_t n = ctx.problem->n_workers();
  std::vector<DenseVector> grads;
  worker_gradients(state, ctx, grads);
  RoundMessages msgs;
  msgs.uplink.resize(n);
  for_each_worker(ctx.pool, n, [&](std::size_t i) {
    CompressorStream stream(*ctx.dual, ctx.seed, StreamRole::kDual, i);
    msgs.uplink[i] = stream.compress(grads[i], state.t);
  });
  DenseVector g(state.x.size());
  mean_into(msgs.uplink, g);
  gradient_step(state.x, state.gamma, g);
  return msgs;
}

// m_i = C_i^D(grad f_i(w^t) - h_i); h_i += beta m_i; g = h + mean m_i;
// h += beta mean m_i; x^{t+1} = x^t - gamma g.
RoundMessages diana_uplink_step(AlgoState& state, const RoundContext& ctx) {
  require_problem(ctx);
  const std::size_t n = ctx.problem->n_workers();
  const std::size_t d = state.x.size();
  std::vector<DenseVector> grads;
  worker_gradients(state, ctx, grads);
  RoundMessages msgs;
  msgs.uplink.resize(n);
  for_each_worker(ctx.pool, n, [&](std::size_t i) {
    DenseVector& delta = grads[i];
    const DenseVector& h = state.h_workers[i];
    for (std::size_t j = 0; j < d; ++j) delta[j] -= h[j];
    CompressorStream stream(*ctx.dual, ctx.seed, StreamRole::kDual, i);
    msgs.uplink[i] = stream.compress(delta, state.t);
    msgs.uplink[i].add_to(state.h_workers[i], state.beta);
  });
  DenseVector m(d);
  mean_into(msgs.uplink, m);
  DenseVector g(d);
  for (std::size_t j = 0; j < d; ++j) g[j] = state.h_server[j] + m[j];
  axpy(state.beta, m, state.h_server);
  gradient_step(state.x, state.gamma, g);
  return msgs;
}

}  // namespace

RoundMessages gd_round(AlgoState& state, const RoundContext& ctx) {
  RoundMessages msgs = dense_uplink_step(state, ctx);
  broadcast_model(state, msgs);
  finish(state, ctx, msgs);
  return msgs;
}

RoundMessages ef21p_round(AlgoState& state, const RoundContext& ctx) {
  validate_compressors(Algorithm::kEF21P, ctx);
  RoundMessages msgs = dense_uplink_step(state, ctx);
  primal_update(state, ctx, msgs);
  finish(state, ctx, msgs);
  return msgs;
}

RoundMessages dcgd_round(AlgoState& state, const RoundContext& ctx) {
  validate_compressors(Algorithm::kDCGD, ctx);
  RoundMessages msgs = dcgd_uplink_step(state, ctx);
  broadcast_model(state, msgs);
  finish(state, ctx, msgs);
  return msgs;
}

RoundMessages diana_round(AlgoState& state, const RoundContext& ctx) {
  validate_compressors(Algorithm::kDIANA, ctx);
  RoundMessages msgs = diana_uplink_step(state, ctx);
  broadcast_model(state, msgs);
  finish(state, ctx, msgs);
  return msgs;
}

RoundMessages ef21p_dcgd_round(AlgoState& state, const RoundContext& ctx) {
  validate_compressors(Algorithm::kEF21P_DCGD, ctx);
  RoundMessages msgs = dcgd_uplink_step(state, ctx);
  primal_update(state, ctx, msgs);
  finish(state, ctx, msgs);
  return msgs;
}

RoundMessages ef21p_diana_round(AlgoState& state, const RoundContext& ctx) {
  validate_compressors(Algorithm::kEF21P_DIANA, ctx);
  RoundMessages msgs = diana_uplink_step(state, ctx);
  primal_update(state, ctx, msgs);
  finish(state, ctx, msgs);
  return msgs;
}

RoundMessages run_round(Algorithm algo, AlgoState& state, const RoundContext& ctx) {
  RoundMessages msgs;
  switch (algo) {
    case Algorithm::kGD: msgs = gd_round(state, ctx); break;
    case Algorithm::kEF21P: msgs = ef21p_round(state, ctx); break;
    case Algorithm::kDCGD: msgs = dcgd_round(state, ctx); break;
    case Algorithm::kDIANA: msgs = diana_round(state, ctx); break;
    case Algorithm::kEF21P_DCGD: msgs = ef21p_dcgd_round(state, ctx); break;
    case Algorithm::kEF21P_DIANA: msgs = ef21p_diana_round(state, ctx); break;
  }
  if (replication_gap(state) != 0.0)
    throw InvariantViolation("state replication: a worker copy of w differs from the server's "
                             "after round " + std::to_string(state.t));
  return msgs;
}

void validate_compressors(Algorithm algo, const RoundContext& ctx) {
  require_problem(ctx);
  const std::size_t d = ctx.problem->dim();
  const std::string name(to_string(algo));
  if (uses_dual_compressor(algo)) {
    if (!ctx.dual) throw ConfigError(name + " needs a dual (uplink) compressor");
    if (ctx.dual->d() != d)
      throw ConfigError("dual compressor has dimension " + std::to_string(ctx.dual->d()) +
                        ", problem has " + std::to_string(d));
    if (!ctx.dual->is_unbiased())
      throw ConfigError("class rule: the dual compressor of " + name +
                        " must be unbiased (class U(omega)); " + ctx.dual->describe() +
                        " is contractive only");
  }
  if (uses_primal_compressor(algo)) {
    if (!ctx.primal) throw ConfigError(name + " needs a primal (downlink) compressor");
    if (ctx.primal->d() != d)
      throw ConfigError("primal compressor has dimension " + std::to_string(ctx.primal->d()) +
                        ", problem has " + std::to_string(d));
    if (!ctx.primal->is_contractive())
      throw ConfigError("class rule: the primal compressor of " + name +
                        " must be contractive (class B(alpha)); " + ctx.primal->describe() +
                        " is unbiased only (use scaled_unbiased)");
  }
}

double replication_gap(const AlgoState& state) {
  double gap = 0.0;
  for (const auto& w : state.w_workers) gap = std::max(gap, max_abs_diff(w, state.w_server));
  return gap;
}

double shift_mean_gap(const AlgoState& state) {
  DenseVector mean(state.h_server.size());
  mean_into(state.h_workers, mean);
  return max_abs_diff(state.h_server, mean);
}

}  // namespace bicomp
