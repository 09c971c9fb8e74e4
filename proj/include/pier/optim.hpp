// Copyright 2026 The pier Authors
// SPDX-License-Identifier: Apache-2.0
//
// Inner AdamW, global-norm gradient clipping, and the outer Nesterov step.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pier/error.hpp"
#include "pier/model.hpp"

namespace pier {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.1;
  double clip_norm = 1.0;

  void validate() const {
    if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("beta1 must be in [0, 1)");
    if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("beta2 must be in [0, 1)");
    if (!(eps > 0)) throw ConfigError("eps must be positive");
    if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be non-negative");
    if (!(clip_norm > 0)) throw ConfigError("clip_norm must be positive");
  }

  bool operator==(const AdamWConfig&) const = default;
};

template <class T>
struct AdamWState {
  ParamVector<T> m;
  ParamVector<T> v;
  std::uint64_t step = 0;

  static AdamWState zeros(std::size_t n) { return {ParamVector<T>(n, T(0)), ParamVector<T>(n, T(0)), 0}; }
};

// L2 norm of the concatenation of the given pieces. Accumulation runs left to
// right across pieces, so splitting a vector into contiguous shards does not
// change the result.
template <class T>
double global_norm(std::span<const std::span<const T>> pieces) {
  double sq = 0;
  for (auto piece : pieces) {
    for (T x : piece) sq += static_cast<double>(x) * static_cast<double>(x);
  }
  return std::sqrt(sq);
}

template <class T>
double global_norm(std::span<const T> v) {
  const std::span<const T> one[] = {v};
  return global_norm<T>(one);
}

// Rescales all pieces in place by max_norm / (norm + 1e-6) when their joint
// norm exceeds max_norm. Returns the norm before clipping.
template <class T>
double clip_by_global_norm(std::span<const std::span<T>> pieces, double max_norm) {
  if (!(max_norm > 0)) throw ConfigError("clip: max_norm must be positive");
  std::vector<std::span<const T>> view(pieces.begin(), pieces.end());
  const double norm = global_norm<T>(view);
  if (norm > max_norm) {
    const T scale = static_cast<T>(max_norm / (norm + 1e-6));
    for (auto piece : pieces) {
      for (T& x : piece) x *= scale;
    }
  }
  return norm;
}

template <class T>
ParamVector<T> clip_global_norm(std::span<const T> grads, double max_norm) {
  ParamVector<T> out(grads.begin(), grads.end());
  const std::span<T> one[] = {out};
  clip_by_global_norm<T>(one, max_norm);
  return out;
}

// Decoupled weight decay is applied before the bias-corrected adaptive update.
template <class T>
void adamw_update(std::span<T> params, std::span<const T> grads, AdamWState<T>& state, double lr,
                  const AdamWConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ConfigError("adamw: parameter, gradient and state lengths differ");
  }
  if (!(lr >= 0)) throw ConfigError("adamw: learning rate must be non-negative");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T decay = static_cast<T>(1.0 - lr * cfg.weight_decay);
  const T step_size = static_cast<T>(lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(cfg.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    T& m = state.m[i];
    T& v = state.v[i];
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g * g;
    params[i] *= decay;
    params[i] -= step_size * m / (std::sqrt(v) * inv_sqrt_bc2 + eps);
  }
}

// Value-returning form.
template <class T>
std::pair<ParamVector<T>, AdamWState<T>> adamw_step(const AdamWState<T>& state,
                                                     std::span<const T> params,
                                                     std::span<const T> grads, double lr,
                                                     const AdamWConfig& cfg) {
  std::pair<ParamVector<T>, AdamWState<T>> out{ParamVector<T>(params.begin(), params.end()), state};
  adamw_update<T>(out.first, grads, out.second, lr, cfg);
  return out;
}

// Outer optimizer state: momentum buffer, parameters at the last sync, and mu.
template <class T>
struct OuterState {
  ParamVector<T> momentum;
  ParamVector<T> snapshot;
  double mu = 0.9;

  void validate() const {
    if (momentum.size() != snapshot.size()) throw ConfigError("outer state: length mismatch");
    if (!(mu >= 0 && mu < 1)) throw ConfigError("outer state: mu must be in [0, 1)");
  }
};

template <class T>
struct OuterStepResult {
  ParamVector<T> params;  // new model parameters
  OuterState<T> state;    // momentum updated; snapshot left for the caller to refresh
};

// PyTorch-style Nesterov on the outer delta:
//   M' = mu * M + delta
//   theta = snapshot + lr * (mu * M' + delta)
template <class T>
OuterStepResult<T> outer_step(const OuterState<T>& outer, std::span<const T> delta, double lr,
                              double mu) {
  if (delta.size() != outer.momentum.size() || delta.size() != outer.snapshot.size()) {
    throw ConfigError("outer_step: delta length does not match outer state");
  }
  OuterStepResult<T> out{ParamVector<T>(delta.size()), outer};
  out.state.mu = mu;
  const T m = static_cast<T>(mu), a = static_cast<T>(lr);
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const T mom = m * outer.momentum[i] + delta[i];
    out.state.momentum[i] = mom;
    out.params[i] = outer.snapshot[i] + a * (m * mom + delta[i]);
  }
  return out;
}

// Same update, anchored at the averaged parameters instead of the snapshot:
//   delta = average - snapshot
//   theta = average + ((lr - 1) * delta + lr * mu * M')
// Algebraically equal to outer_step; with lr = 1 and mu = 0 it returns the
// average bit for bit.
template <class T>
OuterStepResult<T> outer_step_from_average(const OuterState<T>& outer,
                                           std::span<const T> average, double lr, double mu) {
  if (average.size() != outer.momentum.size() || average.size() != outer.snapshot.size()) {
    throw ConfigError("outer_step: parameter length does not match outer state");
  }
  OuterStepResult<T> out{ParamVector<T>(average.size()), outer};
  out.state.mu = mu;
  const T m = static_cast<T>(mu), a = static_cast<T>(lr), a1 = static_cast<T>(lr - 1.0);
  for (std::size_t i = 0; i < average.size(); ++i) {
    const T delta = average[i] - outer.snapshot[i];
    const T mom = m * outer.momentum[i] + delta;
    out.state.momentum[i] = mom;
    out.params[i] = average[i] + (a1 * delta + a * m * mom);
  }
  return out;
}

}  // namespace pier
