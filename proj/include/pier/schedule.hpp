// Copyright 2026 The pier Authors
// SPDX-License-Identifier: Apache-2.0
//
// Inner learning-rate, outer learning-rate and outer-momentum schedules.
// Interval boundaries are whole iterations: fractions of T are floored and
// every interval is half-open [a, b).

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "pier/error.hpp"

namespace pier {

using Iter = std::int64_t;

// floor(fraction * total) with a small guard against products such as 0.1 * 3000
// landing just below an integer.
inline Iter fraction_of(double fraction, Iter total) {
  return static_cast<Iter>(std::floor(fraction * static_cast<double>(total) + 1e-9));
}

struct ScheduleConfig {
  Iter total_iters = 3000;              // T
  double warmup_fraction = 0.1;         // p, length of the synchronous lazy start
  Iter sync_interval = 20;              // r
  double inner_lr_peak = 3e-3;
  double inner_lr_min = 3e-4;
  double inner_warmup_fraction = 0.02;
  Iter decay_iters = 0;                 // 0 means total_iters

  Iter lazy_start_iters() const { return fraction_of(warmup_fraction, total_iters); }
  Iter inner_warmup_iters() const { return fraction_of(inner_warmup_fraction, total_iters); }
  Iter resolved_decay_iters() const { return decay_iters > 0 ? decay_iters : total_iters; }

  void validate() const {
    if (total_iters <= 0) throw ConfigError("total_iters must be positive");
    if (sync_interval <= 0) throw ConfigError("sync_interval must be positive");
    if (sync_interval >= total_iters) throw ConfigError("sync_interval must be smaller than total_iters");
    if (!(warmup_fraction >= 0 && warmup_fraction < 1)) {
      throw ConfigError("warmup_fraction must be in [0, 1)");
    }
    const double exact = warmup_fraction * static_cast<double>(total_iters);
    const Iter lazy = lazy_start_iters();
    if (std::abs(exact - static_cast<double>(lazy)) > 1e-6) {
      throw ConfigError("warmup_fraction * total_iters must be a whole number of iterations");
    }
    if (lazy >= sync_interval && lazy % sync_interval != 0) {
      throw ConfigError("warmup_fraction * total_iters (" + std::to_string(lazy) +
                        ") must be a multiple of sync_interval (" + std::to_string(sync_interval) +
                        ")");
    }
    if (!(inner_lr_peak >= 0)) throw ConfigError("inner_lr_peak must be non-negative");
    if (!(inner_lr_min >= 0 && inner_lr_min <= inner_lr_peak)) {
      throw ConfigError("inner_lr_min must be in [0, inner_lr_peak]");
    }
    if (!(inner_warmup_fraction >= 0 && inner_warmup_fraction < 1)) {
      throw ConfigError("inner_warmup_fraction must be in [0, 1)");
    }
    if (decay_iters < 0) throw ConfigError("decay_iters must be non-negative");
    if (resolved_decay_iters() < inner_warmup_iters()) {
      throw ConfigError("decay_iters must not be shorter than the inner warmup");
    }
  }

  bool operator==(const ScheduleConfig&) const = default;
};

// Linear warmup to the peak, cosine decay to the minimum at decay_iters, flat afterwards.
inline double inner_lr(Iter t, const ScheduleConfig& s) {
  const Iter warm = s.inner_warmup_iters();
  const Iter decay = s.resolved_decay_iters();
  if (t < warm) return s.inner_lr_peak * static_cast<double>(t) / static_cast<double>(warm);
  if (t >= decay) return s.inner_lr_min;
  const double progress = static_cast<double>(t - warm) / static_cast<double>(decay - warm);
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return s.inner_lr_min + (s.inner_lr_peak - s.inner_lr_min) * cosine;
}

// Outer learning rate: 0 -> 1 linearly on [0.1T, 0.2T), 1.1 on [0.2T, 0.8T), 0.9 on [0.8T, T].
inline double outer_lr(Iter t, Iter total) {
  const Iter start = total / 10;
  const Iter warm_end = total / 5;
  const Iter late = total * 4 / 5;
  if (t < start || t > total) {
    throw ProtocolError("outer_lr: iteration " + std::to_string(t) +
                        " is outside the outer phase [" + std::to_string(start) + ", " +
                        std::to_string(total) + "]");
  }
  if (t < warm_end) return static_cast<double>(t - start) / static_cast<double>(warm_end - start);
  if (t < late) return 1.1;
  return 0.9;
}

// Momentum decay: 0.99 on [0.1T, 0.15T), 0.95 on [0.15T, 0.2T), 0.9 elsewhere.
inline double momentum_mu(Iter t, Iter total) {
  const Iter a = total / 10;
  const Iter b = total * 15 / 100;
  const Iter c = total / 5;
  if (t >= a && t < b) return 0.99;
  if (t >= b && t < c) return 0.95;
  return 0.9;
}

// Momentum coefficient used while accumulating during the lazy start.
inline constexpr double kWarmupMomentum = 0.9;

// Fixed outer hyperparameters of the plain two-level baseline.
inline constexpr double kBaselineOuterLr = 0.7;
inline constexpr double kBaselineOuterMomentum = 0.9;

}  // namespace pier
