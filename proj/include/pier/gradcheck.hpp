// Copyright 2026 The pier Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "pier/error.hpp"
#include "pier/model.hpp"

namespace pier {

struct GradCheckReport {
  double max_rel_error = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0;
  double worst_numeric = 0;
  std::vector<std::size_t> coords;
};

// Sampled coordinates are distinct and drawn from a seeded shuffle.
inline std::vector<std::size_t> sample_coords(std::size_t n, std::size_t count, std::uint64_t seed) {
  if (count > n) throw ConfigError("grad_check: num_coords exceeds parameter count");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
  return std::abs(analytic - numeric) / denom;
}

// Compares `analytic` against central differences of forward_loss at `coords`.
template <class T>
GradCheckReport grad_check_at(std::span<const T> params, std::span<const T> analytic,
                              const ModelConfig& cfg, const Batch& batch, double epsilon,
                              std::vector<std::size_t> coords) {
  if (!(epsilon > 0)) throw ConfigError("grad_check: epsilon must be positive");
  if (analytic.size() != params.size()) throw ConfigError("grad_check: gradient length mismatch");
  for (auto i : coords) {
    if (i >= params.size()) throw ConfigError("grad_check: coordinate out of range");
  }
  GradCheckReport rep;
  rep.coords = std::move(coords);
  ParamVector<T> probe(params.begin(), params.end());
  ForwardCache<T> cache;
  const T eps = static_cast<T>(epsilon);
  for (auto i : rep.coords) {
    const T orig = probe[i];
    probe[i] = orig + eps;
    const double up = static_cast<double>(forward_loss<T>(probe, cfg, batch, cache));
    probe[i] = orig - eps;
    const double down = static_cast<double>(forward_loss<T>(probe, cfg, batch, cache));
    probe[i] = orig;
    // divide by the step actually taken after rounding
    const double step = static_cast<double>(orig + eps) - static_cast<double>(orig - eps);
    const double numeric = (up - down) / step;
    const double err = relative_error(static_cast<double>(analytic[i]), numeric);
    if (err >= rep.max_rel_error) {
      rep.max_rel_error = err;
      rep.worst_index = i;
      rep.worst_analytic = static_cast<double>(analytic[i]);
      rep.worst_numeric = numeric;
    }
  }
  return rep;
}

template <class T>
GradCheckReport grad_check_against(std::span<const T> params, std::span<const T> analytic,
                                   const ModelConfig& cfg, const Batch& batch, double epsilon,
                                   std::size_t num_coords, std::uint64_t seed = 0) {
  return grad_check_at<T>(params, analytic, cfg, batch, epsilon,
                          sample_coords(params.size(), num_coords, seed));
}

template <class T>
GradCheckReport grad_check(std::span<const T> params, const ModelConfig& cfg, const Batch& batch,
                           double epsilon, std::size_t num_coords, std::uint64_t seed = 0) {
  const auto analytic = backward<T>(params, cfg, batch);
  return grad_check_against<T>(params, analytic, cfg, batch, epsilon, num_coords, seed);
}

}  // namespace pier
