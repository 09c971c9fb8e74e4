// Copyright 2026 The pier Authors
// SPDX-License-Identifier: Apache-2.0
//
// Analytical runtime projection over a two-tier network, and the runtime
// metrics used to compare schedules.
//
// A collective among n participants moves 2 S (n - 1) / n bytes per
// participant (ring all-reduce). It is costed at the inter-node bandwidth if
// its participants live on more than one node, else at the intra-node
// bandwidth, plus a fixed latency. Ranks are placed on nodes in global rank
// order, gpus_per_node at a time.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pier/error.hpp"
#include "pier/run_config.hpp"
#include "pier/schedule.hpp"
#include "pier/topology.hpp"

namespace pier {

struct CostModelParams {
  double intra_node_bw = 900e9;        // bytes/s
  double inter_node_bw = 100e9;        // bytes/s
  double per_collective_latency = 2e-5;  // s
  double per_iter_compute_time = 1.0;  // s, at the projected GPU count
  double model_bytes = 6.2e9;
  std::size_t gpus_per_node = 4;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0) || !std::isfinite(v)) {
        throw ConfigError(std::string("cost model: ") + name + " must be positive and finite");
      }
    };
    positive(intra_node_bw, "intra_node_bw");
    positive(inter_node_bw, "inter_node_bw");
    positive(per_collective_latency, "per_collective_latency");
    positive(per_iter_compute_time, "per_iter_compute_time");
    positive(model_bytes, "model_bytes");
    if (gpus_per_node == 0) throw ConfigError("cost model: gpus_per_node must be positive");
    if (intra_node_bw < inter_node_bw) {
      throw ConfigError("cost model: intra_node_bw must be >= inter_node_bw");
    }
  }
};

struct RuntimeProjection {
  double total_time = 0;
  double compute_time = 0;
  double inner_comm_time = 0;
  double outer_comm_time = 0;
  std::uint64_t inner_events = 0;
  std::uint64_t outer_events = 0;
};

// Presets modelled on a 4-GPU NVLink node and a 1-GPU node, both with a
// 1.5B-parameter fp32 model. Compute time is per iteration on a single GPU;
// see per_gpu_count().
inline CostModelParams preset(std::string_view name) {
  CostModelParams p;
  if (name == "a100-node4") {
    p.intra_node_bw = 900e9;
    p.inter_node_bw = 100e9;
    p.gpus_per_node = 4;
  } else if (name == "gh200-node1") {
    p.intra_node_bw = 900e9;
    p.inter_node_bw = 50e9;
    p.gpus_per_node = 1;
  } else {
    throw ConfigError("cost model: unknown preset '" + std::string(name) +
                      "' (expected a100-node4 or gh200-node1)");
  }
  p.per_collective_latency = 2e-5;
  p.model_bytes = 1.558e9 * 4;
  p.per_iter_compute_time = 64.0;
  return p;
}

inline std::vector<std::string> preset_names() { return {"a100-node4", "gh200-node1"}; }

// Strong scaling: the single-GPU iteration time split evenly over n GPUs.
inline CostModelParams per_gpu_count(CostModelParams single_gpu, std::size_t n) {
  if (n == 0) throw ConfigError("cost model: GPU count must be positive");
  single_gpu.per_iter_compute_time /= static_cast<double>(n);
  return single_gpu;
}

inline double speedup(double t_baseline, double t_pier) {
  if (!(t_baseline > 0) || !(t_pier > 0)) throw DomainError("speedup: runtimes must be positive");
  return t_baseline / t_pier;
}

inline double perf_improvement(double t_baseline, double t_pier) {
  if (!(t_baseline > 0)) throw DomainError("perf_improvement: baseline runtime must be positive");
  return (t_baseline - t_pier) / t_baseline * 100.0;
}

inline double scaling_efficiency(double t_m, double t_n, double m, double n) {
  if (!(t_m > 0) || !(t_n > 0) || !(m > 0) || !(n > 0)) {
    throw DomainError("scaling_efficiency: all arguments must be positive");
  }
  return t_m / t_n * (m / n);
}

namespace detail {

inline std::size_t node_of(std::size_t rank, std::size_t gpus_per_node) { return rank / gpus_per_node; }

// Time of one all-reduce of `bytes` over `ranks`; zero for a single participant.
inline double collective_time(const CostModelParams& p, double bytes, const std::vector<std::size_t>& ranks) {
  const std::size_t n = ranks.size();
  if (n <= 1) return 0.0;
  bool spans = false;
  for (auto r : ranks) {
    if (node_of(r, p.gpus_per_node) != node_of(ranks.front(), p.gpus_per_node)) spans = true;
  }
  const double bw = spans ? p.inter_node_bw : p.intra_node_bw;
  const double volume = 2.0 * bytes * static_cast<double>(n - 1) / static_cast<double>(n);
  return volume / bw + p.per_collective_latency;
}

// Slowest TP shard's collective; shards of different TP ranks run side by side.
inline double slowest(const CostModelParams& p, const Topology& topo,
                      const std::function<std::vector<std::size_t>(std::size_t)>& ranks_for_tp) {
  const double bytes = p.model_bytes / static_cast<double>(topo.tp_size());
  double worst = 0;
  for (std::size_t s = 0; s < topo.tp_size(); ++s) {
    worst = std::max(worst, collective_time(p, bytes, ranks_for_tp(s)));
  }
  return worst;
}

}  // namespace detail

inline RuntimeProjection project_runtime(const CostModelParams& p, const Topology& topo,
                                         const ScheduleConfig& sched, Mode mode) {
  p.validate();
  sched.validate();
  const Iter T = sched.total_iters;
  RuntimeProjection out;
  out.compute_time = static_cast<double>(T) * p.per_iter_compute_time;

  const double global = detail::slowest(p, topo, [&](std::size_t s) { return topo.shard_peer_ranks(s); });
  const bool global_moves = topo.replicas() > 1;
  if (mode == Mode::AdamWBaseline) {
    out.inner_comm_time = static_cast<double>(T) * global;
    out.inner_events = global_moves ? static_cast<std::uint64_t>(T) : 0;
  } else {
    const Iter lazy = sched.lazy_start_iters();
    double group = 0;
    for (std::size_t g = 0; g < topo.groups(); ++g) {
      group = std::max(group, detail::slowest(p, topo, [&](std::size_t s) {
                         return topo.inner_group_ranks(g, s);
                       }));
    }
    const bool group_moves = topo.dp_per_group() > 1;
    const Iter outer = (T - lazy) / sched.sync_interval;
    out.inner_comm_time = static_cast<double>(lazy) * global + static_cast<double>(T - lazy) * group;
    out.outer_comm_time = static_cast<double>(outer) * global;
    out.inner_events = (global_moves ? static_cast<std::uint64_t>(lazy) : 0) +
                       (group_moves ? static_cast<std::uint64_t>(T - lazy) : 0);
    out.outer_events = static_cast<std::uint64_t>(outer);
  }
  out.total_time = out.compute_time + out.inner_comm_time + out.outer_comm_time;
  return out;
}

// Groups aligned with nodes: one group per node, one DP rank per GPU, no TP.
inline Topology node_aligned_topology(std::size_t gpus, std::size_t gpus_per_node) {
  if (gpus == 0 || gpus_per_node == 0 || gpus % gpus_per_node != 0) {
    throw ConfigError("cost model: GPU count must be a positive multiple of gpus_per_node");
  }
  return Topology(gpus / gpus_per_node, gpus_per_node, 1);
}

}  // namespace pier
