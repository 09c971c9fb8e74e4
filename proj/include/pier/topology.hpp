// Copyright 2026 The pier Authors
// SPDX-License-Identifier: Apache-2.0
//
// Rank layout for groups x data-parallel x tensor-parallel workers, and
// in-process collectives with a fixed reduction order.
//
// Global rank = (group * dp_per_group + dp) * tp_size + tp, so the TP ranks of
// one model replica are contiguous (node-local placement).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pier/error.hpp"
#include "pier/model.hpp"

namespace pier {

struct WorkerCoord {
  std::size_t group = 0;
  std::size_t dp = 0;
  std::size_t tp = 0;
  bool operator==(const WorkerCoord&) const = default;
};

// Half-open index range [begin, end) of a shard in the flat parameter vector.
struct ShardRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool operator==(const ShardRange&) const = default;
};

// Splits [0, length) into `parts` contiguous ranges whose sizes differ by at most one.
inline std::vector<ShardRange> split_even(std::size_t length, std::size_t parts) {
  if (parts == 0) throw ConfigError("split_even: parts must be positive");
  std::vector<ShardRange> out;
  out.reserve(parts);
  const std::size_t base = length / parts, extra = length % parts;
  std::size_t at = 0;
  for (std::size_t i = 0; i < parts; ++i) {
    const std::size_t n = base + (i < extra ? 1 : 0);
    out.push_back({at, at + n});
    at += n;
  }
  return out;
}

class Topology {
 public:
  Topology(std::size_t groups, std::size_t dp_per_group, std::size_t tp_size)
      : groups_(groups), dp_(dp_per_group), tp_(tp_size) {
    if (groups == 0) throw ConfigError("topology: groups must be at least 1");
    if (dp_per_group == 0) throw ConfigError("topology: dp_per_group must be at least 1");
    if (tp_size == 0) throw ConfigError("topology: tp_size must be at least 1");
  }

  std::size_t groups() const { return groups_; }
  std::size_t dp_per_group() const { return dp_; }
  std::size_t tp_size() const { return tp_; }
  std::size_t replicas() const { return groups_ * dp_; }
  std::size_t world_size() const { return groups_ * dp_ * tp_; }

  std::size_t rank_of(const WorkerCoord& c) const {
    check(c);
    return (c.group * dp_ + c.dp) * tp_ + c.tp;
  }

  WorkerCoord coord_of(std::size_t rank) const {
    if (rank >= world_size()) throw ConfigError("topology: rank out of range");
    return {rank / (dp_ * tp_), (rank / tp_) % dp_, rank % tp_};
  }

  // Model replica (data-parallel index across all groups) that a coordinate belongs to.
  std::size_t replica_of(const WorkerCoord& c) const {
    check(c);
    return c.group * dp_ + c.dp;
  }

  // Ranks that average gradients every step inside one group, for one TP shard.
  std::vector<std::size_t> inner_group_ranks(std::size_t group, std::size_t tp) const {
    std::vector<std::size_t> out;
    for (std::size_t d = 0; d < dp_; ++d) out.push_back(rank_of({group, d, tp}));
    return out;
  }

  // Ranks holding TP shard `tp`, across every group: participants of the outer sync
  // and of synchronous (global) gradient averaging.
  std::vector<std::size_t> shard_peer_ranks(std::size_t tp) const {
    std::vector<std::size_t> out;
    for (std::size_t g = 0; g < groups_; ++g) {
      for (std::size_t d = 0; d < dp_; ++d) out.push_back(rank_of({g, d, tp}));
    }
    return out;
  }

  // TP ranks of one replica; they jointly hold a full model copy.
  std::vector<std::size_t> replica_ranks(std::size_t replica) const {
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < tp_; ++t) out.push_back(rank_of({replica / dp_, replica % dp_, t}));
    return out;
  }

  std::vector<ShardRange> shard_ranges(std::size_t param_count) const {
    return split_even(param_count, tp_);
  }

  bool operator==(const Topology&) const = default;

 private:
  void check(const WorkerCoord& c) const {
    if (c.group >= groups_ || c.dp >= dp_ || c.tp >= tp_) {
      throw ConfigError("topology: coordinate out of range");
    }
  }

  std::size_t groups_, dp_, tp_;
};

// A full vector split into per-TP-rank contiguous shards.
template <class T>
struct ShardedParams {
  std::vector<ParamVector<T>> shards;
  std::vector<ShardRange> ranges;

  static ShardedParams split(std::span<const T> full, std::size_t tp_size) {
    ShardedParams out;
    out.ranges = split_even(full.size(), tp_size);
    for (const auto& r : out.ranges) {
      out.shards.emplace_back(full.begin() + static_cast<std::ptrdiff_t>(r.begin),
                              full.begin() + static_cast<std::ptrdiff_t>(r.end));
    }
    return out;
  }

  ParamVector<T> concat() const {
    ParamVector<T> full;
    for (const auto& s : shards) full.insert(full.end(), s.begin(), s.end());
    return full;
  }
};

// Elementwise mean. The sum is a compensated left fold in participant order and
// the division carries the exact remainder, so the result is a pure function of
// the ordered inputs and the mean of identical values is that value.
template <class T>
void allreduce_avg_into(std::span<const std::span<const T>> inputs, std::span<T> out) {
  if (inputs.empty()) throw ProtocolError("allreduce: no participants");
  const std::size_t n = inputs.front().size();
  for (auto in : inputs) {
    if (in.size() != n) throw ProtocolError("allreduce: participants contributed different lengths");
  }
  if (out.size() != n) throw ProtocolError("allreduce: output length mismatch");
  if (inputs.size() == 1) {
    std::copy(inputs[0].begin(), inputs[0].end(), out.begin());
    return;
  }
  const T count = static_cast<T>(inputs.size());
  for (std::size_t i = 0; i < n; ++i) {
    T sum = inputs[0][i];
    T err = 0;
    for (std::size_t p = 1; p < inputs.size(); ++p) {
      const T x = inputs[p][i];
      const T t = sum + x;
      const T back = t - sum;
      err += (sum - (t - back)) + (x - back);
      sum = t;
    }
    const T q = sum / count;
    const T rem = std::fma(-q, count, sum);
    out[i] = q + (rem + err) / count;
  }
}

template <class T>
ParamVector<T> allreduce_avg(std::span<const std::span<const T>> inputs) {
  if (inputs.empty()) throw ProtocolError("allreduce: no participants");
  ParamVector<T> out(inputs.front().size());
  allreduce_avg_into<T>(inputs, out);
  return out;
}

template <class T>
ParamVector<T> allreduce_avg(const std::vector<ParamVector<T>>& inputs) {
  std::vector<std::span<const T>> views(inputs.begin(), inputs.end());
  return allreduce_avg<T>(views);
}

// Gradient averaging inside one group for one TP shard; one contribution per DP rank.
template <class T>
ParamVector<T> inner_gradient_sync(const Topology& topo, std::size_t group,
                                   std::span<const std::span<const T>> per_rank_grads) {
  if (group >= topo.groups()) throw ProtocolError("inner sync: group out of range");
  if (per_rank_grads.size() != topo.dp_per_group()) {
    throw ProtocolError("inner sync: expected " + std::to_string(topo.dp_per_group()) +
                        " contributions for group " + std::to_string(group) + ", got " +
                        std::to_string(per_rank_grads.size()));
  }
  return allreduce_avg<T>(per_rank_grads);
}

// Mean over groups of one TP shard's delta; shards of different TP ranks are independent.
template <class T>
ParamVector<T> outer_delta_sync(const Topology& topo, std::span<const std::span<const T>> per_group,
                                std::size_t tp_rank, std::size_t param_count) {
  if (tp_rank >= topo.tp_size()) throw ProtocolError("outer sync: tp rank out of range");
  if (per_group.size() != topo.groups()) {
    throw ProtocolError("outer sync: expected one delta per group");
  }
  const std::size_t expect = topo.shard_ranges(param_count)[tp_rank].size();
  for (auto d : per_group) {
    if (d.size() != expect) throw ProtocolError("outer sync: shard length mismatch");
  }
  return allreduce_avg<T>(per_group);
}

// Ring all-reduce traffic summed over all participants, in bytes.
inline double ring_allreduce_bytes(double payload_bytes, std::size_t participants) {
  if (participants <= 1) return 0.0;
  return 2.0 * payload_bytes * static_cast<double>(participants - 1);
}

}  // namespace pier
