// Copyright 2026 The pier Authors
// SPDX-License-Identifier: Apache-2.0
//
// Host-memory staging for outer-optimizer state (parameter snapshot and
// momentum) between outer steps. Each worker owns one store and stages only
// its own slice of the shard it holds.

#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "pier/error.hpp"
#include "pier/model.hpp"

namespace pier {

enum class StateKind : std::uint8_t { Snapshot, Momentum };

struct HostKey {
  StateKind kind = StateKind::Snapshot;
  std::size_t replica = 0;
  std::size_t tp_rank = 0;
  auto operator<=>(const HostKey&) const = default;
};

struct OffloadCounters {
  std::uint64_t offloaded_bytes = 0;  // cumulative device -> host
  std::uint64_t reloaded_bytes = 0;   // cumulative host -> device
  std::uint64_t host_bytes = 0;       // currently staged on host
  std::uint64_t peak_host_bytes = 0;
  std::int64_t device_bytes = 0;      // outer state currently resident on device
  std::uint64_t offload_calls = 0;
  std::uint64_t reload_calls = 0;

  OffloadCounters& operator+=(const OffloadCounters& o) {
    offloaded_bytes += o.offloaded_bytes;
    reloaded_bytes += o.reloaded_bytes;
    host_bytes += o.host_bytes;
    peak_host_bytes += o.peak_host_bytes;
    device_bytes += o.device_bytes;
    offload_calls += o.offload_calls;
    reload_calls += o.reload_calls;
    return *this;
  }
};

template <class T>
class HostStore {
 public:
  explicit HostStore(bool enabled = false) : enabled_(enabled) {}

  bool enabled() const { return enabled_; }
  const OffloadCounters& counters() const { return counters_; }
  bool contains(const HostKey& key) const { return live_.contains(key); }

  // Records device-resident outer state that is not managed by offload/reload.
  void account_device(std::int64_t bytes) { counters_.device_bytes += bytes; }

  // Copies the shard to host and releases the device copy. No-op when disabled.
  void offload(const HostKey& key, std::span<const T> shard) {
    if (!enabled_) return;
    if (live_.contains(key)) throw ProtocolError("host store: key is already offloaded");
    const auto bytes = static_cast<std::uint64_t>(shard.size() * sizeof(T));
    live_.emplace(key, ParamVector<T>(shard.begin(), shard.end()));
    counters_.offloaded_bytes += bytes;
    counters_.host_bytes += bytes;
    counters_.peak_host_bytes = std::max(counters_.peak_host_bytes, counters_.host_bytes);
    counters_.device_bytes -= static_cast<std::int64_t>(bytes);
    counters_.offload_calls += 1;
  }

  // Read-only view of a staged shard; counters are unchanged.
  const ParamVector<T>& peek(const HostKey& key) const {
    auto it = live_.find(key);
    if (it == live_.end()) throw ProtocolError("host store: no staged shard for key");
    return it->second;
  }

  // Moves a staged shard back to the device.
  ParamVector<T> reload(const HostKey& key) {
    if (!enabled_) throw ProtocolError("host store: reload with offload disabled");
    auto it = live_.find(key);
    if (it == live_.end()) throw ProtocolError("host store: no staged shard for key");
    ParamVector<T> out = std::move(it->second);
    live_.erase(it);
    const auto bytes = static_cast<std::uint64_t>(out.size() * sizeof(T));
    counters_.reloaded_bytes += bytes;
    counters_.host_bytes -= bytes;
    counters_.device_bytes += static_cast<std::int64_t>(bytes);
    counters_.reload_calls += 1;
    return out;
  }

 private:
  bool enabled_;
  std::map<HostKey, ParamVector<T>> live_;
  OffloadCounters counters_;
};

}  // namespace pier
