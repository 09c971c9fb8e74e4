// Copyright 2026 The pier Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-iteration training log. Serialized as JSON lines: one header line with
// the resolved configuration, then one line per record. Reals use 17
// significant digits so two logs are equal as text iff they are equal bitwise.

#pragma once

#include "json.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pier/run_config.hpp"
#include "pier/schedule.hpp"

namespace pier {

inline constexpr std::string_view kVersion = "pier 0.1.0";

enum class Phase { LazyStart, Local, Sync };

struct TrajectoryRecord {
  Iter iter = 0;
  Phase phase = Phase::Sync;
  std::optional<double> train_loss;  // absent for the initial evaluation at iter 0
  std::optional<double> val_loss;
  double inner_lr = 0;
  std::optional<double> outer_lr;  // set on iterations that ran an outer step
  std::optional<double> mu;
  double comm_bytes = 0;
};

struct TrajectoryLog {
  Mode mode = Mode::Pier;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<TrajectoryRecord> records;

  // Validation-loss series (iter, loss).
  std::vector<std::pair<Iter, double>> val_series() const {
    std::vector<std::pair<Iter, double>> out;
    for (const auto& r : records) {
      if (r.val_loss) out.emplace_back(r.iter, *r.val_loss);
    }
    return out;
  }

  std::optional<double> val_at(Iter t) const {
    for (const auto& r : records) {
      if (r.iter == t) return r.val_loss;
    }
    return std::nullopt;
  }
};

inline std::string_view phase_name(Phase p, Mode m) {
  switch (p) {
    case Phase::LazyStart: return "lazy_start";
    case Phase::Sync: return "sync";
    case Phase::Local: return m == Mode::DiLoCoBaseline ? "diloco" : "pier";
  }
  return "?";
}

namespace detail {

inline void append_number(std::string& out, std::string_view key, const std::optional<double>& v) {
  out += ",\"";
  out += key;
  out += "\":";
  if (!v) {
    out += "null";
  } else if (!std::isfinite(*v)) {
    out += std::isnan(*v) ? "\"nan\"" : (*v > 0 ? "\"inf\"" : "\"-inf\"");
  } else {
    out += format_double(*v);
  }
}

}  // namespace detail

inline std::string header_line(Mode mode, const std::vector<std::pair<std::string, std::string>>& config) {
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config) cfg[k] = v;
  nlohmann::ordered_json h;
  h["type"] = "header";
  h["version"] = kVersion;
  h["mode"] = to_string(mode);
  h["config"] = cfg;
  return h.dump();
}

// Model-trajectory fields only: iteration, losses and inner learning rate.
// Two runs of different modes that train identical models agree on this form.
inline std::string trajectory_line(const TrajectoryRecord& r) {
  std::string out = "{\"iter\":" + std::to_string(r.iter);
  detail::append_number(out, "train_loss", r.train_loss);
  detail::append_number(out, "val_loss", r.val_loss);
  detail::append_number(out, "inner_lr", r.inner_lr);
  out += "}";
  return out;
}

inline std::string record_line(const TrajectoryRecord& r, Mode mode, bool accounting = true) {
  std::string out = "{\"type\":\"record\",\"iter\":" + std::to_string(r.iter) + ",\"phase\":\"";
  out += phase_name(r.phase, mode);
  out += "\"";
  detail::append_number(out, "train_loss", r.train_loss);
  detail::append_number(out, "val_loss", r.val_loss);
  detail::append_number(out, "inner_lr", r.inner_lr);
  detail::append_number(out, "outer_lr", r.outer_lr);
  detail::append_number(out, "mu", r.mu);
  if (accounting) detail::append_number(out, "comm_bytes", r.comm_bytes);
  out += "}";
  return out;
}

inline std::string to_jsonl(const TrajectoryLog& log) {
  std::string out = header_line(log.mode, log.config) + "\n";
  for (const auto& r : log.records) out += record_line(r, log.mode) + "\n";
  return out;
}

// Records without the header or byte accounting, for comparing runs whose
// configs differ only in switches that do not affect training, such as offload.
inline std::string records_jsonl(const TrajectoryLog& log) {
  std::string out;
  for (const auto& r : log.records) out += record_line(r, log.mode, false) + "\n";
  return out;
}

// Model-trajectory projection of records with iter <= up_to.
inline std::string trajectory_fingerprint(const TrajectoryLog& log,
                                          Iter up_to = std::numeric_limits<Iter>::max()) {
  std::string out;
  for (const auto& r : log.records) {
    if (r.iter <= up_to) out += trajectory_line(r) + "\n";
  }
  return out;
}

}  // namespace pier
