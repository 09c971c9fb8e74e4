// Copyright 2026 The pier Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration. The text form is one `key = value` pair per line;
// blank lines and lines starting with '#' are ignored. Unknown keys are errors.

#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pier/error.hpp"
#include "pier/model.hpp"
#include "pier/optim.hpp"
#include "pier/schedule.hpp"
#include "pier/topology.hpp"

namespace pier {

enum class Mode { Pier, AdamWBaseline, DiLoCoBaseline };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Pier: return "pier";
    case Mode::AdamWBaseline: return "adamw_baseline";
    case Mode::DiLoCoBaseline: return "diloco_baseline";
  }
  return "?";
}

inline Mode parse_mode(std::string_view s) {
  if (s == "pier") return Mode::Pier;
  if (s == "adamw_baseline" || s == "adamw") return Mode::AdamWBaseline;
  if (s == "diloco_baseline" || s == "diloco") return Mode::DiLoCoBaseline;
  throw ConfigError("mode: expected pier, adamw_baseline or diloco_baseline, got '" +
                    std::string(s) + "'");
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct RunConfig {
  Mode mode = Mode::Pier;
  ModelConfig model;
  ScheduleConfig sched;
  AdamWConfig adamw;

  std::size_t groups = 4;
  std::size_t dp_per_group = 1;
  std::size_t tp_size = 1;

  std::size_t global_batch = 32;  // sequences per iteration across all replicas
  std::size_t accum_chunk = 8;    // sequences per forward/backward pass inside a replica
  std::size_t eval_batches = 8;
  std::size_t eval_batch_size = 16;

  std::uint64_t seed = 0;
  std::string corpus;  // empty: synthetic Markov corpus
  std::size_t synthetic_train_bytes = 1 << 20;
  std::size_t synthetic_val_bytes = 1 << 16;
  double val_fraction = 0.1;

  bool offload = false;

  // Forced outer hyperparameters, for degenerate-equivalence checks.
  std::optional<double> mu_override;
  std::optional<double> outer_lr_override;

  Topology topology() const { return {groups, dp_per_group, tp_size}; }
  std::size_t replicas() const { return groups * dp_per_group; }
  std::size_t micro_batch() const { return global_batch / replicas(); }

  void validate() const {
    model.validate();
    sched.validate();
    adamw.validate();
    (void)topology();
    if (global_batch == 0) throw ConfigError("global_batch must be positive");
    if (global_batch % replicas() != 0) {
      throw ConfigError("global_batch (" + std::to_string(global_batch) +
                        ") must be divisible by groups * dp_per_group (" +
                        std::to_string(replicas()) + ")");
    }
    if (accum_chunk == 0) throw ConfigError("accum_chunk must be positive");
    if (eval_batches == 0 || eval_batch_size == 0) {
      throw ConfigError("eval_batches and eval_batch_size must be positive");
    }
    if (!(val_fraction > 0 && val_fraction < 1)) throw ConfigError("val_fraction must be in (0, 1)");
    if (mu_override && !(*mu_override >= 0 && *mu_override < 1)) {
      throw ConfigError("mu_override must be in [0, 1)");
    }
    if (mode == Mode::Pier && !outer_lr_override &&
        sched.lazy_start_iters() < sched.total_iters / 10) {
      throw ConfigError(
          "pier mode needs warmup_fraction >= 0.1 (the outer learning-rate schedule starts at "
          "0.1 * total_iters) unless outer_lr_override is set");
    }
  }

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline std::optional<double> parse_optional_real(const std::string& key, const std::string& v) {
  if (v.empty() || v == "none") return std::nullopt;
  return parse_real(key, v);
}

inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("none");
}

// Canonical key order; this is also the serialization order.
inline const std::vector<std::pair<std::string, Field>>& fields() {
  using C = RunConfig;
  auto sz = [](std::size_t C::*m) {
    return Field{[m](C& c, const std::string& v) { c.*m = parse_int<std::size_t>("", v); },
                 [m](const C& c) { return std::to_string(c.*m); }};
  };
  auto model_sz = [](std::size_t ModelConfig::*m) {
    return Field{[m](C& c, const std::string& v) { c.model.*m = parse_int<std::size_t>("", v); },
                 [m](const C& c) { return std::to_string(c.model.*m); }};
  };
  auto sched_iter = [](Iter ScheduleConfig::*m) {
    return Field{[m](C& c, const std::string& v) { c.sched.*m = parse_int<Iter>("", v); },
                 [m](const C& c) { return std::to_string(c.sched.*m); }};
  };
  auto sched_real = [](double ScheduleConfig::*m) {
    return Field{[m](C& c, const std::string& v) { c.sched.*m = parse_real("", v); },
                 [m](const C& c) { return format_double(c.sched.*m); }};
  };
  auto adam_real = [](double AdamWConfig::*m) {
    return Field{[m](C& c, const std::string& v) { c.adamw.*m = parse_real("", v); },
                 [m](const C& c) { return format_double(c.adamw.*m); }};
  };
  static const std::vector<std::pair<std::string, Field>> table = {
      {"mode", {[](C& c, const std::string& v) { c.mode = parse_mode(v); },
                [](const C& c) { return std::string(to_string(c.mode)); }}},
      {"precision", {[](C& c, const std::string& v) { c.model.precision = parse_precision(v); },
                     [](const C& c) { return std::string(to_string(c.model.precision)); }}},
      {"vocab_size", model_sz(&ModelConfig::vocab_size)},
      {"embed_dim", model_sz(&ModelConfig::embed_dim)},
      {"num_layers", model_sz(&ModelConfig::num_layers)},
      {"num_heads", model_sz(&ModelConfig::num_heads)},
      {"seq_len", model_sz(&ModelConfig::seq_len)},
      {"total_iters", sched_iter(&ScheduleConfig::total_iters)},
      {"warmup_fraction", sched_real(&ScheduleConfig::warmup_fraction)},
      {"sync_interval", sched_iter(&ScheduleConfig::sync_interval)},
      {"inner_lr_peak", sched_real(&ScheduleConfig::inner_lr_peak)},
      {"inner_lr_min", sched_real(&ScheduleConfig::inner_lr_min)},
      {"inner_warmup_fraction", sched_real(&ScheduleConfig::inner_warmup_fraction)},
      {"decay_iters", sched_iter(&ScheduleConfig::decay_iters)},
      {"beta1", adam_real(&AdamWConfig::beta1)},
      {"beta2", adam_real(&AdamWConfig::beta2)},
      {"eps", adam_real(&AdamWConfig::eps)},
      {"weight_decay", adam_real(&AdamWConfig::weight_decay)},
      {"clip_norm", adam_real(&AdamWConfig::clip_norm)},
      {"groups", sz(&C::groups)},
      {"dp_per_group", sz(&C::dp_per_group)},
      {"tp_size", sz(&C::tp_size)},
      {"global_batch", sz(&C::global_batch)},
      {"accum_chunk", sz(&C::accum_chunk)},
      {"eval_batches", sz(&C::eval_batches)},
      {"eval_batch_size", sz(&C::eval_batch_size)},
      {"seed", {[](C& c, const std::string& v) { c.seed = parse_int<std::uint64_t>("", v); },
                [](const C& c) { return std::to_string(c.seed); }}},
      {"corpus", {[](C& c, const std::string& v) { c.corpus = v; },
                  [](const C& c) { return c.corpus; }}},
      {"synthetic_train_bytes", sz(&C::synthetic_train_bytes)},
      {"synthetic_val_bytes", sz(&C::synthetic_val_bytes)},
      {"val_fraction", {[](C& c, const std::string& v) { c.val_fraction = parse_real("", v); },
                        [](const C& c) { return format_double(c.val_fraction); }}},
      {"offload", {[](C& c, const std::string& v) { c.offload = parse_bool("", v); },
                   [](const C& c) { return std::string(c.offload ? "true" : "false"); }}},
      {"mu_override",
       {[](C& c, const std::string& v) { c.mu_override = parse_optional_real("", v); },
        [](const C& c) { return format_optional(c.mu_override); }}},
      {"outer_lr_override",
       {[](C& c, const std::string& v) { c.outer_lr_override = parse_optional_real("", v); },
        [](const C& c) { return format_optional(c.outer_lr_override); }}},
  };
  return table;
}

}  // namespace detail

// Applies one `key=value` assignment.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [name, field] : detail::fields()) {
    if (name == key) {
      try {
        field.set(cfg, value);
      } catch (const ConfigError& e) {
        const std::string msg = e.what();
        throw ConfigError(msg.starts_with(":") ? key + msg : key + ": " + msg);
      }
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

inline std::pair<std::string, std::string> split_assignment(std::string_view line) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("expected key=value, got '" + std::string(line) + "'");
  }
  auto key = detail::trim(line.substr(0, eq));
  if (key.empty()) throw ConfigError("empty key in '" + std::string(line) + "'");
  return {key, detail::trim(line.substr(eq + 1))};
}

inline void apply_text(RunConfig& cfg, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    try {
      auto [k, v] = split_assignment(t);
      apply_setting(cfg, k, v);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

// Ordered (key, value) pairs of the fully resolved configuration.
inline std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, field] : detail::fields()) out.emplace_back(name, field.get(cfg));
  return out;
}

inline std::string config_to_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

// Defaults, then the file (if any), then overrides in order; validated.
inline RunConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {}) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    apply_text(cfg, buf.str());
  }
  for (const auto& o : overrides) {
    auto [k, v] = split_assignment(o);
    apply_setting(cfg, k, v);
  }
  cfg.validate();
  return cfg;
}

}  // namespace pier
