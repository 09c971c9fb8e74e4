// Copyright 2026 The pier Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment commands behind the `pier` CLI. Every command writes its
// artifacts into an output directory; all of them except timing.json are
// byte-identical across reruns of the same configuration.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pier/corpus.hpp"
#include "pier/costmodel.hpp"
#include "pier/driver.hpp"
#include "pier/error.hpp"
#include "pier/gradcheck.hpp"
#include "pier/params_io.hpp"
#include "pier/run_config.hpp"
#include "pier/trajectory.hpp"

namespace pier {

enum ExitCode : int {
  kExitOk = 0,
  kExitGeneric = 1,
  kExitConfig = 2,
  kExitNumeric = 3,
  kExitThreshold = 4,
};

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline ordered_json real_or_null(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

inline ordered_json config_json(const RunConfig& cfg) {
  ordered_json out = ordered_json::object();
  for (const auto& [k, v] : config_entries(cfg)) out[k] = v;
  return out;
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

inline std::string dump_line(const ordered_json& j) {
  // reals print in shortest round-trip form
  return j.dump() + "\n";
}

inline ordered_json stats_json(const RunStats& s) {
  ordered_json j;
  j["inner_steps"] = s.inner_steps;
  j["inner_collectives"] = s.inner_collectives;
  j["warmup_events"] = s.warmup_events;
  j["outer_events"] = s.outer_events;
  j["final_averages"] = s.final_averages;
  j["inner_comm_bytes"] = s.inner_comm_bytes;
  j["outer_comm_bytes"] = s.outer_comm_bytes;
  j["offloaded_bytes"] = s.offload.offloaded_bytes;
  j["reloaded_bytes"] = s.offload.reloaded_bytes;
  j["peak_host_bytes"] = s.offload.peak_host_bytes;
  return j;
}

}  // namespace detail

// Training outcome reduced to doubles, independent of the run's precision.
struct RunSummary {
  RunConfig config;
  TrajectoryLog log;
  RunStats stats;
  std::optional<double> initial_val_loss;
  std::optional<double> final_val_loss;
  std::optional<double> final_train_loss;
  std::string params_bytes;  // encoded params.bin contents
  double wall_seconds = 0;
};

inline std::string summary_line(const RunSummary& s) {
  ordered_json j;
  j["type"] = "summary";
  j["version"] = kVersion;
  j["mode"] = to_string(s.config.mode);
  j["seed"] = s.config.seed;
  j["config"] = detail::config_json(s.config);
  j["initial_val_loss"] = detail::real_or_null(s.initial_val_loss);
  j["final_val_loss"] = detail::real_or_null(s.final_val_loss);
  j["final_train_loss"] = detail::real_or_null(s.final_train_loss);
  j["stats"] = detail::stats_json(s.stats);
  return detail::dump_line(j);
}

template <class T>
RunSummary train_summary(const RunConfig& cfg, WorkersMode wm) {
  const auto start = std::chrono::steady_clock::now();
  auto result = run_training<T>(cfg, wm);
  RunSummary s;
  s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  s.config = cfg;
  s.stats = result.stats;
  s.initial_val_loss = result.log.val_at(0);
  s.final_val_loss = result.log.val_at(cfg.sched.total_iters);
  if (!result.log.records.empty()) s.final_train_loss = result.log.records.back().train_loss;
  s.params_bytes = encode_params<T>(result.final_params);
  s.log = std::move(result.log);
  return s;
}

inline RunSummary train_summary(const RunConfig& cfg, WorkersMode wm = WorkersMode::Sequential) {
  cfg.validate();
  return cfg.model.precision == Precision::Double ? train_summary<double>(cfg, wm)
                                                  : train_summary<float>(cfg, wm);
}

inline void write_timing(const std::filesystem::path& path, const std::map<std::string, double>& secs) {
  ordered_json j;
  j["type"] = "timing";
  for (const auto& [k, v] : secs) j[k + "_wall_seconds"] = v;
  write_file(path.string(), detail::dump_line(j));
}

// Writes trajectory.jsonl, params.bin, summary.json and timing.json.
inline RunSummary cmd_train(const RunConfig& cfg, const std::filesystem::path& out_dir,
                            WorkersMode wm = WorkersMode::Sequential) {
  detail::ensure_dir(out_dir);
  auto s = train_summary(cfg, wm);
  write_file((out_dir / "trajectory.jsonl").string(), to_jsonl(s.log));
  write_file((out_dir / "params.bin").string(), s.params_bytes);
  write_file((out_dir / "summary.json").string(), summary_line(s));
  write_timing(out_dir / "timing.json", {{std::string(to_string(cfg.mode)), s.wall_seconds}});
  return s;
}

// Largest validation-loss rise over the first `windows` sync boundaries after
// the transition, relative to the loss at t = pT. Negative if the loss only fell.
inline std::optional<double> transition_spike(const TrajectoryLog& log, const ScheduleConfig& sched,
                                              int windows = 3) {
  const Iter pT = sched.lazy_start_iters();
  const auto base = log.val_at(pT);
  if (!base) return std::nullopt;
  std::optional<double> worst;
  for (int j = 1; j <= windows; ++j) {
    const auto v = log.val_at(pT + j * sched.sync_interval);
    if (!v) continue;
    const double rise = *v - *base;
    worst = worst ? std::max(*worst, rise) : rise;
  }
  return worst;
}

struct ModeOutcome {
  Mode mode = Mode::Pier;
  std::optional<double> final_val_loss;
  std::optional<double> final_train_loss;
  std::optional<double> spike;
  std::optional<double> rel_diff_vs_adamw;  // (final - adamw final) / adamw final
  double projected_time = 0;                // cost model, a100-node4, one group per node
};

struct ComparisonReport {
  std::vector<ModeOutcome> outcomes;
  std::vector<RunSummary> runs;
  std::optional<double> projected_speedup;          // adamw time / pier time
  std::optional<double> projected_perf_improvement;

  const ModeOutcome* find(Mode m) const {
    for (const auto& o : outcomes) {
      if (o.mode == m) return &o;
    }
    return nullptr;
  }
};

// Configs must agree on everything that determines data order and the model.
inline void check_comparable(const std::vector<RunConfig>& cfgs) {
  if (cfgs.size() < 2) throw ConfigError("compare: needs at least two modes");
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    for (std::size_t j = i + 1; j < cfgs.size(); ++j) {
      if (cfgs[i].mode == cfgs[j].mode) {
        throw ConfigError("compare: mode '" + std::string(to_string(cfgs[i].mode)) + "' listed twice");
      }
    }
  }
  const auto& a = cfgs.front();
  for (const auto& b : cfgs) {
    if (!(a.model == b.model)) throw ConfigError("compare: model configs differ across modes");
    if (!(a.sched == b.sched)) throw ConfigError("compare: schedules differ across modes");
    if (a.seed != b.seed) throw ConfigError("compare: seeds differ across modes");
    if (a.global_batch != b.global_batch) throw ConfigError("compare: global_batch differs across modes");
    if (a.corpus != b.corpus || a.synthetic_train_bytes != b.synthetic_train_bytes ||
        a.synthetic_val_bytes != b.synthetic_val_bytes) {
      throw ConfigError("compare: corpus settings differ across modes");
    }
    b.validate();
  }
}

inline std::vector<RunConfig> configs_for_modes(const RunConfig& base, const std::vector<Mode>& modes) {
  std::vector<RunConfig> out;
  for (auto m : modes) {
    RunConfig c = base;
    c.mode = m;
    out.push_back(c);
  }
  return out;
}

inline double projected_runtime_for(const RunConfig& cfg) {
  const auto params = preset("a100-node4");
  const auto topo = Topology(cfg.groups, params.gpus_per_node, 1);
  const auto gpus = topo.world_size();
  return project_runtime(per_gpu_count(params, gpus), topo, cfg.sched, cfg.mode).total_time;
}

inline ComparisonReport compare_runs(const std::vector<RunConfig>& cfgs,
                                     WorkersMode wm = WorkersMode::Sequential) {
  check_comparable(cfgs);
  ComparisonReport rep;
  for (const auto& c : cfgs) rep.runs.push_back(train_summary(c, wm));

  std::optional<double> adamw_final;
  std::optional<double> adamw_time, pier_time;
  for (const auto& r : rep.runs) {
    if (r.config.mode == Mode::AdamWBaseline) adamw_final = r.final_val_loss;
  }
  for (const auto& r : rep.runs) {
    ModeOutcome o;
    o.mode = r.config.mode;
    o.final_val_loss = r.final_val_loss;
    o.final_train_loss = r.final_train_loss;
    if (o.mode != Mode::AdamWBaseline) o.spike = transition_spike(r.log, r.config.sched);
    if (adamw_final && o.final_val_loss) o.rel_diff_vs_adamw = (*o.final_val_loss - *adamw_final) / *adamw_final;
    o.projected_time = projected_runtime_for(r.config);
    if (o.mode == Mode::AdamWBaseline) adamw_time = o.projected_time;
    if (o.mode == Mode::Pier) pier_time = o.projected_time;
    rep.outcomes.push_back(o);
  }
  if (adamw_time && pier_time) {
    rep.projected_speedup = speedup(*adamw_time, *pier_time);
    rep.projected_perf_improvement = perf_improvement(*adamw_time, *pier_time);
  }
  return rep;
}

// compare.jsonl: header, one aligned line per evaluated iteration, one result
// line per mode, one metrics line.
inline std::string comparison_jsonl(const ComparisonReport& rep) {
  std::string out;
  {
    ordered_json h;
    h["type"] = "header";
    h["version"] = kVersion;
    ordered_json modes = ordered_json::array();
    for (const auto& r : rep.runs) modes.push_back(to_string(r.config.mode));
    h["modes"] = modes;
    h["seed"] = rep.runs.front().config.seed;
    h["config"] = detail::config_json(rep.runs.front().config);
    out += detail::dump_line(h);
  }
  std::map<Iter, ordered_json> aligned;
  for (const auto& r : rep.runs) {
    for (const auto& [t, v] : r.log.val_series()) {
      auto& row = aligned[t];
      if (row.is_null()) {
        row["type"] = "val_loss";
        row["iter"] = t;
      }
      row[std::string(to_string(r.config.mode))] = detail::real_or_null(v);
    }
  }
  for (const auto& [t, row] : aligned) out += detail::dump_line(row);
  for (const auto& o : rep.outcomes) {
    ordered_json j;
    j["type"] = "result";
    j["mode"] = to_string(o.mode);
    j["final_val_loss"] = detail::real_or_null(o.final_val_loss);
    j["final_train_loss"] = detail::real_or_null(o.final_train_loss);
    j["transition_spike"] = detail::real_or_null(o.spike);
    j["rel_diff_vs_adamw"] = detail::real_or_null(o.rel_diff_vs_adamw);
    j["projected_time_s"] = o.projected_time;
    out += detail::dump_line(j);
  }
  ordered_json m;
  m["type"] = "metrics";
  m["cost_model_preset"] = "a100-node4";
  m["projected_speedup"] = detail::real_or_null(rep.projected_speedup);
  m["projected_perf_improvement"] = detail::real_or_null(rep.projected_perf_improvement);
  out += detail::dump_line(m);
  return out;
}

// Writes per-mode trajectory/params/summary files plus compare.jsonl.
inline ComparisonReport cmd_compare(const std::vector<RunConfig>& cfgs, const std::filesystem::path& out_dir,
                                    WorkersMode wm = WorkersMode::Sequential) {
  check_comparable(cfgs);
  detail::ensure_dir(out_dir);
  auto rep = compare_runs(cfgs, wm);
  std::map<std::string, double> secs;
  for (const auto& r : rep.runs) {
    const std::string m(to_string(r.config.mode));
    write_file((out_dir / ("trajectory_" + m + ".jsonl")).string(), to_jsonl(r.log));
    write_file((out_dir / ("params_" + m + ".bin")).string(), r.params_bytes);
    write_file((out_dir / ("summary_" + m + ".json")).string(), summary_line(r));
    secs[m] = r.wall_seconds;
  }
  write_file((out_dir / "compare.jsonl").string(), comparison_jsonl(rep));
  write_timing(out_dir / "timing.json", secs);
  return rep;
}

struct ProjectionRow {
  std::size_t gpus = 0;
  Iter sync_interval = 0;
  RuntimeProjection baseline;
  RuntimeProjection pier;
  double speedup = 0;
  double perf_improvement = 0;
  double baseline_efficiency = 0;  // relative to the smallest GPU count in the sweep
  double pier_efficiency = 0;
};

struct ProjectionSweep {
  std::string preset;
  std::vector<std::size_t> gpu_counts{8, 16, 32, 64, 128, 256};
  std::vector<Iter> intervals{50, 100, 200, 500};
  ScheduleConfig sched = [] {
    ScheduleConfig s;
    s.total_iters = 10000;
    return s;
  }();
};

inline std::vector<ProjectionRow> cmd_project(const ProjectionSweep& sweep) {
  const ScheduleConfig& sched_base = sweep.sched;
  const auto single = preset(sweep.preset);
  std::vector<ProjectionRow> rows;
  for (auto r : sweep.intervals) {
    ScheduleConfig sched = sched_base;
    sched.sync_interval = r;
    std::optional<ProjectionRow> reference;
    for (auto n : sweep.gpu_counts) {
      const auto params = per_gpu_count(single, n);
      const auto topo = node_aligned_topology(n, params.gpus_per_node);
      ProjectionRow row;
      row.gpus = n;
      row.sync_interval = r;
      row.baseline = project_runtime(params, topo, sched, Mode::AdamWBaseline);
      row.pier = project_runtime(params, topo, sched, Mode::Pier);
      row.speedup = speedup(row.baseline.total_time, row.pier.total_time);
      row.perf_improvement = perf_improvement(row.baseline.total_time, row.pier.total_time);
      if (!reference) reference = row;
      const auto m = static_cast<double>(reference->gpus), nn = static_cast<double>(n);
      row.baseline_efficiency = scaling_efficiency(reference->baseline.total_time, row.baseline.total_time, m, nn);
      row.pier_efficiency = scaling_efficiency(reference->pier.total_time, row.pier.total_time, m, nn);
      rows.push_back(row);
    }
  }
  return rows;
}

inline std::string projection_jsonl(const ProjectionSweep& sweep, const std::vector<ProjectionRow>& rows) {
  const ScheduleConfig& sched = sweep.sched;
  std::string out;
  ordered_json h;
  h["type"] = "header";
  h["version"] = kVersion;
  h["preset"] = sweep.preset;
  h["total_iters"] = sched.total_iters;
  h["warmup_fraction"] = sched.warmup_fraction;
  out += detail::dump_line(h);
  auto proj = [](const RuntimeProjection& p) {
    ordered_json j;
    j["total_time"] = p.total_time;
    j["compute_time"] = p.compute_time;
    j["inner_comm_time"] = p.inner_comm_time;
    j["outer_comm_time"] = p.outer_comm_time;
    j["inner_events"] = p.inner_events;
    j["outer_events"] = p.outer_events;
    return j;
  };
  for (const auto& r : rows) {
    ordered_json j;
    j["type"] = "projection";
    j["gpus"] = r.gpus;
    j["sync_interval"] = r.sync_interval;
    j["adamw_baseline"] = proj(r.baseline);
    j["pier"] = proj(r.pier);
    j["speedup"] = r.speedup;
    j["perf_improvement"] = r.perf_improvement;
    j["adamw_scaling_efficiency"] = r.baseline_efficiency;
    j["pier_scaling_efficiency"] = r.pier_efficiency;
    out += detail::dump_line(j);
  }
  return out;
}

inline void print_projection_table(std::ostream& os, const std::vector<ProjectionRow>& rows) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%6s %6s %14s %14s %8s %8s %8s %8s\n", "gpus", "r", "adamw_s", "pier_s",
                "speedup", "dp_%", "e_adamw", "e_pier");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%6zu %6lld %14.2f %14.2f %8.3f %8.2f %8.3f %8.3f\n", r.gpus,
                  static_cast<long long>(r.sync_interval), r.baseline.total_time, r.pier.total_time,
                  r.speedup, r.perf_improvement, r.baseline_efficiency, r.pier_efficiency);
    os << buf;
  }
}

struct GradCheckOptions {
  double epsilon = 1e-5;
  std::size_t num_coords = 64;
  std::size_t batch_size = 4;
  double threshold = 1e-4;
  bool corrupt_gradient = false;  // negative control: perturbs the analytic gradient
};

// Always runs at double precision on the configured model, initial weights and
// one training batch.
inline GradCheckReport cmd_gradcheck(const RunConfig& cfg, const GradCheckOptions& opt = {}) {
  ModelConfig model = cfg.model;
  model.precision = Precision::Double;
  model.validate();
  const auto params = init_params<double>(model, mix_seed(cfg.seed, 0x1417));
  const auto corpus = load_corpus(cfg);
  const BatchSampler sampler(corpus.train, model.seq_len, model.vocab_size, mix_seed(cfg.seed, 0xda7a));
  const Batch batch = sampler.sample(0, opt.batch_size);
  auto analytic = backward<double>(params, model, batch);
  if (opt.corrupt_gradient) {
    for (auto& g : analytic) g = g * 1.01 + 1e-6;
  }
  return grad_check_against<double>(params, analytic, model, batch, opt.epsilon, opt.num_coords,
                                    mix_seed(cfg.seed, 0x9c));
}

inline std::string gradcheck_line(const RunConfig& cfg, const GradCheckOptions& opt, const GradCheckReport& rep) {
  ordered_json j;
  j["type"] = "gradcheck";
  j["version"] = kVersion;
  j["seed"] = cfg.seed;
  j["config"] = detail::config_json(cfg);
  j["epsilon"] = opt.epsilon;
  j["num_coords"] = opt.num_coords;
  j["threshold"] = opt.threshold;
  j["corrupted"] = opt.corrupt_gradient;
  j["max_rel_error"] = rep.max_rel_error;
  j["worst_index"] = rep.worst_index;
  j["worst_analytic"] = rep.worst_analytic;
  j["worst_numeric"] = rep.worst_numeric;
  j["pass"] = rep.max_rel_error < opt.threshold;
  return detail::dump_line(j);
}

}  // namespace pier
