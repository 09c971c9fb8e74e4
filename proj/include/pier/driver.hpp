// Copyright 2026 The pier Authors
// SPDX-License-Identifier: Apache-2.0
//
// Two-level training driver over simulated workers.
//
// Every iteration t = 1..T each replica computes a gradient on its slice of the
// global batch, gradients are averaged (across all replicas while the run is
// synchronous, inside each group otherwise), clipped, and applied by AdamW.
// Pier and the plain two-level baseline then do their outer work:
//
//   lazy start, t <= pT:  synchronous AdamW; Pier also accumulates
//                         M <- 0.9 M + (theta_t - theta_{t-r}) every r steps
//   t > pT, (t - pT) % r == 0:
//                         average the groups' parameters per TP shard and take
//                         a Nesterov outer step from the shared snapshot
//
// The inner step runs on every iteration, including sync iterations, so the
// number of AdamW steps is T regardless of r.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pier/corpus.hpp"
#include "pier/error.hpp"
#include "pier/executor.hpp"
#include "pier/host_store.hpp"
#include "pier/model.hpp"
#include "pier/optim.hpp"
#include "pier/run_config.hpp"
#include "pier/schedule.hpp"
#include "pier/topology.hpp"
#include "pier/trajectory.hpp"

namespace pier {

struct RunStats {
  std::uint64_t inner_steps = 0;         // AdamW steps taken by each worker
  std::uint64_t inner_collectives = 0;   // gradient all-reduces issued
  std::uint64_t warmup_events = 0;       // momentum accumulations during lazy start
  std::uint64_t outer_events = 0;        // outer optimizer steps
  std::uint64_t final_averages = 0;      // closing parameter average when T is off-interval
  double inner_comm_bytes = 0;
  double outer_comm_bytes = 0;
  OffloadCounters offload;
};

template <class T>
struct RunResult {
  TrajectoryLog log;
  ParamVector<T> final_params;
  RunStats stats;
};

template <class T>
struct WarmupResult {
  ParamVector<T> params;    // theta at t = pT
  ParamVector<T> momentum;  // accumulated outer momentum M
  std::vector<AdamWState<T>> adam;  // per worker, in rank order
  std::uint64_t accumulation_events = 0;
  TrajectoryLog log;
};

inline CorpusSplit load_corpus(const RunConfig& cfg) {
  if (cfg.corpus.empty()) {
    return synthetic_corpus(mix_seed(cfg.seed, 0xc0), cfg.synthetic_train_bytes,
                            cfg.synthetic_val_bytes);
  }
  return file_corpus(cfg.corpus, cfg.val_fraction);
}

template <class T>
class Trainer {
 public:
  // Called after every iteration; `outer` is true when an outer step (or the
  // closing average) has just replaced the parameters.
  using Observer = std::function<void(const Trainer&, Iter t, bool outer)>;

  explicit Trainer(RunConfig cfg, WorkersMode workers_mode = WorkersMode::Sequential)
      : cfg_(std::move(cfg)),
        topo_(cfg_.topology()),
        exec_(workers_mode),
        corpus_(load_corpus(cfg_)),
        train_sampler_(corpus_.train, cfg_.model.seq_len, cfg_.model.vocab_size,
                       mix_seed(cfg_.seed, 0xda7a)),
        lazy_iters_(cfg_.sched.lazy_start_iters()) {
    cfg_.validate();
    const BatchSampler val_sampler(corpus_.val, cfg_.model.seq_len, cfg_.model.vocab_size,
                                   mix_seed(cfg_.seed, 0x7a1));
    for (std::size_t i = 0; i < cfg_.eval_batches; ++i) {
      val_batches_.push_back(val_sampler.sample(i, cfg_.eval_batch_size));
    }

    const auto init = init_params<T>(cfg_.model, mix_seed(cfg_.seed, 0x1417));
    const std::size_t n = init.size();
    ranges_ = topo_.shard_ranges(n);
    const std::size_t replicas = topo_.replicas();
    for (std::size_t rank = 0; rank < topo_.world_size(); ++rank) {
      Worker w;
      w.coord = topo_.coord_of(rank);
      w.replica = topo_.replica_of(w.coord);
      w.shard = ranges_[w.coord.tp];
      w.params.assign(init.begin() + static_cast<std::ptrdiff_t>(w.shard.begin),
                      init.begin() + static_cast<std::ptrdiff_t>(w.shard.end));
      w.grad.assign(w.shard.size(), T(0));
      w.adam = AdamWState<T>::zeros(w.shard.size());
      w.stage = split_even(w.shard.size(), replicas)[w.replica];
      w.host = HostStore<T>(cfg_.offload);
      workers_.push_back(std::move(w));
    }
    compute_.resize(replicas);

    log_.mode = cfg_.mode;
    log_.config = config_entries(cfg_);

    if (has_outer_state()) {
      for (std::size_t s = 0; s < cfg_.tp_size; ++s) {
        OuterState<T> st{ParamVector<T>(ranges_[s].size(), T(0)), shard_of(0, s),
                         kWarmupMomentum};
        for (auto* w : shard_peers(s)) {
          w->host.account_device(static_cast<std::int64_t>(2 * ranges_[s].size() * sizeof(T)));
        }
        scatter_outer_state(s, st);
      }
    }

    TrajectoryRecord r0;
    r0.iter = 0;
    r0.phase = phase_at(0);
    r0.inner_lr = inner_lr(0, cfg_.sched);
    r0.val_loss = evaluate_replica(0);
    log_.records.push_back(r0);
  }

  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  void set_observer(Observer obs) { observer_ = std::move(obs); }

  const RunConfig& config() const { return cfg_; }
  const Topology& topology() const { return topo_; }
  const TrajectoryLog& log() const { return log_; }
  const RunStats& stats() const { return stats_; }
  Iter iteration() const { return t_; }
  Iter lazy_start_iters() const { return lazy_iters_; }
  bool done() const { return t_ >= cfg_.sched.total_iters; }

  // Full parameter vector of one replica (concatenation of its TP shards).
  ParamVector<T> replica_params(std::size_t replica) const {
    ParamVector<T> full;
    full.reserve(ranges_.back().end);
    for (std::size_t s = 0; s < cfg_.tp_size; ++s) {
      const auto& w = worker(replica, s);
      full.insert(full.end(), w.params.begin(), w.params.end());
    }
    return full;
  }

  // Outer state of one TP shard, read without moving anything between host and device.
  OuterState<T> peek_outer_state(std::size_t s) const {
    if (!has_outer_state()) throw ProtocolError("this mode keeps no outer state");
    const auto peers = shard_peers(s);
    if (!cfg_.offload) {
      return {peers.front()->momentum, peers.front()->snapshot, outer_mu_};
    }
    OuterState<T> st{{}, {}, outer_mu_};
    for (const auto* w : peers) {
      const auto& snap = w->host.peek({StateKind::Snapshot, w->replica, s});
      const auto& mom = w->host.peek({StateKind::Momentum, w->replica, s});
      st.snapshot.insert(st.snapshot.end(), snap.begin(), snap.end());
      st.momentum.insert(st.momentum.end(), mom.begin(), mom.end());
    }
    return st;
  }

  std::uint64_t snapshot_version(std::size_t rank) const { return workers_.at(rank).snapshot_version; }

  OffloadCounters offload_counters(std::size_t rank) const { return workers_.at(rank).host.counters(); }

  std::vector<AdamWState<T>> adam_states() const {
    std::vector<AdamWState<T>> out;
    for (const auto& w : workers_) out.push_back(w.adam);
    return out;
  }

  double evaluate_replica(std::size_t replica) {
    const auto params = replica_params(replica);
    double sum = 0;
    for (const auto& b : val_batches_) {
      sum += static_cast<double>(forward_loss<T>(params, cfg_.model, b, compute_[replica].cache));
    }
    return sum / static_cast<double>(val_batches_.size());
  }

  void step() {
    if (done()) throw ProtocolError("step past total_iters");
    const Iter t = ++t_;
    TrajectoryRecord rec;
    rec.iter = t;
    rec.phase = phase_at(t);
    const double comm_before = stats_.inner_comm_bytes + stats_.outer_comm_bytes;

    const Batch global = train_sampler_.sample(static_cast<std::uint64_t>(t), cfg_.global_batch);
    compute_gradients(global);
    double loss = static_cast<double>(compute_[0].loss);
    for (std::size_t j = 1; j < compute_.size(); ++j) loss += static_cast<double>(compute_[j].loss);
    loss /= static_cast<double>(compute_.size());
    if (!std::isfinite(loss)) {
      throw NumericError("non-finite training loss at iteration " + std::to_string(t), t);
    }
    rec.train_loss = loss;

    sync_gradients(rec.phase != Phase::Local);
    clip_gradients(t);
    rec.inner_lr = inner_lr(t, cfg_.sched);
    exec_.for_each(workers_.size(), [&](std::size_t i) {
      auto& w = workers_[i];
      adamw_update<T>(w.params, w.grad, w.adam, rec.inner_lr, cfg_.adamw);
    });
    stats_.inner_steps += 1;

    bool outer = false;
    if (cfg_.mode != Mode::AdamWBaseline) {
      if (t <= lazy_iters_) {
        if (cfg_.mode == Mode::Pier && t % cfg_.sched.sync_interval == 0) {
          rec.mu = accumulate_momentum();
        }
        if (t == lazy_iters_) begin_local_phase();
      } else if ((t - lazy_iters_) % cfg_.sched.sync_interval == 0) {
        const auto [lr, mu] = outer_hyperparameters(t);
        rec.outer_lr = lr;
        rec.mu = mu;
        outer_step_all(lr, mu);
        outer = true;
      } else if (t == cfg_.sched.total_iters) {
        average_groups();
        outer = true;
      }
    }

    if (is_eval_step(t)) rec.val_loss = evaluate_replica(0);
    rec.comm_bytes = stats_.inner_comm_bytes + stats_.outer_comm_bytes - comm_before;
    log_.records.push_back(rec);
    if (observer_) observer_(*this, t, outer);
  }

  void run_until(Iter t_end) {
    while (t_ < t_end && !done()) step();
  }

  RunResult<T> finish() {
    run_until(cfg_.sched.total_iters);
    auto final_params = replica_params(0);
    for (std::size_t j = 1; j < topo_.replicas(); ++j) {
      if (replica_params(j) != final_params) {
        throw ProtocolError("replicas disagree at the end of the run");
      }
    }
    RunStats stats = stats_;
    for (const auto& w : workers_) stats.offload += w.host.counters();
    return {log_, std::move(final_params), stats};
  }

 private:
  struct Worker {
    WorkerCoord coord;
    std::size_t replica = 0;
    ShardRange shard;        // this worker's TP shard of the flat vector
    ShardRange stage;        // slice of the shard this worker stages on host
    ParamVector<T> params;
    ParamVector<T> grad;
    AdamWState<T> adam;
    ParamVector<T> snapshot;  // device copies of outer state; empty while offloaded
    ParamVector<T> momentum;
    std::uint64_t snapshot_version = 0;
    HostStore<T> host;
  };

  struct ReplicaCompute {
    ForwardCache<T> cache;
    ParamVector<T> full;
    ParamVector<T> grad;
    ParamVector<T> chunk_grad;
    T loss = 0;
  };

  bool has_outer_state() const { return cfg_.mode != Mode::AdamWBaseline; }

  Phase phase_at(Iter t) const {
    if (cfg_.mode == Mode::AdamWBaseline) return Phase::Sync;
    return t <= lazy_iters_ ? Phase::LazyStart : Phase::Local;
  }

  bool is_sync_boundary(Iter t) const {
    const Iter r = cfg_.sched.sync_interval;
    return t <= lazy_iters_ ? t % r == 0 : (t - lazy_iters_) % r == 0;
  }

  bool is_eval_step(Iter t) const {
    return is_sync_boundary(t) || t == lazy_iters_ || t == cfg_.sched.total_iters;
  }

  Worker& worker(std::size_t replica, std::size_t s) {
    return workers_[replica * cfg_.tp_size + s];
  }
  const Worker& worker(std::size_t replica, std::size_t s) const {
    return workers_[replica * cfg_.tp_size + s];
  }

  std::vector<Worker*> shard_peers(std::size_t s) {
    std::vector<Worker*> out;
    for (std::size_t j = 0; j < topo_.replicas(); ++j) out.push_back(&worker(j, s));
    return out;
  }
  std::vector<const Worker*> shard_peers(std::size_t s) const {
    std::vector<const Worker*> out;
    for (std::size_t j = 0; j < topo_.replicas(); ++j) out.push_back(&worker(j, s));
    return out;
  }

  ParamVector<T> shard_of(std::size_t replica, std::size_t s) const { return worker(replica, s).params; }

  double shard_bytes(std::size_t s) const { return static_cast<double>(ranges_[s].size() * sizeof(T)); }

  void compute_gradients(const Batch& global) {
    const std::size_t mb = cfg_.micro_batch();
    exec_.for_each(compute_.size(), [&](std::size_t j) {
      auto& c = compute_[j];
      c.full = replica_params(j);
      const Batch mine = global.slice(j * mb, mb);
      double loss = 0;
      bool first = true;
      for (std::size_t at = 0; at < mb; at += cfg_.accum_chunk) {
        const std::size_t n = std::min(cfg_.accum_chunk, mb - at);
        const Batch chunk = mine.slice(at, n);
        const T chunk_loss = loss_and_grad<T>(c.full, cfg_.model, chunk, c.cache, c.chunk_grad);
        const T w = static_cast<T>(static_cast<double>(n) / static_cast<double>(mb));
        if (first) {
          c.grad.resize(c.chunk_grad.size());
          if (n == mb) {
            std::copy(c.chunk_grad.begin(), c.chunk_grad.end(), c.grad.begin());
          } else {
            for (std::size_t i = 0; i < c.grad.size(); ++i) c.grad[i] = c.chunk_grad[i] * w;
          }
          first = false;
        } else {
          for (std::size_t i = 0; i < c.grad.size(); ++i) c.grad[i] += c.chunk_grad[i] * w;
        }
        loss += static_cast<double>(chunk_loss) * (static_cast<double>(n) / static_cast<double>(mb));
      }
      c.loss = static_cast<T>(loss);
    });
  }

  // Averages per-replica gradients into each worker's grad shard.
  void sync_gradients(bool synchronous) {
    const std::size_t R = topo_.replicas();
    const std::size_t dp = topo_.dp_per_group();
    for (std::size_t s = 0; s < cfg_.tp_size; ++s) {
      const auto& range = ranges_[s];
      auto view = [&](std::size_t j) {
        return std::span<const T>(compute_[j].grad).subspan(range.begin, range.size());
      };
      auto reduce = [&](std::size_t first, std::size_t count) {
        std::vector<std::span<const T>> in;
        for (std::size_t j = first; j < first + count; ++j) in.push_back(view(j));
        auto& lead = worker(first, s).grad;
        allreduce_avg_into<T>(in, lead);
        for (std::size_t j = first + 1; j < first + count; ++j) worker(j, s).grad = lead;
        stats_.inner_collectives += 1;
        stats_.inner_comm_bytes += ring_allreduce_bytes(shard_bytes(s), count);
      };
      if (synchronous) {
        reduce(0, R);
      } else {
        for (std::size_t g = 0; g < topo_.groups(); ++g) reduce(g * dp, dp);
      }
    }
  }

  void clip_gradients(Iter t) {
    for (std::size_t j = 0; j < topo_.replicas(); ++j) {
      std::vector<std::span<T>> pieces;
      for (std::size_t s = 0; s < cfg_.tp_size; ++s) pieces.emplace_back(worker(j, s).grad);
      const double norm = clip_by_global_norm<T>(pieces, cfg_.adamw.clip_norm);
      if (!std::isfinite(norm)) {
        throw NumericError("non-finite gradient norm at iteration " + std::to_string(t), t);
      }
    }
  }

  // Collects the outer state of shard s onto the device: with offload every
  // peer reloads its staged slice and the slices are all-gathered in replica order.
  OuterState<T> gather_outer_state(std::size_t s) {
    auto peers = shard_peers(s);
    const auto version = peers.front()->snapshot_version;
    for (const auto* w : peers) {
      if (w->snapshot_version != version) {
        throw ProtocolError("workers hold different snapshot versions for shard " + std::to_string(s));
      }
    }
    if (!cfg_.offload) return {peers.front()->momentum, peers.front()->snapshot, outer_mu_};
    OuterState<T> st{{}, {}, outer_mu_};
    st.snapshot.reserve(ranges_[s].size());
    st.momentum.reserve(ranges_[s].size());
    for (auto* w : peers) {
      const auto snap = w->host.reload({StateKind::Snapshot, w->replica, s});
      const auto mom = w->host.reload({StateKind::Momentum, w->replica, s});
      st.snapshot.insert(st.snapshot.end(), snap.begin(), snap.end());
      st.momentum.insert(st.momentum.end(), mom.begin(), mom.end());
    }
    stats_.outer_comm_bytes += 2.0 * 2.0 * shard_bytes(s) *
                               static_cast<double>(peers.size() - 1) /
                               static_cast<double>(peers.size());
    return st;
  }

  // Installs a new outer state on every peer of shard s; with offload each
  // peer keeps only its staged slice, on the host.
  void scatter_outer_state(std::size_t s, const OuterState<T>& st) {
    outer_mu_ = st.mu;
    for (auto* w : shard_peers(s)) {
      w->snapshot_version += 1;
      if (cfg_.offload) {
        const auto slice = [&](const ParamVector<T>& v) {
          return std::span<const T>(v).subspan(w->stage.begin, w->stage.size());
        };
        w->host.offload({StateKind::Snapshot, w->replica, s}, slice(st.snapshot));
        w->host.offload({StateKind::Momentum, w->replica, s}, slice(st.momentum));
        // the rest of the gathered shard is scratch and is dropped
        const auto dropped = static_cast<std::int64_t>(
            2 * (st.snapshot.size() - w->stage.size()) * sizeof(T));
        w->host.account_device(-dropped);
        w->snapshot.clear();
        w->momentum.clear();
      } else {
        w->snapshot = st.snapshot;
        w->momentum = st.momentum;
      }
    }
  }

  void account_gather(std::size_t s) {
    if (!cfg_.offload) return;
    const auto gathered = static_cast<std::int64_t>(2 * ranges_[s].size() * sizeof(T));
    for (auto* w : shard_peers(s)) {
      const auto own = static_cast<std::int64_t>(2 * w->stage.size() * sizeof(T));
      w->host.account_device(gathered - own);
    }
  }

  void require_replicas_equal(std::size_t first, std::size_t count, std::size_t s) const {
    const auto& lead = worker(first, s).params;
    for (std::size_t j = first + 1; j < first + count; ++j) {
      if (worker(j, s).params != lead) {
        throw ProtocolError("replicas " + std::to_string(first) + " and " + std::to_string(j) +
                            " diverged on shard " + std::to_string(s));
      }
    }
  }

  double accumulate_momentum() {
    const double mu = cfg_.mu_override.value_or(kWarmupMomentum);
    const T m = static_cast<T>(mu);
    for (std::size_t s = 0; s < cfg_.tp_size; ++s) {
      require_replicas_equal(0, topo_.replicas(), s);
      auto st = gather_outer_state(s);
      account_gather(s);
      const auto& theta = worker(0, s).params;
      for (std::size_t i = 0; i < theta.size(); ++i) {
        st.momentum[i] = m * st.momentum[i] + (theta[i] - st.snapshot[i]);
      }
      st.snapshot = theta;
      st.mu = mu;
      scatter_outer_state(s, st);
    }
    stats_.warmup_events += 1;
    return mu;
  }

  // At t = pT: the snapshot becomes theta_pT; the plain baseline also starts
  // from zero momentum.
  void begin_local_phase() {
    for (std::size_t s = 0; s < cfg_.tp_size; ++s) {
      require_replicas_equal(0, topo_.replicas(), s);
      auto st = gather_outer_state(s);
      account_gather(s);
      st.snapshot = worker(0, s).params;
      if (cfg_.mode == Mode::DiLoCoBaseline) std::fill(st.momentum.begin(), st.momentum.end(), T(0));
      scatter_outer_state(s, st);
    }
  }

  std::pair<double, double> outer_hyperparameters(Iter t) const {
    if (cfg_.mode == Mode::DiLoCoBaseline) {
      return {cfg_.outer_lr_override.value_or(kBaselineOuterLr),
              cfg_.mu_override.value_or(kBaselineOuterMomentum)};
    }
    const Iter T_ = cfg_.sched.total_iters;
    const double lr = cfg_.outer_lr_override ? *cfg_.outer_lr_override : outer_lr(t, T_);
    const double mu = cfg_.mu_override ? *cfg_.mu_override : momentum_mu(t, T_);
    return {lr, mu};
  }

  // Group-representative shards (DP rank 0 of each group); all DP ranks of a
  // group must agree bitwise.
  std::vector<std::span<const T>> group_shards(std::size_t s) const {
    const std::size_t dp = topo_.dp_per_group();
    std::vector<std::span<const T>> out;
    for (std::size_t g = 0; g < topo_.groups(); ++g) {
      require_replicas_equal(g * dp, dp, s);
      out.emplace_back(worker(g * dp, s).params);
    }
    return out;
  }

  void install_shard(std::size_t s, const ParamVector<T>& params) {
    for (auto* w : shard_peers(s)) w->params = params;
  }

  void outer_step_all(double lr, double mu) {
    for (std::size_t s = 0; s < cfg_.tp_size; ++s) {
      auto st = gather_outer_state(s);
      account_gather(s);
      const auto average = allreduce_avg<T>(group_shards(s));
      stats_.outer_comm_bytes += ring_allreduce_bytes(shard_bytes(s), topo_.replicas());
      auto result = outer_step_from_average<T>(st, average, lr, mu);
      if (!all_finite<T>(result.params)) {
        throw NumericError("non-finite parameters after outer step at iteration " +
                               std::to_string(t_), t_);
      }
      install_shard(s, result.params);
      result.state.snapshot = std::move(result.params);
      scatter_outer_state(s, result.state);
    }
    stats_.outer_events += 1;
  }

  void average_groups() {
    for (std::size_t s = 0; s < cfg_.tp_size; ++s) {
      const auto average = allreduce_avg<T>(group_shards(s));
      stats_.outer_comm_bytes += ring_allreduce_bytes(shard_bytes(s), topo_.replicas());
      install_shard(s, average);
    }
    stats_.final_averages += 1;
  }

  RunConfig cfg_;
  Topology topo_;
  Executor exec_;
  CorpusSplit corpus_;
  BatchSampler train_sampler_;
  std::vector<Batch> val_batches_;
  Iter lazy_iters_;
  std::vector<ShardRange> ranges_;
  std::vector<Worker> workers_;
  std::vector<ReplicaCompute> compute_;
  double outer_mu_ = kWarmupMomentum;
  TrajectoryLog log_;
  RunStats stats_;
  Iter t_ = 0;
  Observer observer_;
};

template <class T>
RunResult<T> run_training(const RunConfig& cfg, WorkersMode wm = WorkersMode::Sequential) {
  Trainer<T> trainer(cfg, wm);
  return trainer.finish();
}

template <class T>
RunResult<T> run_pier(const RunConfig& cfg, WorkersMode wm = WorkersMode::Sequential) {
  if (cfg.mode != Mode::Pier) throw ConfigError("run_pier: mode must be pier");
  return run_training<T>(cfg, wm);
}

template <class T>
RunResult<T> run_adamw_baseline(const RunConfig& cfg, WorkersMode wm = WorkersMode::Sequential) {
  if (cfg.mode != Mode::AdamWBaseline) throw ConfigError("run_adamw_baseline: mode must be adamw_baseline");
  return run_training<T>(cfg, wm);
}

template <class T>
RunResult<T> run_diloco_baseline(const RunConfig& cfg, WorkersMode wm = WorkersMode::Sequential) {
  if (cfg.mode != Mode::DiLoCoBaseline) throw ConfigError("run_diloco_baseline: mode must be diloco_baseline");
  return run_training<T>(cfg, wm);
}

// Runs only the synchronous lazy-start phase of a Pier run.
template <class T>
WarmupResult<T> momentum_warmup_phase(const RunConfig& cfg,
                                      WorkersMode wm = WorkersMode::Sequential) {
  if (cfg.mode != Mode::Pier) throw ConfigError("momentum warmup: mode must be pier");
  Trainer<T> trainer(cfg, wm);
  trainer.run_until(trainer.lazy_start_iters());
  WarmupResult<T> out;
  out.params = trainer.replica_params(0);
  ParamVector<T> momentum;
  for (std::size_t s = 0; s < cfg.tp_size; ++s) {
    const auto st = trainer.peek_outer_state(s);
    momentum.insert(momentum.end(), st.momentum.begin(), st.momentum.end());
  }
  out.momentum = std::move(momentum);
  out.adam = trainer.adam_states();
  out.accumulation_events = trainer.stats().warmup_events;
  out.log = trainer.log();
  return out;
}

// Mean validation loss of params over `batches`.
template <class T>
double evaluate(std::span<const T> params, const ModelConfig& cfg, const std::vector<Batch>& batches) {
  if (batches.empty()) throw ConfigError("evaluate: no validation batches");
  ForwardCache<T> cache;
  double sum = 0;
  for (const auto& b : batches) sum += static_cast<double>(forward_loss<T>(params, cfg, b, cache));
  return sum / static_cast<double>(batches.size());
}

}  // namespace pier
