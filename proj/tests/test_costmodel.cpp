// Copyright 2026 The pier Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdint>
#include <random>

#include "catch_amalgamated.hpp"
#include "pier/costmodel.hpp"

using namespace pier;

namespace {

std::int64_t ulp_distance(double a, double b) {
  auto key = [](double x) {
    auto i = std::bit_cast<std::int64_t>(x);
    return i < 0 ? std::numeric_limits<std::int64_t>::min() - i : i;
  };
  const auto d = key(a) - key(b);
  return d < 0 ? -d : d;
}

ScheduleConfig sched(Iter T, double p, Iter r) {
  ScheduleConfig s;
  s.total_iters = T;
  s.warmup_fraction = p;
  s.sync_interval = r;
  return s;
}

// Ring all-reduce time, written out by hand.
double ring(double bytes, double n, double bw, double latency) {
  return 2.0 * bytes * (n - 1.0) / n / bw + latency;
}

}  // namespace

TEST_CASE("metric worked examples") {
  CHECK(speedup(100, 50) == 2.0);
  CHECK(speedup(7.5, 7.5) == 1.0);
  CHECK(perf_improvement(100, 50) == 50.0);
  CHECK(perf_improvement(3.0, 3.0) == 0.0);
  CHECK(perf_improvement(100, 150) == -50.0);
  CHECK(scaling_efficiency(100, 50, 8, 16) == 1.0);
  CHECK(ulp_distance(scaling_efficiency(100, 60, 8, 16), 5.0 / 6.0) <= 4);
  CHECK(scaling_efficiency(42, 42, 3, 3) == 1.0);
}

TEST_CASE("metrics reject non-positive inputs") {
  CHECK_THROWS_AS(speedup(0, 1), DomainError);
  CHECK_THROWS_AS(speedup(1, -1), DomainError);
  CHECK_THROWS_AS(speedup(std::nan(""), 1), DomainError);
  CHECK_THROWS_AS(perf_improvement(0, 1), DomainError);
  CHECK_NOTHROW(perf_improvement(1, 0));
  CHECK_THROWS_AS(scaling_efficiency(1, 1, 0, 1), DomainError);
  CHECK_THROWS_AS(scaling_efficiency(1, -2, 1, 1), DomainError);
}

TEST_CASE("metric identities hold to a few ulps") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(1e-3, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double a = u(rng), b = u(rng);
    CHECK(ulp_distance(speedup(a, b) * speedup(b, a), 1.0) <= 2);
    const double lhs = perf_improvement(a, b);
    const double rhs = (1.0 - 1.0 / speedup(a, b)) * 100.0;
    // Relative form: absolute cancellation near zero makes ulp counts meaningless there.
    CHECK(std::abs(lhs - rhs) <= 4 * std::numeric_limits<double>::epsilon() * std::max(100.0, std::abs(lhs)));
    const double m = std::floor(u(rng)) + 1, n = std::floor(u(rng)) + 1;
    CHECK(ulp_distance(scaling_efficiency(a, a * m / n, m, n), 1.0) <= 4);
  }
}

TEST_CASE("cost model parameter validation") {
  auto p = preset("a100-node4");
  CHECK_NOTHROW(p.validate());
  p.inter_node_bw = 2 * p.intra_node_bw;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = preset("gh200-node1");
  p.model_bytes = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK_THROWS_AS(preset("tpu"), ConfigError);
  CHECK_THROWS_AS(node_aligned_topology(6, 4), ConfigError);
  CHECK(preset_names().size() == 2);
}

TEST_CASE("baseline projection matches hand costing") {
  const auto p = per_gpu_count(preset("a100-node4"), 8);
  const auto topo = node_aligned_topology(8, 4);  // 2 nodes x 4 GPUs
  const auto s = sched(1000, 0.1, 20);
  const auto base = project_runtime(p, topo, s, Mode::AdamWBaseline);
  const double bytes = 1.558e9 * 4;
  CHECK(base.compute_time == Catch::Approx(1000 * 64.0 / 8).epsilon(1e-15));
  CHECK(base.inner_comm_time == Catch::Approx(1000 * ring(bytes, 8, 100e9, 2e-5)).epsilon(1e-12));
  CHECK(base.outer_comm_time == 0.0);
  CHECK(base.inner_events == 1000);
  CHECK(base.outer_events == 0);
  CHECK(base.total_time == base.compute_time + base.inner_comm_time + base.outer_comm_time);

  const auto pier = project_runtime(p, topo, s, Mode::Pier);
  const double inner = 100 * ring(bytes, 8, 100e9, 2e-5) + 900 * ring(bytes, 4, 900e9, 2e-5);
  CHECK(pier.inner_comm_time == Catch::Approx(inner).epsilon(1e-12));
  CHECK(pier.outer_comm_time == Catch::Approx(45 * ring(bytes, 8, 100e9, 2e-5)).epsilon(1e-12));
  CHECK(pier.inner_events == 1000);
  CHECK(pier.outer_events == 45);
  CHECK(pier.total_time == pier.compute_time + pier.inner_comm_time + pier.outer_comm_time);
  CHECK(speedup(base.total_time, pier.total_time) > 1.0);
}

TEST_CASE("tensor-parallel shards are costed on their own slice") {
  const auto p = preset("a100-node4");
  // Two TP ranks per replica halve the bytes moved by each shard's collective.
  const Topology tp2(2, 2, 2);
  const auto s = sched(1000, 0.1, 20);
  const auto r = project_runtime(p, tp2, s, Mode::AdamWBaseline);
  const double bytes = 1.558e9 * 4 / 2;
  CHECK(r.inner_comm_time == Catch::Approx(1000 * ring(bytes, 4, 100e9, 2e-5)).epsilon(1e-12));
}

TEST_CASE("single-participant collectives cost nothing") {
  const auto p = preset("gh200-node1");
  const auto s = sched(1000, 0.1, 20);
  const auto one = project_runtime(p, Topology(1, 1, 1), s, Mode::AdamWBaseline);
  CHECK(one.inner_comm_time == 0.0);
  CHECK(one.inner_events == 0);
  CHECK(one.total_time == one.compute_time);

  // One GPU per node and per group: no inner traffic after the lazy start.
  const auto topo = node_aligned_topology(4, 1);
  const auto pier = project_runtime(p, topo, s, Mode::Pier);
  const auto base = project_runtime(p, topo, s, Mode::AdamWBaseline);
  CHECK(pier.inner_events == 100);
  CHECK(pier.inner_comm_time == Catch::Approx(base.inner_comm_time / 10).epsilon(1e-12));
}

TEST_CASE("projection is monotone in bytes, bandwidth and interval") {
  const auto topo = node_aligned_topology(32, 4);
  const auto s = sched(10000, 0.1, 100);
  for (Mode m : {Mode::AdamWBaseline, Mode::Pier, Mode::DiLoCoBaseline}) {
    auto p = per_gpu_count(preset("a100-node4"), 32);
    double prev = project_runtime(p, topo, s, m).total_time;
    for (double scale : {1.5, 2.0, 4.0}) {
      auto q = p;
      q.model_bytes *= scale;
      const double t = project_runtime(q, topo, s, m).total_time;
      CHECK(t >= prev);
      prev = t;
    }
    prev = project_runtime(p, topo, s, m).total_time;
    for (double scale : {1.5, 2.0, 4.0}) {
      auto q = p;
      q.inter_node_bw *= scale;
      const double t = project_runtime(q, topo, s, m).total_time;
      CHECK(t <= prev);
      auto q2 = p;
      q2.intra_node_bw *= scale;
      CHECK(project_runtime(q2, topo, s, m).total_time <= project_runtime(p, topo, s, m).total_time);
    }
  }
  auto p = per_gpu_count(preset("a100-node4"), 32);
  double prev = std::numeric_limits<double>::infinity();
  for (Iter r : {1, 50, 100, 200, 500}) {
    const double t = project_runtime(p, topo, sched(10000, 0.1, r), Mode::Pier).total_time;
    CHECK(t <= prev);
    prev = t;
  }
}

TEST_CASE("sync interval beyond the local phase leaves at most one outer event") {
  const auto p = preset("a100-node4");
  const auto topo = node_aligned_topology(16, 4);
  const auto r = project_runtime(p, topo, sched(1000, 0.5, 500), Mode::Pier);
  CHECK(r.outer_events == 1);
  const auto r2 = project_runtime(p, topo, sched(1000, 0.4, 800), Mode::Pier);
  CHECK(r2.outer_events == 0);
  CHECK(r2.outer_comm_time == 0.0);
}

TEST_CASE("degenerate schedule costs the same as the baseline") {
  // r = 1 with one GPU per group: every iteration pays exactly one global all-reduce.
  const auto p = per_gpu_count(preset("gh200-node1"), 16);
  const auto topo = node_aligned_topology(16, 1);
  const auto s = sched(1000, 0.1, 1);
  const auto base = project_runtime(p, topo, s, Mode::AdamWBaseline);
  const auto pier = project_runtime(p, topo, s, Mode::Pier);
  CHECK(pier.total_time == Catch::Approx(base.total_time).epsilon(1e-14));
  CHECK(pier.inner_events + pier.outer_events == base.inner_events);
}

TEST_CASE("pier beats the baseline whenever inter-node links are slower") {
  for (const auto& name : preset_names()) {
    const auto single = preset(name);
    for (std::size_t n : {8u, 16u, 64u, 256u}) {
      const auto p = per_gpu_count(single, n);
      const auto topo = node_aligned_topology(n, p.gpus_per_node);
      for (Iter r : {2, 50, 500}) {
        const auto s = sched(10000, 0.1, r);
        CHECK(speedup(project_runtime(p, topo, s, Mode::AdamWBaseline).total_time,
                      project_runtime(p, topo, s, Mode::Pier).total_time) > 1.0);
      }
    }
  }
}
