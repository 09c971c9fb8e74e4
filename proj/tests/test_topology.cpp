// Copyright 2026 The pier Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <set>

#include "catch_amalgamated.hpp"
#include "pier/topology.hpp"

using namespace pier;

namespace {

std::vector<double> randn(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

std::uint64_t ulp_distance(double a, double b) {
  const auto ia = std::bit_cast<std::int64_t>(a), ib = std::bit_cast<std::int64_t>(b);
  return static_cast<std::uint64_t>(ia > ib ? ia - ib : ib - ia);
}

}  // namespace

TEST_CASE("rank mapping is a bijection with contiguous TP ranks") {
  for (auto [k, dp, tp] : std::vector<std::tuple<int, int, int>>{{1, 1, 1}, {2, 2, 2}, {8, 1, 1}, {3, 2, 4}}) {
    const Topology topo(k, dp, tp);
    CHECK(topo.world_size() == static_cast<std::size_t>(k * dp * tp));
    std::set<std::size_t> seen;
    for (std::size_t r = 0; r < topo.world_size(); ++r) {
      const auto c = topo.coord_of(r);
      CHECK(topo.rank_of(c) == r);
      seen.insert(r);
    }
    CHECK(seen.size() == topo.world_size());
    for (std::size_t rep = 0; rep < topo.replicas(); ++rep) {
      const auto ranks = topo.replica_ranks(rep);
      for (std::size_t i = 1; i < ranks.size(); ++i) CHECK(ranks[i] == ranks[i - 1] + 1);
    }
  }
}

TEST_CASE("two groups of two DP ranks with two TP ranks") {
  const Topology topo(2, 2, 2);
  CHECK(topo.world_size() == 8);
  // inner group 0 for TP rank 0 holds the first TP shard of DP ranks 0 and 1
  CHECK(topo.inner_group_ranks(0, 0) == std::vector<std::size_t>{0, 2});
  CHECK(topo.inner_group_ranks(0, 1) == std::vector<std::size_t>{1, 3});
  CHECK(topo.inner_group_ranks(1, 0) == std::vector<std::size_t>{4, 6});
  // outer participants for TP rank 0: one rank per DP rank across all groups
  CHECK(topo.shard_peer_ranks(0) == std::vector<std::size_t>{0, 2, 4, 6});
  CHECK(topo.shard_peer_ranks(1) == std::vector<std::size_t>{1, 3, 5, 7});
}

TEST_CASE("eight single-worker groups and the singleton topology") {
  const Topology eight(8, 1, 1);
  CHECK(eight.groups() == 8);
  for (std::size_t g = 0; g < 8; ++g) CHECK(eight.inner_group_ranks(g, 0) == std::vector<std::size_t>{g});
  const Topology one(1, 1, 1);
  CHECK(one.world_size() == 1);
  const std::vector<std::vector<double>> single{{1.5, -2.0}};
  CHECK(allreduce_avg<double>(single) == single[0]);
  CHECK_THROWS_AS(Topology(0, 1, 1), ConfigError);
  CHECK_THROWS_AS(Topology(1, 0, 1), ConfigError);
  CHECK_THROWS_AS(Topology(1, 1, 0), ConfigError);
}

TEST_CASE("allreduce average") {
  const std::vector<std::vector<double>> two{{1, 3}, {3, 5}};
  CHECK(allreduce_avg<double>(two) == std::vector<double>{2, 4});
  const std::vector<std::vector<double>> bad{{1, 2}, {1}};
  CHECK_THROWS_AS(allreduce_avg<double>(bad), ProtocolError);
  const std::vector<std::vector<double>> none;
  CHECK_THROWS_AS(allreduce_avg<double>(none), ProtocolError);

  for (std::size_t n : {2, 3, 5, 8}) {
    const auto v = randn(257, n);
    const std::vector<std::vector<double>> same(n, v);
    const auto avg = allreduce_avg<double>(same);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(ulp_distance(avg[i], v[i]) <= 1);
  }
}

TEST_CASE("inner gradient sync") {
  const Topology topo(2, 2, 1);
  const std::vector<double> a{2}, b{4};
  const std::span<const double> both[] = {a, b};
  CHECK(inner_gradient_sync<double>(topo, 0, both) == std::vector<double>{3});
  const std::span<const double> only[] = {a};
  CHECK_THROWS_AS(inner_gradient_sync<double>(topo, 0, only), ProtocolError);
  const Topology solo(3, 1, 1);
  CHECK(inner_gradient_sync<double>(solo, 2, only) == a);
}

TEST_CASE("outer delta sync") {
  const Topology two(2, 1, 1);
  const std::vector<double> d1{1}, d3{3};
  const std::span<const double> pair[] = {d1, d3};
  CHECK(outer_delta_sync<double>(two, pair, 0, 1) == std::vector<double>{2});

  const Topology one(1, 1, 1);
  const std::span<const double> single[] = {d3};
  CHECK(outer_delta_sync<double>(one, single, 0, 1) == d3);

  const Topology four(4, 1, 1);
  const auto d = randn(33, 4);
  std::vector<double> neg(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) neg[i] = -d[i];
  const std::span<const double> alt[] = {d, neg, d, neg};
  for (double x : outer_delta_sync<double>(four, alt, 0, 33)) CHECK(x == 0.0);

  const Topology tp2(2, 1, 2);
  const std::vector<double> shard(16, 1.0);
  const std::span<const double> shards[] = {shard, shard};
  CHECK_NOTHROW(outer_delta_sync<double>(tp2, shards, 1, 32));
  CHECK_THROWS_AS(outer_delta_sync<double>(tp2, shards, 1, 34), ProtocolError);
  CHECK_THROWS_AS(outer_delta_sync<double>(tp2, shards, 2, 32), ProtocolError);
}

TEST_CASE("mean of deltas equals mean of parameters minus the shared snapshot") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto snap = randn(128, seed);
    std::vector<std::vector<double>> params, deltas;
    for (int g = 0; g < 4; ++g) {
      auto p = randn(128, 1000 * seed + g);
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = snap[i] + 0.01 * p[i];
      std::vector<double> d(128);
      for (std::size_t i = 0; i < p.size(); ++i) d[i] = p[i] - snap[i];
      params.push_back(p);
      deltas.push_back(d);
    }
    const auto mean_delta = allreduce_avg<double>(deltas);
    const auto mean_param = allreduce_avg<double>(params);
    for (std::size_t i = 0; i < snap.size(); ++i) {
      // compare in delta units: the subtraction is exact to within 4 ulps of the delta
      const double via_params = mean_param[i] - snap[i];
      CHECK(std::abs(via_params - mean_delta[i]) <=
            4 * std::numeric_limits<double>::epsilon() * std::abs(mean_param[i]));
    }
  }
}

TEST_CASE("sharding reconstructs the full vector") {
  const auto full = randn(1001, 3);
  for (std::size_t tp : {1, 2, 3, 7}) {
    const auto sp = ShardedParams<double>::split(full, tp);
    CHECK(sp.concat() == full);
    std::size_t lo = full.size(), hi = 0;
    for (const auto& r : sp.ranges) {
      lo = std::min(lo, r.size());
      hi = std::max(hi, r.size());
    }
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("ring all-reduce traffic") {
  CHECK(ring_allreduce_bytes(100.0, 1) == 0.0);
  CHECK(ring_allreduce_bytes(100.0, 4) == 600.0);
}
