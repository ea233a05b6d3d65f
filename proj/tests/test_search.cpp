#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "dsidx/search.hpp"
#include "test_util.hpp"

using namespace dsidx;

namespace {

constexpr IndexKind kAllKinds[] = {IndexKind::kIsax, IndexKind::kEapcaTree, IndexKind::kVaFile};

IndexParams params_with(std::size_t capacity) {
  IndexParams p;
  p.leaf_capacity = capacity;
  return p;
}

Dataset workload(std::size_t count, std::uint64_t seed) {
  return z_normalize(gen_queries(gen_random_walk({2000, 64, 77}), {count, {0.0, 0.1, 1.0}, seed}).queries);
}

}  // namespace

TEST_CASE("exact search equals brute force on every index") {
  const auto ds = testing::normalized_walks(2000, 64, 77);
  const auto queries = workload(40, 3);
  for (auto kind : kAllKinds) {
    CAPTURE(to_string(kind));
    const auto index = build_index(kind, ds, params_with(40));
    for (std::size_t k : {1u, 10u}) {
      for (std::size_t q = 0; q < queries.size(); ++q) {
        const auto expected = knn_bruteforce(ds, queries.series(q), k);
        const auto got = exact_knn(*index, queries.series(q), k);
        REQUIRE(got.result.neighbors.size() == k);
        CHECK(got.result.ids() == expected.ids());
        for (std::size_t r = 0; r < k; ++r) {
          CHECK(got.result.neighbors[r].distance ==
                doctest::Approx(expected.neighbors[r].distance).epsilon(1e-4));
        }
        CHECK(got.stats.raw_compared <= ds.size());
        CHECK(got.stats.bytes_read == got.stats.raw_compared * 64 * sizeof(float));
      }
    }
  }
}

TEST_CASE("k equal to or above dataset size returns everything") {
  const auto ds = testing::normalized_walks(30, 16, 5);
  for (auto kind : kAllKinds) {
    const auto index = build_index(kind, ds, params_with(4));
    auto r = exact_knn(*index, ds.series(3), 30);
    CHECK(r.result.neighbors.size() == 30);
    CHECK_FALSE(r.k_truncated);
    r = exact_knn(*index, ds.series(3), 45);
    CHECK(r.result.neighbors.size() == 30);
    CHECK(r.k_truncated);
    CHECK(r.result.ids() == knn_bruteforce(ds, ds.series(3), 30).ids());
  }
}

TEST_CASE("ng search: full probe is exact, partial probe is never better") {
  const auto ds = testing::normalized_walks(1000, 64, 12);
  const auto queries = workload(30, 4);
  for (auto kind : kAllKinds) {
    CAPTURE(to_string(kind));
    const auto index = build_index(kind, ds, params_with(25));
    const std::size_t all = kind == IndexKind::kVaFile ? ds.size() : index->leaf_count();
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const auto exact = knn_bruteforce(ds, queries.series(q), 5);
      const auto full = ng_approx_knn(*index, queries.series(q), 5, all);
      CHECK(full.result.ids() == exact.ids());
      for (std::size_t nprobe : {1u, 3u}) {
        const auto r = ng_approx_knn(*index, queries.series(q), 5, nprobe);
        if (kind != IndexKind::kVaFile) CHECK(r.stats.leaves_visited <= nprobe);
        if (r.result.neighbors.size() == 5) {
          CHECK(r.result.neighbors.back().distance >= exact.neighbors.back().distance - 1e-9);
        }
        for (std::size_t i = 0; i < r.result.neighbors.size(); ++i) {
          CHECK(r.result.neighbors[i].distance >= exact.neighbors[i].distance - 1e-9);
        }
      }
    }
    // a query equal to an indexed series reaches its own leaf first (trees only;
    // VA+ scans cells in file order)
    if (kind == IndexKind::kVaFile) continue;
    for (std::size_t i = 0; i < ds.size(); i += 97) {
      const auto r = ng_approx_knn(*index, ds.series(i), 1, 1);
      CHECK(r.result.neighbors[0].distance == 0.0);
    }
  }
}

TEST_CASE("delta-epsilon with epsilon 0 and delta 1 is exact search") {
  const auto ds = testing::normalized_walks(2000, 64, 77);
  const auto queries = workload(30, 8);
  for (auto kind : kAllKinds) {
    CAPTURE(to_string(kind));
    const auto index = build_index(kind, ds, params_with(40));
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const auto a = exact_knn(*index, queries.series(q), 10);
      const auto b = delta_epsilon_knn(*index, queries.series(q), 10, 0.0, 1.0, nullptr);
      CHECK(a.result.neighbors == b.result.neighbors);
      CHECK(a.stats == b.stats);
      CHECK(b.guarantee.exit == EarlyExit::kNone);
    }
  }
}

TEST_CASE("epsilon guarantee and counter monotonicity") {
  const auto ds = testing::normalized_walks(2000, 64, 77);
  const auto queries = workload(40, 9);
  const double eps_values[] = {0.0, 0.5, 1.0, 2.0, 5.0};
  for (auto kind : kAllKinds) {
    CAPTURE(to_string(kind));
    const auto index = build_index(kind, ds, params_with(40));
    std::vector<double> leaves, raw;
    for (double eps : eps_values) {
      double l = 0, c = 0;
      for (std::size_t q = 0; q < queries.size(); ++q) {
        const auto exact = knn_bruteforce(ds, queries.series(q), 10);
        const double kth = exact.neighbors.back().distance;
        const auto r = delta_epsilon_knn(*index, queries.series(q), 10, eps, 1.0, nullptr);
        for (const auto& n : r.result.neighbors) CHECK(n.distance <= (1.0 + eps) * kth + 1e-9);
        for (std::size_t i = 0; i < 10; ++i) {
          CHECK(r.result.neighbors[i].distance <= (1.0 + eps) * exact.neighbors[i].distance + 1e-9);
        }
        l += static_cast<double>(r.stats.leaves_visited);
        c += static_cast<double>(r.stats.raw_compared);
      }
      leaves.push_back(l);
      raw.push_back(c);
    }
    for (std::size_t i = 1; i < leaves.size(); ++i) {
      CHECK(leaves[i] <= leaves[i - 1]);
      CHECK(raw[i] <= raw[i - 1]);
    }
  }
}

TEST_CASE("bsf trace is non-increasing") {
  const auto ds = testing::normalized_walks(1500, 64, 41);
  const auto queries = workload(20, 2);
  for (auto kind : kAllKinds) {
    const auto index = build_index(kind, ds, params_with(30));
    for (std::size_t q = 0; q < queries.size(); ++q) {
      for (const auto& r : {exact_knn(*index, queries.series(q), 5),
                            delta_epsilon_knn(*index, queries.series(q), 5, 1.0, 1.0, nullptr)}) {
        CHECK_FALSE(r.bsf_trace.empty());
        for (std::size_t i = 1; i < r.bsf_trace.size(); ++i) CHECK(r.bsf_trace[i] <= r.bsf_trace[i - 1]);
      }
    }
  }
}

TEST_CASE("distance distribution examples") {
  SUBCASE("two identical series") {
    const auto ds = Dataset::from_rows({{1, 2, 3}, {1, 2, 3}});
    const auto f = estimate_distance_distribution(ds, 2, 50, 1);
    CHECK(f.d_max() == 0.0);
    CHECK(f.counts()[0] == 50);
    CHECK(f.cdf(1e-12) == 1.0);
    CHECK(f.quantile(0.3) == 0.0);
  }
  SUBCASE("a 3-4-5 pair") {
    const auto ds = Dataset::from_rows({{0, 0}, {3, 4}});
    const auto f = estimate_distance_distribution(ds, 2, 10, 1);
    CHECK(f.d_max() == doctest::Approx(5.0));
    CHECK(f.counts().back() == 10);
    CHECK(f.cdf(5.0) == 1.0);
  }
  SUBCASE("cdf is monotone and ends at one") {
    const auto ds = testing::normalized_walks(300, 32, 6);
    const auto f = estimate_distance_distribution(ds, 200, 5000, 3);
    CHECK(f.pairs() == 5000);
    double prev = 0.0;
    for (int i = 0; i <= 200; ++i) {
      const double c = f.cdf(f.d_max() * i / 200.0);
      CHECK(c >= prev);
      prev = c;
    }
    CHECK(prev == 1.0);
    const auto g = estimate_distance_distribution(ds, 200, 5000, 3);
    CHECK(f.counts() == g.counts());
  }
  CHECK_THROWS_AS(estimate_distance_distribution(Dataset::from_rows({{1, 2}}), 1, 5, 0), PreconditionError);
}

TEST_CASE("delta radius") {
  // uniform density over [0, 1]
  const DistanceDistribution uniform(std::vector<std::uint64_t>(1000, 1000), 1.0, 1000);
  const double expected = 1.0 - std::pow(0.5, 0.01);
  const auto r = calc_delta_radius(uniform, 0.5, 100);
  CHECK_FALSE(r.resolution_limited);
  CHECK(r.r_delta == doctest::Approx(expected).epsilon(1e-9));
  CHECK(r.r_delta == doctest::Approx(0.0069).epsilon(0.01));

  CHECK(calc_delta_radius(uniform, 1.0, 100).r_delta == 0.0);
  double prev = 1e9;
  for (std::size_t n : {10u, 100u, 1000u, 10000u, 100000u}) {
    const double v = calc_delta_radius(uniform, 0.9, n).r_delta;
    CHECK(v <= prev);
    prev = v;
  }
  prev = 1e9;
  for (double d : {0.05, 0.2, 0.5, 0.8, 0.95, 0.999, 1.0}) {
    const double v = calc_delta_radius(uniform, d, 1000).r_delta;
    CHECK(v <= prev);
    prev = v;
  }
  std::vector<std::uint64_t> sparse(1000, 0);
  sparse[500] = 10;
  const DistanceDistribution tiny(sparse, 1.0, 2);
  const auto limited = calc_delta_radius(tiny, 0.99, 100000);
  CHECK(limited.resolution_limited);
  CHECK(limited.r_delta == 0.0);
  CHECK_THROWS_AS(calc_delta_radius(uniform, 0.0, 10), PreconditionError);
}

TEST_CASE("delta below one needs a distribution and can exit early") {
  const auto ds = testing::normalized_walks(2000, 64, 77);
  const auto index = build_index(IndexKind::kIsax, ds, params_with(40));
  const auto q = ds.series(5);
  CHECK_THROWS_AS(delta_epsilon_knn(*index, q, 1, 0.0, 0.9, nullptr), PreconditionError);
  CHECK_THROWS_AS(search(*index, q, SearchParams::guaranteed(1, -1.0, 1.0)), PreconditionError);
  CHECK_THROWS_AS(search(*index, q, SearchParams::ng(1, 0)), PreconditionError);

  const auto f = estimate_distance_distribution(ds, 1000, 100000, 1);
  const auto r = delta_epsilon_knn(*index, q, 1, 0.0, 0.5, &f);
  CHECK(r.guarantee.radius.r_delta > 0.0);
  // self-query: distance 0 is within any radius as soon as the seed finds it
  CHECK(r.guarantee.exit == EarlyExit::kAfterSeed);
  CHECK(r.result.neighbors[0] == Neighbor{5, 0.0});
}

TEST_CASE("delta 0.95 succeeds on most queries") {
  const auto ds = testing::normalized_walks(2000, 64, 77);
  const auto queries = workload(100, 21);
  const auto f = estimate_distance_distribution(ds, 1000, 100000, 2);
  for (auto kind : kAllKinds) {
    CAPTURE(to_string(kind));
    const auto index = build_index(kind, ds, params_with(40));
    int exact_hits = 0;
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const auto r = delta_epsilon_knn(*index, queries.series(q), 1, 0.0, 0.95, &f);
      exact_hits += r.result.ids() == knn_bruteforce(ds, queries.series(q), 1).ids();
    }
    CHECK(exact_hits >= 90);
  }
}

TEST_CASE("range queries equal a brute-force filter") {
  std::vector<std::vector<float>> rows;
  const auto base = testing::normalized_walks(600, 32, 19);
  for (std::size_t i = 0; i < base.size(); ++i) rows.emplace_back(base.series(i).begin(), base.series(i).end());
  rows.push_back(rows[10]);
  rows.push_back(rows[10]);
  const auto ds = Dataset::from_rows(rows);
  const auto ds_norm = z_normalize(ds);
  std::mt19937_64 rng(2);
  for (auto kind : kAllKinds) {
    CAPTURE(to_string(kind));
    const auto index = build_index(kind, ds_norm, params_with(20));
    const auto q0 = ds_norm.series(10);
    CHECK(range_query(*index, q0, 0.0).ids == std::vector<SeriesId>{10, 600, 601});
    CHECK(range_query(*index, q0, std::numeric_limits<double>::infinity()).ids.size() == ds.size());
    for (int t = 0; t < 20; ++t) {
      const auto q = testing::random_normalized_series(rng, 32);
      const double radius = std::uniform_real_distribution<double>(2.0, 7.0)(rng);
      std::vector<SeriesId> expected;
      for (std::size_t i = 0; i < ds_norm.size(); ++i) {
        if (euclidean_distance(q, ds_norm.series(i)) <= radius) expected.push_back(static_cast<SeriesId>(i));
      }
      CHECK(range_query(*index, q, radius).ids == expected);
    }
  }
  CHECK_THROWS_AS(range_query(*build_index(IndexKind::kIsax, ds_norm, params_with(20)), ds_norm.series(0), -1.0),
                  PreconditionError);
}
