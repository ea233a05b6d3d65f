#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "doctest.h"
#include "dsidx/core.hpp"
#include "test_util.hpp"

using namespace dsidx;

TEST_CASE("euclidean_distance on worked examples") {
  const std::vector<float> zero3{0, 0, 0}, a{3, 4}, o{0, 0}, p{1, 2, 3}, q{1, 2, 4};
  CHECK(euclidean_distance(zero3, zero3) == 0.0);
  CHECK(euclidean_distance(a, o) == doctest::Approx(5.0));
  CHECK(euclidean_distance(p, q) == doctest::Approx(1.0));
  CHECK_THROWS_AS(euclidean_distance(a, p), PreconditionError);
}

TEST_CASE("squared_distance_early_abandon") {
  const std::vector<float> a{3, 4}, o{0, 0};
  CHECK(*squared_distance_early_abandon(a, o, 25.0) == 25.0);
  CHECK_FALSE(squared_distance_early_abandon(a, o, 8.9).has_value());
  CHECK(*squared_distance_early_abandon(o, o, 0.0) == 0.0);
  CHECK_THROWS_AS(squared_distance_early_abandon(a, std::vector<float>{1}, 1.0), PreconditionError);
}

TEST_CASE("distance properties on random triples") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 500; ++t) {
    const auto a = testing::random_normalized_series(rng, 32);
    const auto b = testing::random_normalized_series(rng, 32);
    const auto c = testing::random_normalized_series(rng, 32);
    const double ab = euclidean_distance(a, b), ba = euclidean_distance(b, a);
    CHECK(ab == ba);
    CHECK(ab >= 0.0);
    const double ac = euclidean_distance(a, c), cb = euclidean_distance(c, b);
    CHECK(ab <= (ac + cb) * (1 + 1e-9));
    const auto sq = squared_distance_early_abandon(a, b, std::numeric_limits<double>::infinity());
    CHECK(*sq == doctest::Approx(ab * ab).epsilon(1e-9));
  }
}

TEST_CASE("z_normalize") {
  auto z = z_normalize(std::vector<float>{0, 2});
  CHECK(z[0] == doctest::Approx(-1.0));
  CHECK(z[1] == doctest::Approx(1.0));

  z = z_normalize(std::vector<float>{5, 5, 5, 5});
  for (float v : z) CHECK(v == 0.0f);

  // mean 2, population std sqrt(2/3): (x - 2) / 0.816497 = -1.224745, 0, 1.224745
  z = z_normalize(std::vector<float>{1, 2, 3});
  CHECK(z[0] == doctest::Approx(-1.224745).epsilon(1e-6));
  CHECK(z[1] == doctest::Approx(0.0));
  CHECK(z[2] == doctest::Approx(1.224745).epsilon(1e-6));

  CHECK_THROWS_AS(z_normalize(std::span<const float>{}), PreconditionError);
}

TEST_CASE("z_normalize is idempotent and yields mean 0 / std 1") {
  std::mt19937_64 rng(5);
  std::normal_distribution<float> g(3.0f, 7.0f);
  for (int t = 0; t < 200; ++t) {
    std::vector<float> s(64);
    for (auto& v : s) v = g(rng);
    const auto z = z_normalize(s);
    const auto zz = z_normalize(z);
    double mean = 0, var = 0;
    for (float v : z) mean += v;
    mean /= z.size();
    for (float v : z) var += (v - mean) * (v - mean);
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(std::sqrt(var / z.size()) - 1.0) < 1e-4);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::abs(z[i] - zz[i]) < 1e-6);
  }
}

TEST_CASE("knn_bruteforce on worked examples") {
  const auto ds = Dataset::from_rows({{0, 0}, {1, 1}, {3, 3}});
  const std::vector<float> q{0.1f, 0.0f};

  auto r = knn_bruteforce(ds, q, 1);
  REQUIRE(r.neighbors.size() == 1);
  CHECK(r.neighbors[0].id == 0);
  CHECK(r.neighbors[0].distance == doctest::Approx(0.1).epsilon(1e-6));

  r = knn_bruteforce(ds, q, 3);
  REQUIRE(r.neighbors.size() == 3);
  CHECK(r.ids() == std::vector<SeriesId>{0, 1, 2});
  CHECK(r.neighbors[1].distance == doctest::Approx(std::sqrt(0.81 + 1.0)).epsilon(1e-6));
  CHECK(r.neighbors[2].distance == doctest::Approx(std::sqrt(8.41 + 9.0)).epsilon(1e-6));

  r = knn_bruteforce(ds, ds.series(2), 1);
  CHECK(r.neighbors[0] == Neighbor{2, 0.0});

  CHECK_THROWS_AS(knn_bruteforce(Dataset{}, q, 1), PreconditionError);
  CHECK_THROWS_AS(knn_bruteforce(ds, q, 0), PreconditionError);
}

TEST_CASE("knn_bruteforce ties break by id and k = count returns every id") {
  const auto ds = Dataset::from_rows({{1, 1}, {0, 0}, {1, 1}, {0, 0}});
  const std::vector<float> q{0, 0};
  const auto r = knn_bruteforce(ds, q, 4);
  CHECK(r.ids() == std::vector<SeriesId>{1, 3, 0, 2});

  const auto walks = testing::normalized_walks(300, 16, 3);
  const auto all = knn_bruteforce(walks, walks.series(7), walks.size());
  const auto ids = all.ids();
  std::set<SeriesId> seen(ids.begin(), ids.end());
  CHECK(seen.size() == walks.size());
  for (std::size_t i = 1; i < all.neighbors.size(); ++i) CHECK(closer(all.neighbors[i - 1], all.neighbors[i]));
}

TEST_CASE("k larger than the dataset returns every series") {
  const auto ds = Dataset::from_rows({{0}, {1}});
  const auto r = knn_bruteforce(ds, std::vector<float>{0}, 5);
  CHECK(r.neighbors.size() == 2);
  CHECK(r.k == 5);
}

TEST_CASE("Dataset rejects non-finite values and ragged rows") {
  CHECK_THROWS_AS(Dataset::from_rows({{0, std::numeric_limits<float>::quiet_NaN()}}), PreconditionError);
  CHECK_THROWS_AS(Dataset::from_rows({{0, 1}, {0}}), PreconditionError);
  CHECK_THROWS_AS(Dataset(0, {}), PreconditionError);
}
