#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "dsidx/eapca_tree.hpp"
#include "dsidx/io.hpp"
#include "dsidx/isax_index.hpp"
#include "dsidx/persist.hpp"
#include "dsidx/search.hpp"
#include "dsidx/va_file.hpp"
#include "test_util.hpp"

using namespace dsidx;

namespace {

constexpr IndexKind kAllKinds[] = {IndexKind::kIsax, IndexKind::kEapcaTree, IndexKind::kVaFile};

IndexParams small_params(std::size_t capacity = 20) {
  IndexParams p;
  p.leaf_capacity = capacity;
  return p;
}

// Root-to-leaf paths, keyed by leaf.
void collect_paths(const Index& index, NodeId node, std::vector<NodeId>& path,
                   std::vector<std::pair<NodeId, std::vector<NodeId>>>& out) {
  path.push_back(node);
  if (index.is_leaf(node)) {
    out.emplace_back(node, path);
  } else {
    for (NodeId c : index.children(node)) collect_paths(index, c, path, out);
  }
  path.pop_back();
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& p) { return read_file(p); }

}  // namespace

TEST_CASE("single-series datasets build into one leaf") {
  const auto ds = testing::normalized_walks(1, 32, 1);
  for (auto kind : kAllKinds) {
    CAPTURE(to_string(kind));
    const auto index = build_index(kind, ds, small_params());
    CHECK(index->leaf_count() == 1);
    CHECK(index->size() == 1);
    const auto r = exact_knn(*index, ds.series(0), 1);
    CHECK(r.result.neighbors[0] == Neighbor{0, 0.0});
  }
}

TEST_CASE("build rejects empty data and mismatched normalization") {
  const auto raw = gen_random_walk({10, 16, 1});
  CHECK_THROWS_AS(IsaxIndex::build(raw, IndexParams{}), PreconditionError);
  CHECK_THROWS_AS(IsaxIndex::build(Dataset{}, IndexParams{}), PreconditionError);
  IndexParams p;
  p.leaf_capacity = 0;
  CHECK_THROWS_AS(EapcaTreeIndex::build(z_normalize(raw), p), PreconditionError);
  CHECK_THROWS_AS(parse_index_kind("kd-tree"), PreconditionError);
}

TEST_CASE("containment, capacity and per-path bound validity") {
  const auto ds = testing::normalized_walks(3000, 64, 17);
  std::mt19937_64 rng(4);
  for (auto kind : kAllKinds) {
    CAPTURE(to_string(kind));
    const auto index = build_index(kind, ds, small_params(25));

    std::vector<SeriesId> all;
    for (NodeId r : index->roots()) {
      const auto ids = ids_in(*index, r);
      all.insert(all.end(), ids.begin(), ids.end());
    }
    std::sort(all.begin(), all.end());
    REQUIRE(all.size() == ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);

    std::vector<std::pair<NodeId, std::vector<NodeId>>> paths;
    std::vector<NodeId> scratch;
    for (NodeId r : index->roots()) collect_paths(*index, r, scratch, paths);
    CHECK(paths.size() == index->leaf_count());
    std::size_t over = 0;
    for (const auto& [leaf, path] : paths) {
      const auto span = index->leaf(leaf);
      if (span.count > index->params().leaf_capacity) ++over;
    }
    CHECK(over == index->overflow_leaves());

    int violations = 0, non_monotone = 0;
    for (int t = 0; t < 30; ++t) {
      const auto q = testing::random_normalized_series(rng, 64);
      const auto bounds = index->bounds_for(q);
      for (const auto& [leaf, path] : paths) {
        double prev = 0.0;
        for (NodeId n : path) {
          const double b = bounds->min_dist(n);
          non_monotone += b + 1e-9 < prev;
          prev = b;
        }
        const auto span = index->leaf(leaf);
        for (std::uint32_t s = 0; s < span.count; ++s) {
          const double d = euclidean_distance(q, index->storage().series(span.first_slot + s));
          for (NodeId n : path) violations += bounds->min_dist(n) > d + 1e-6;
        }
      }
    }
    CHECK(violations == 0);
    if (kind == IndexKind::kIsax) CHECK(non_monotone == 0);
  }
}

TEST_CASE("isax words of leaf members match the leaf prefix") {
  const auto ds = testing::normalized_walks(2000, 64, 8);
  const auto index = IsaxIndex::build(ds, small_params(30));
  const std::vector<std::uint8_t> full(16, 8);
  for (std::size_t n = 1; n < index.nodes().size(); ++n) {
    const auto& node = index.nodes()[n];
    if (!node.leaf) continue;
    for (std::uint32_t s = 0; s < node.span.count; ++s) {
      const auto w = sax_from_paa(paa(index.storage().series(node.span.first_slot + s), 16), full);
      CHECK(sax_covers(node.word, w));
    }
  }
}

TEST_CASE("eapca leaf members lie inside their synopsis") {
  const auto ds = testing::normalized_walks(2000, 64, 9);
  const auto index = EapcaTreeIndex::build(ds, small_params(30));
  for (const auto& node : index.nodes()) {
    if (!node.leaf) continue;
    for (std::uint32_t s = 0; s < node.span.count; ++s) {
      const auto st = eapca(index.storage().series(node.span.first_slot + s), node.synopsis.segmentation);
      CHECK(node.synopsis.contains(st.stats));
    }
  }
}

TEST_CASE("eapca falls back to vertical splits when one segment cannot separate") {
  // a single segment over normalized data has mean 0 and std 1 for every series
  const auto ds = testing::normalized_walks(200, 32, 10);
  IndexParams p = small_params(10);
  p.eapca_initial_segments = 1;
  const auto index = EapcaTreeIndex::build(ds, p);
  REQUIRE_FALSE(index.nodes()[0].leaf);
  CHECK(index.nodes()[0].rule.vertical);
  CHECK(index.nodes()[index.nodes()[0].children[0]].synopsis.segmentation.size() == 2);
  const auto r = exact_knn(index, ds.series(3), 5);
  CHECK(r.result.ids() == knn_bruteforce(ds, ds.series(3), 5).ids());
}

TEST_CASE("degenerate inputs: identical series overflow instead of looping") {
  std::vector<std::vector<float>> rows(50, std::vector<float>{-1, 1, -1, 1, 0, 0, 2, -2});
  const auto ds = z_normalize(Dataset::from_rows(rows));
  IndexParams p = small_params(1);
  p.segments = 4;
  for (auto kind : {IndexKind::kIsax, IndexKind::kEapcaTree}) {
    CAPTURE(to_string(kind));
    const auto index = build_index(kind, ds, p);
    CHECK(index->overflow_leaves() >= 1);
    const auto r = exact_knn(*index, ds.series(0), 3);
    CHECK(r.result.ids() == std::vector<SeriesId>{0, 1, 2});
  }
  const auto va = VaFile::build(ds, p);
  for (std::size_t i = 1; i < ds.size(); ++i) {
    CHECK(std::equal(va.cell(0).begin(), va.cell(0).end(), va.cell(i).begin()));
  }
}

TEST_CASE("isax capacity 1 with two identical words flags an overflow leaf") {
  const auto ds = z_normalize(Dataset::from_rows({{1, 2, 3, 4}, {1, 2, 3, 4}}));
  IndexParams p = small_params(1);
  const auto index = IsaxIndex::build(ds, p);
  CHECK(index.overflow_leaves() == 1);
}

TEST_CASE("self-query finds every series at distance zero") {
  const auto ds = testing::normalized_walks(10000, 64, 23);
  for (auto kind : kAllKinds) {
    CAPTURE(to_string(kind));
    const auto index = build_index(kind, ds, IndexParams{});
    int misses = 0;
    for (std::size_t i = 0; i < ds.size(); i += 7) {
      const auto r = exact_knn(*index, ds.series(i), 1);
      misses += !(r.result.neighbors[0].id == i && r.result.neighbors[0].distance == 0.0);
    }
    CHECK(misses == 0);
  }
}

TEST_CASE("persist/load round trip answers identically") {
  const auto ds = testing::normalized_walks(1000, 64, 31);
  const auto queries = z_normalize(gen_queries(gen_random_walk({1000, 64, 31}), {10, {0.1, 1.0}, 5}).queries);
  for (auto kind : kAllKinds) {
    CAPTURE(to_string(kind));
    testing::TempDir dir("persist");
    const auto index = build_index(kind, ds, small_params(30));
    persist(*index, dir.path());
    const auto loaded = load_index(dir.path());
    CHECK(loaded->kind() == kind);
    CHECK(loaded->leaf_count() == index->leaf_count());
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const auto a = exact_knn(*index, queries.series(q), 5);
      const auto b = exact_knn(*loaded, queries.series(q), 5);
      CHECK(a.result.neighbors == b.result.neighbors);
      CHECK(a.stats == b.stats);
      const auto c = ng_approx_knn(*index, queries.series(q), 5, 2);
      const auto d = ng_approx_knn(*loaded, queries.series(q), 5, 2);
      CHECK(c.result.neighbors == d.result.neighbors);
    }
  }
}

TEST_CASE("persisted bytes are deterministic apart from the timestamp") {
  const auto ds = testing::normalized_walks(800, 64, 2);
  for (auto kind : kAllKinds) {
    CAPTURE(to_string(kind));
    testing::TempDir a("det-a"), b("det-b");
    persist(*build_index(kind, ds, small_params()), a.path());
    persist(*build_index(kind, ds, small_params()), b.path());
    for (const auto& entry : std::filesystem::directory_iterator(a.path())) {
      const auto name = entry.path().filename();
      auto x = slurp(a.path() / name);
      auto y = slurp(b.path() / name);
      if (name == "meta.json") {
        auto strip = [](std::vector<std::uint8_t> v) {
          std::string s(v.begin(), v.end());
          const auto at = s.find("\"created_at\"");
          return s.substr(0, at) + s.substr(s.find('\n', at));
        };
        CHECK(strip(x) == strip(y));
      } else {
        CHECK(x == y);
      }
    }
  }
}

TEST_CASE("load reports distinct error kinds") {
  testing::TempDir empty("empty");
  try {
    load_index(empty.path());
    FAIL("expected an error");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatErrorKind::kMissingFile);
  }

  const auto ds = testing::normalized_walks(200, 32, 3);
  auto expect_kind = [&](auto mutate, FormatErrorKind kind) {
    testing::TempDir dir("corrupt");
    persist(*build_index(IndexKind::kIsax, ds, small_params()), dir.path());
    mutate(dir.path());
    try {
      load_index(dir.path());
      FAIL("expected an error");
    } catch (const FormatError& e) {
      CHECK(e.kind() == kind);
    }
  };
  expect_kind(
      [](const std::filesystem::path& d) {
        auto bytes = read_file(d / "tree.bin");
        bytes[0] = 'X';
        write_file(d / "tree.bin", bytes);
      },
      FormatErrorKind::kBadMagic);
  expect_kind(
      [](const std::filesystem::path& d) {
        auto bytes = read_file(d / "leaves.bin");
        bytes.resize(bytes.size() / 2);
        write_file(d / "leaves.bin", bytes);
      },
      FormatErrorKind::kTruncated);
  expect_kind(
      [](const std::filesystem::path& d) {
        auto bytes = read_file(d / "tree.bin");
        bytes.push_back(0);
        write_file(d / "tree.bin", bytes);
      },
      FormatErrorKind::kInvalid);
  expect_kind(
      [](const std::filesystem::path& d) {
        auto bytes = read_file(d / "leaves.bin");
        bytes.resize(6);
        write_file(d / "leaves.bin", bytes);
      },
      FormatErrorKind::kTruncated);
  expect_kind(
      [](const std::filesystem::path& d) {
        auto bytes = read_file(d / "leaves.bin");
        bytes[40] ^= 0x5A;
        write_file(d / "leaves.bin", bytes);
      },
      FormatErrorKind::kChecksum);
  expect_kind(
      [](const std::filesystem::path& d) {
        auto bytes = read_file(d / "meta.json");
        std::string s(bytes.begin(), bytes.end());
        s.replace(s.find("\"format_version\": 1"), 19, "\"format_version\": 9");
        write_file(d / "meta.json", std::vector<std::uint8_t>(s.begin(), s.end()));
      },
      FormatErrorKind::kVersion);
}

TEST_CASE("leaf storage writer flushes within its budget") {
  LeafStorageWriter w(4, 40);  // two series per flush
  const std::vector<float> s{1, 2, 3, 4};
  for (SeriesId i = 0; i < 5; ++i) w.append(i, s);
  CHECK(w.flushes() == 2);
  const auto storage = std::move(w).finish();
  CHECK(storage.slots() == 5);
  CHECK(storage.id(4) == 4);
}

TEST_CASE("raw reader counts seeks on non-contiguous reads") {
  const LeafStorage storage(2, std::vector<float>(20, 0.0f), std::vector<SeriesId>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  QueryStats stats;
  RawReader r(storage, stats);
  r.account(0, 3);
  r.account(3, 2);
  r.account(8, 1);
  r.account(2, 1);
  CHECK(stats.random_seeks == 3);
  CHECK(stats.bytes_read == 7 * 2 * sizeof(float));
}
