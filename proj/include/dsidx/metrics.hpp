#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dsidx/core.hpp"
#include "dsidx/index.hpp"

namespace dsidx {

/// |returned ∩ truth| / |truth|
double recall(std::span<const SeriesId> returned, std::span<const SeriesId> truth);

/// sum over ranks r <= k of precision@r * rel(r), divided by k. `returned`
/// must be ordered by ascending distance.
double average_precision(std::span<const SeriesId> returned, std::span<const SeriesId> truth, std::size_t k);

enum class ReDenominator {
  kRankMatched,    // r-th returned vs r-th exact distance (default)
  kFirstNeighbor,  // every rank divided by the exact 1-NN distance
};

/// Mean over ranks of (d_returned - d_exact) / d_exact. Returns nullopt when
/// a denominator is zero; such queries are excluded from MRE. Only the ranks
/// actually returned are averaged.
std::optional<double> relative_error(std::span<const double> returned, std::span<const double> exact,
                                     ReDenominator denominator = ReDenominator::kRankMatched);

struct QueryRecord {
  std::size_t query_id = 0;
  double recall = 0.0;
  double average_precision = 0.0;
  std::optional<double> relative_error;
  QueryStats stats;
  std::uint64_t elapsed_ns = 0;
};

struct WorkloadReport {
  std::size_t queries = 0;
  double avg_recall = 0.0;
  double map = 0.0;
  double mre = 0.0;
  std::size_t re_excluded = 0;
  double throughput_qpm = 0.0;
  double pct_data_accessed = 0.0;
  double mean_seeks = 0.0;
  double mean_leaves_visited = 0.0;
  double mean_raw_compared = 0.0;
};

/// Arithmetic means over the records; % data accessed is bytes read over
/// `dataset_bytes`, times 100.
WorkloadReport aggregate(std::span<const QueryRecord> records, std::uint64_t dataset_bytes);

}  // namespace dsidx
