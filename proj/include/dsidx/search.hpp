#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "dsidx/core.hpp"
#include "dsidx/index.hpp"

namespace dsidx {

enum class SearchMode { kExact, kNg, kGuaranteed };

std::string_view to_string(SearchMode mode);

struct SearchParams {
  std::size_t k = 1;
  SearchMode mode = SearchMode::kExact;
  std::size_t nprobe = 1;  // kNg only
  double epsilon = 0.0;    // kGuaranteed only
  double delta = 1.0;      // kGuaranteed only

  static SearchParams exact(std::size_t k) { return {k, SearchMode::kExact}; }
  static SearchParams ng(std::size_t k, std::size_t nprobe) { return {k, SearchMode::kNg, nprobe}; }
  static SearchParams guaranteed(std::size_t k, double epsilon, double delta) {
    return {k, SearchMode::kGuaranteed, 1, epsilon, delta};
  }

  void validate() const;
};

/// Empirical distribution F of pairwise distances: an equi-width density
/// histogram over [0, d_max].
class DistanceDistribution {
 public:
  static constexpr std::size_t kBins = 1000;

  DistanceDistribution(std::vector<std::uint64_t> counts, double d_max, std::size_t sample_size);

  double cdf(double r) const;
  /// Smallest r with cdf(r) >= p, interpolated linearly inside its bin.
  double quantile(double p) const;

  const std::vector<std::uint64_t>& counts() const { return counts_; }
  std::uint64_t pairs() const { return total_; }
  double d_max() const { return d_max_; }
  std::size_t sample_size() const { return sample_size_; }

 private:
  std::vector<std::uint64_t> counts_;
  double d_max_;
  std::size_t sample_size_;
  std::uint64_t total_ = 0;
};

/// Draws `pairs` uniform pairs of distinct members of a uniform sample of
/// `sample_size` series and histograms their distances. Deterministic in
/// `seed`.
DistanceDistribution estimate_distance_distribution(const Dataset& dataset, std::size_t sample_size,
                                                    std::size_t pairs, std::uint64_t seed);
DistanceDistribution estimate_distance_distribution(const LeafStorage& storage, std::size_t sample_size,
                                                    std::size_t pairs, std::uint64_t seed);

struct DeltaRadius {
  double r_delta = 0.0;
  double delta = 1.0;
  std::size_t n = 0;
  bool resolution_limited = false;
};

/// r_delta = F^-1(1 - delta^(1/N)): the radius whose ball around the query
/// is empty with probability delta when N points are drawn from F.
DeltaRadius calc_delta_radius(const DistanceDistribution& f, double delta, std::size_t n);

enum class EarlyExit { kNone, kAfterSeed, kInLoop };

std::string_view to_string(EarlyExit exit);

struct GuaranteeRecord {
  double epsilon = 0.0;
  double delta = 1.0;
  DeltaRadius radius;
  EarlyExit exit = EarlyExit::kNone;
};

struct SearchOutcome {
  KnnResult result;
  QueryStats stats;
  GuaranteeRecord guarantee;
  bool k_truncated = false;       // k exceeded the dataset size
  std::vector<double> bsf_trace;  // k-th bsf distance after each change while full
};

/// ng-approximate k-NN. Trees: greedy descent to a first leaf, then
/// best-first until `nprobe` leaves are visited. VA+: file-order scan with
/// lower-bound filtering, stopping after `nprobe` raw refinements.
SearchOutcome ng_approx_knn(const Index& index, std::span<const float> query, std::size_t k, std::size_t nprobe);

/// Exact k-NN by best-first traversal with lower-bound pruning.
SearchOutcome exact_knn(const Index& index, std::span<const float> query, std::size_t k);

/// delta-epsilon-approximate k-NN. Pruning uses (k-th bsf)/(1+epsilon); with
/// delta < 1 the search also stops once the heap is full and its k-th
/// distance is within (1+epsilon) * r_delta. `f` is required when delta < 1.
SearchOutcome delta_epsilon_knn(const Index& index, std::span<const float> query, std::size_t k, double epsilon,
                                double delta, const DistanceDistribution* f);

SearchOutcome search(const Index& index, std::span<const float> query, const SearchParams& params,
                     const DistanceDistribution* f = nullptr);

struct RangeOutcome {
  std::vector<SeriesId> ids;  // ascending
  QueryStats stats;
};

RangeOutcome range_query(const Index& index, std::span<const float> query, double radius);

}  // namespace dsidx
