#include "dsidx/metrics.hpp"

#include <algorithm>

namespace dsidx {

namespace {

bool contains(std::span<const SeriesId> ids, SeriesId id) { return std::find(ids.begin(), ids.end(), id) != ids.end(); }

}  // namespace

double recall(std::span<const SeriesId> returned, std::span<const SeriesId> truth) {
  if (truth.empty()) throw PreconditionError("recall needs a non-empty truth set");
  std::size_t hits = 0;
  for (auto id : returned) hits += contains(truth, id) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double average_precision(std::span<const SeriesId> returned, std::span<const SeriesId> truth, std::size_t k) {
  if (k == 0) throw PreconditionError("average precision needs k >= 1");
  double sum = 0.0;
  std::size_t hits = 0;
  const std::size_t ranks = std::min(k, returned.size());
  for (std::size_t r = 0; r < ranks; ++r) {
    if (contains(truth, returned[r])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(k);
}

std::optional<double> relative_error(std::span<const double> returned, std::span<const double> exact,
                                     ReDenominator denominator) {
  if (exact.empty()) throw PreconditionError("relative error needs exact distances");
  const std::size_t ranks = std::min(returned.size(), exact.size());
  if (ranks == 0) return std::nullopt;
  double sum = 0.0;
  for (std::size_t r = 0; r < ranks; ++r) {
    const double d = denominator == ReDenominator::kRankMatched ? exact[r] : exact[0];
    if (d == 0.0) return std::nullopt;
    sum += (returned[r] - d) / d;
  }
  return sum / static_cast<double>(ranks);
}

WorkloadReport aggregate(std::span<const QueryRecord> records, std::uint64_t dataset_bytes) {
  if (records.empty()) throw PreconditionError("aggregate needs at least one record");
  WorkloadReport w;
  w.queries = records.size();
  double re_sum = 0.0;
  double bytes = 0.0;
  double elapsed = 0.0;
  std::size_t re_count = 0;
  for (const auto& r : records) {
    w.avg_recall += r.recall;
    w.map += r.average_precision;
    if (r.relative_error) {
      re_sum += *r.relative_error;
      ++re_count;
    } else {
      ++w.re_excluded;
    }
    bytes += static_cast<double>(r.stats.bytes_read);
    w.mean_seeks += static_cast<double>(r.stats.random_seeks);
    w.mean_leaves_visited += static_cast<double>(r.stats.leaves_visited);
    w.mean_raw_compared += static_cast<double>(r.stats.raw_compared);
    elapsed += static_cast<double>(r.elapsed_ns);
  }
  const double n = static_cast<double>(records.size());
  w.avg_recall /= n;
  w.map /= n;
  w.mre = re_count > 0 ? re_sum / static_cast<double>(re_count) : 0.0;
  w.mean_seeks /= n;
  w.mean_leaves_visited /= n;
  w.mean_raw_compared /= n;
  w.pct_data_accessed = dataset_bytes > 0 ? 100.0 * bytes / n / static_cast<double>(dataset_bytes) : 0.0;
  w.throughput_qpm = elapsed > 0.0 ? n / (elapsed / 6e10) : 0.0;
  return w;
}

}  // namespace dsidx
