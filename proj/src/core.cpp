#include "dsidx/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dsidx {

namespace {

void require_same_length(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw PreconditionError("series length mismatch: " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
  }
}

bool heap_less(const Neighbor& a, const Neighbor& b) { return closer(a, b); }

}  // namespace

Dataset::Dataset(std::size_t length, std::vector<float> values, bool normalized)
    : length_(length), values_(std::move(values)), normalized_(normalized) {
  if (length_ == 0) {
    throw PreconditionError("series length must be at least 1");
  }
  if (values_.size() % length_ != 0) {
    throw PreconditionError("value count is not a multiple of the series length");
  }
  for (float v : values_) {
    if (!std::isfinite(v)) throw PreconditionError("series values must be finite");
  }
}

Dataset Dataset::from_rows(const std::vector<std::vector<float>>& rows, bool normalized) {
  if (rows.empty()) throw PreconditionError("no rows");
  std::vector<float> flat;
  flat.reserve(rows.size() * rows.front().size());
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) throw PreconditionError("rows differ in length");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return Dataset(rows.front().size(), std::move(flat), normalized);
}

DataSeries Dataset::at(std::size_t i) const {
  auto s = series(i);
  return {static_cast<SeriesId>(i), {s.begin(), s.end()}};
}

void Dataset::append(std::span<const float> s) {
  if (length_ == 0) length_ = s.size();
  if (s.size() != length_ || length_ == 0) throw PreconditionError("series length mismatch");
  for (float v : s) {
    if (!std::isfinite(v)) throw PreconditionError("series values must be finite");
  }
  values_.insert(values_.end(), s.begin(), s.end());
}

std::vector<SeriesId> KnnResult::ids() const {
  std::vector<SeriesId> out;
  out.reserve(neighbors.size());
  for (const auto& n : neighbors) out.push_back(n.id);
  return out;
}

double euclidean_distance(std::span<const float> a, std::span<const float> b) {
  require_same_length(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return std::sqrt(sum);
}

std::optional<double> squared_distance_early_abandon(std::span<const float> a,
                                                     std::span<const float> b,
                                                     double threshold) {
  require_same_length(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
    if (sum > threshold) return std::nullopt;
  }
  return sum;
}

std::vector<float> z_normalize(std::span<const float> s) {
  if (s.empty()) throw PreconditionError("cannot normalize an empty series");
  const double n = static_cast<double>(s.size());
  double mean = 0.0;
  for (float v : s) mean += v;
  mean /= n;
  double var = 0.0;
  for (float v : s) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);

  std::vector<float> out(s.size(), 0.0f);
  if (sd < 1e-12) return out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i] = static_cast<float>((s[i] - mean) / sd);
  }
  return out;
}

Dataset z_normalize(const Dataset& dataset) {
  std::vector<float> values;
  values.reserve(dataset.values().size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto z = z_normalize(dataset.series(i));
    values.insert(values.end(), z.begin(), z.end());
  }
  return Dataset(dataset.length(), std::move(values), true);
}

double NeighborHeap::kth_distance() const {
  return full() ? heap_.front().distance : std::numeric_limits<double>::infinity();
}

bool NeighborHeap::offer(const Neighbor& n) {
  if (k_ == 0) return false;
  if (!full()) {
    heap_.push_back(n);
    std::push_heap(heap_.begin(), heap_.end(), heap_less);
    return true;
  }
  if (!closer(n, heap_.front())) return false;
  std::pop_heap(heap_.begin(), heap_.end(), heap_less);
  heap_.back() = n;
  std::push_heap(heap_.begin(), heap_.end(), heap_less);
  return true;
}

KnnResult NeighborHeap::sorted() const {
  KnnResult r;
  r.k = k_;
  r.neighbors = heap_;
  std::sort(r.neighbors.begin(), r.neighbors.end(), closer);
  return r;
}

KnnResult knn_bruteforce(const Dataset& dataset, std::span<const float> query, std::size_t k) {
  if (dataset.empty()) throw PreconditionError("knn on an empty dataset");
  if (k == 0) throw PreconditionError("k must be positive");
  if (query.size() != dataset.length()) throw PreconditionError("query length mismatch");
  NeighborHeap heap(std::min(k, dataset.size()));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    heap.offer({static_cast<SeriesId>(i), euclidean_distance(query, dataset.series(i))});
  }
  auto r = heap.sorted();
  r.k = k;
  return r;
}

}  // namespace dsidx
