#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsidx {

using SeriesId = std::uint32_t;

/// Raised when a caller violates an operation's precondition
/// (length mismatch, out-of-range parameter, empty input).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A single data series: an id (its position in the owning dataset) and its
/// values. Datasets store series contiguously; this is the owning form used at
/// API boundaries and in tests.
struct DataSeries {
  SeriesId id = 0;
  std::vector<float> values;
};

/// A collection of equal-length series stored row-major in single precision.
/// Series ids are implicit and dense: the i-th row has id i.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t length, std::vector<float> values, bool normalized = false);

  static Dataset from_rows(const std::vector<std::vector<float>>& rows, bool normalized = false);

  std::size_t size() const { return length_ == 0 ? 0 : values_.size() / length_; }
  std::size_t length() const { return length_; }
  bool empty() const { return size() == 0; }
  bool normalized() const { return normalized_; }

  std::span<const float> series(std::size_t i) const {
    return {values_.data() + i * length_, length_};
  }
  DataSeries at(std::size_t i) const;

  const std::vector<float>& values() const { return values_; }

  void append(std::span<const float> s);

 private:
  std::size_t length_ = 0;
  std::vector<float> values_;
  bool normalized_ = false;
};

struct Neighbor {
  SeriesId id = 0;
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Strict weak order on (distance, id); the tie-break used everywhere.
inline bool closer(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
}

struct KnnResult {
  std::size_t k = 0;
  std::vector<Neighbor> neighbors;  // ascending by (distance, id)

  std::vector<SeriesId> ids() const;
};

double euclidean_distance(std::span<const float> a, std::span<const float> b);

/// Squared distance accumulated in the same order as euclidean_distance, so
/// a non-abandoned result squares back bit-identically. Returns nullopt once
/// the running sum exceeds `threshold` (itself a squared distance).
std::optional<double> squared_distance_early_abandon(std::span<const float> a,
                                                     std::span<const float> b,
                                                     double threshold);

/// Z-normalization with population standard deviation. Constant input
/// (std < 1e-12) maps to all zeros.
std::vector<float> z_normalize(std::span<const float> s);

Dataset z_normalize(const Dataset& dataset);

KnnResult knn_bruteforce(const Dataset& dataset, std::span<const float> query, std::size_t k);

/// Bounded max-heap of the k best neighbors under `closer`.
class NeighborHeap {
 public:
  explicit NeighborHeap(std::size_t k) : k_(k) { heap_.reserve(k); }

  bool full() const { return heap_.size() >= k_; }
  std::size_t size() const { return heap_.size(); }
  std::size_t capacity() const { return k_; }

  /// Current k-th distance, +inf while not full.
  double kth_distance() const;
  const Neighbor& worst() const { return heap_.front(); }

  /// Inserts when the heap is not full or `n` is closer than the worst entry.
  bool offer(const Neighbor& n);

  KnnResult sorted() const;

 private:
  std::size_t k_;
  std::vector<Neighbor> heap_;
};

}  // namespace dsidx
