#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dsidx/core.hpp"

namespace dsidx {

enum class IndexKind { kIsax, kEapcaTree, kVaFile };

std::string_view to_string(IndexKind kind);
IndexKind parse_index_kind(std::string_view name);

struct IndexParams {
  std::size_t leaf_capacity = 100;
  std::size_t segments = 16;  // PAA width for the iSAX tree
  unsigned base_bits = 1;     // root cardinality 2^base_bits
  std::size_t eapca_initial_segments = 4;
  std::size_t dft_coefficients = 16;
  unsigned va_total_bits = 128;
  std::size_t buffer_bytes = std::size_t{64} << 20;
  bool normalized = true;  // state the dataset must be in

  /// Copy with width-like parameters clamped to a series length of `n`.
  IndexParams effective_for(std::size_t n) const;
  void validate() const;
};

/// Implementation-independent per-query counters.
struct QueryStats {
  std::uint64_t raw_compared = 0;
  std::uint64_t leaves_visited = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t random_seeks = 0;
  std::uint64_t lb_computations = 0;

  friend bool operator==(const QueryStats&, const QueryStats&) = default;
};

/// Raw series grouped by leaf; slot i holds series ids()[i].
class LeafStorage {
 public:
  LeafStorage() = default;
  LeafStorage(std::size_t length, std::vector<float> data, std::vector<SeriesId> ids);

  std::size_t slots() const { return ids_.size(); }
  std::size_t length() const { return length_; }
  std::span<const float> series(std::size_t slot) const { return {data_.data() + slot * length_, length_}; }
  SeriesId id(std::size_t slot) const { return ids_[slot]; }
  const std::vector<SeriesId>& ids() const { return ids_; }
  const std::vector<float>& data() const { return data_; }
  std::size_t bytes() const { return data_.size() * sizeof(float); }

 private:
  std::size_t length_ = 0;
  std::vector<float> data_;
  std::vector<SeriesId> ids_;
};

/// Stages appended series in a buffer of at most `budget_bytes` and flushes
/// it to the backing store when full.
class LeafStorageWriter {
 public:
  LeafStorageWriter(std::size_t length, std::size_t budget_bytes);

  void append(SeriesId id, std::span<const float> values);
  LeafStorage finish() &&;
  std::size_t flushes() const { return flushes_; }

 private:
  void flush();

  std::size_t length_;
  std::size_t budget_series_;
  std::vector<float> staged_;
  std::vector<float> flushed_;
  std::vector<SeriesId> ids_;
  std::size_t flushes_ = 0;
};

/// Accounts raw reads against QueryStats: bytes, and a random seek whenever
/// a read does not start where the previous one ended.
class RawReader {
 public:
  RawReader(const LeafStorage& storage, QueryStats& stats) : storage_(storage), stats_(stats) {}

  void account(std::size_t first_slot, std::size_t count);
  const LeafStorage& storage() const { return storage_; }

 private:
  const LeafStorage& storage_;
  QueryStats& stats_;
  std::size_t next_slot_ = static_cast<std::size_t>(-1);
};

using NodeId = std::uint32_t;

struct LeafSpan {
  std::uint32_t first_slot = 0;
  std::uint32_t count = 0;
};

/// Per-query lower-bound oracle: the query's summary is computed once, then
/// min_dist is valid for every series beneath the node.
class QueryBounds {
 public:
  virtual ~QueryBounds() = default;
  virtual double min_dist(NodeId node) const = 0;
};

/// Uniform node interface the search algorithms run against. A VA+ file is
/// presented as a flat set of single-series leaves, one per cell.
class Index {
 public:
  virtual ~Index() = default;

  virtual IndexKind kind() const = 0;
  const IndexParams& params() const { return params_; }
  const LeafStorage& storage() const { return storage_; }
  std::size_t size() const { return storage_.slots(); }
  std::size_t length() const { return storage_.length(); }

  virtual std::size_t node_count() const = 0;
  virtual std::size_t leaf_count() const = 0;
  virtual std::span<const NodeId> roots() const = 0;
  virtual bool is_leaf(NodeId node) const = 0;
  virtual std::span<const NodeId> children(NodeId node) const = 0;
  virtual LeafSpan leaf(NodeId node) const = 0;

  virtual std::unique_ptr<QueryBounds> bounds_for(std::span<const float> query) const = 0;

  /// Approximate bytes held by summaries and structure (excludes raw data).
  virtual std::size_t summary_bytes() const = 0;

  /// Leaves holding more than the capacity because no split could separate
  /// their series.
  virtual std::size_t overflow_leaves() const { return 0; }

  /// Writes the structure files (everything but meta.json and leaves.bin).
  virtual void write_structure(const std::filesystem::path& dir) const = 0;

 protected:
  Index() = default;
  Index(IndexParams params, LeafStorage storage) : params_(std::move(params)), storage_(std::move(storage)) {}

  IndexParams params_;
  LeafStorage storage_;
};

/// Leaf ids under `node`, in slot order.
std::vector<SeriesId> ids_in(const Index& index, NodeId node);

std::unique_ptr<Index> build_index(IndexKind kind, const Dataset& dataset, const IndexParams& params);

void check_build_input(const Dataset& dataset, const IndexParams& params);

}  // namespace dsidx
