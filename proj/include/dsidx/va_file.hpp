#pragma once

#include <filesystem>
#include <vector>

#include "dsidx/index.hpp"
#include "dsidx/summarize.hpp"

namespace dsidx {

/// VA+ file over truncated DFT coefficients. Cells are stored densely in id
/// order and raw series in id order, so node id == series id == slot.
class VaFile final : public Index {
 public:
  static VaFile build(const Dataset& dataset, const IndexParams& params);
  static VaFile read(const std::filesystem::path& dir, const IndexParams& params, std::size_t length,
                     std::vector<float> data);

  IndexKind kind() const override { return IndexKind::kVaFile; }
  std::size_t node_count() const override { return size(); }
  std::size_t leaf_count() const override { return size(); }
  std::span<const NodeId> roots() const override { return all_; }
  bool is_leaf(NodeId) const override { return true; }
  std::span<const NodeId> children(NodeId) const override { return {}; }
  LeafSpan leaf(NodeId node) const override { return {node, 1}; }
  std::unique_ptr<QueryBounds> bounds_for(std::span<const float> query) const override;
  std::size_t summary_bytes() const override;
  void write_structure(const std::filesystem::path& dir) const override;

  const VaGrid& grid() const { return grid_; }
  std::size_t dims() const { return grid_.dims.size(); }
  std::span<const std::uint16_t> cell(std::size_t id) const { return {cells_.data() + id * dims(), dims()}; }

  /// Query summary in the grid's coefficient space.
  DftSummary summarize(std::span<const float> query) const { return dft(query, dims()); }

 private:
  VaFile(IndexParams params, LeafStorage storage, VaGrid grid, std::vector<std::uint16_t> cells);

  VaGrid grid_;
  std::vector<std::uint16_t> cells_;
  std::vector<NodeId> all_;
};

}  // namespace dsidx
