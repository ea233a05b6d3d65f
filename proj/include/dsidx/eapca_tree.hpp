#pragma once

#include <filesystem>
#include <vector>

#include "dsidx/index.hpp"
#include "dsidx/summarize.hpp"

namespace dsidx {

enum class SplitStat : std::uint8_t { kMean = 0, kStd = 1 };

/// How an internal node routes a series: compare the chosen statistic of
/// segment `segment` (in the children's segmentation) against `threshold`.
/// A vertical split also refined the segmentation by halving one segment.
struct SplitRule {
  SplitStat stat = SplitStat::kMean;
  std::uint32_t segment = 0;
  double threshold = 0.0;
  bool vertical = false;
};

/// Binary EAPCA tree with per-node segmentation (DSTree-style).
class EapcaTreeIndex final : public Index {
 public:
  struct Node {
    EapcaSynopsis synopsis;
    bool leaf = true;
    bool overflow = false;
    SplitRule rule;
    std::vector<NodeId> children;
    LeafSpan span;
  };

  static EapcaTreeIndex build(const Dataset& dataset, const IndexParams& params);
  static EapcaTreeIndex read(const std::filesystem::path& dir, const IndexParams& params, std::size_t length,
                             std::vector<float> data);

  IndexKind kind() const override { return IndexKind::kEapcaTree; }
  std::size_t node_count() const override { return nodes_.size(); }
  std::size_t leaf_count() const override { return leaf_count_; }
  std::span<const NodeId> roots() const override { return root_; }
  bool is_leaf(NodeId node) const override { return nodes_[node].leaf; }
  std::span<const NodeId> children(NodeId node) const override { return nodes_[node].children; }
  LeafSpan leaf(NodeId node) const override { return nodes_[node].span; }
  std::unique_ptr<QueryBounds> bounds_for(std::span<const float> query) const override;
  std::size_t summary_bytes() const override;
  std::size_t overflow_leaves() const override;
  void write_structure(const std::filesystem::path& dir) const override;

  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  EapcaTreeIndex(IndexParams params, LeafStorage storage, std::vector<Node> nodes);

  std::vector<Node> nodes_;
  std::vector<NodeId> root_{0};
  std::size_t leaf_count_ = 0;
};

}  // namespace dsidx
