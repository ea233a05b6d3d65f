#pragma once

#include <filesystem>
#include <vector>

#include "dsidx/index.hpp"
#include "dsidx/summarize.hpp"

namespace dsidx {

/// iSAX tree. The root fans out on base-cardinality words; every split
/// promotes one segment of a leaf's word by one bit, producing two children.
class IsaxIndex final : public Index {
 public:
  struct Node {
    SaxWord word;  // empty for the root
    bool leaf = true;
    bool overflow = false;
    std::int32_t split_segment = -1;
    std::vector<NodeId> children;
    LeafSpan span;
  };

  static IsaxIndex build(const Dataset& dataset, const IndexParams& params);
  static IsaxIndex read(const std::filesystem::path& dir, const IndexParams& params, std::size_t length,
                        std::vector<float> data);

  IndexKind kind() const override { return IndexKind::kIsax; }
  std::size_t node_count() const override { return nodes_.size(); }
  std::size_t leaf_count() const override { return leaf_count_; }
  std::span<const NodeId> roots() const override { return nodes_.front().children; }
  bool is_leaf(NodeId node) const override { return nodes_[node].leaf; }
  std::span<const NodeId> children(NodeId node) const override { return nodes_[node].children; }
  LeafSpan leaf(NodeId node) const override { return nodes_[node].span; }
  std::unique_ptr<QueryBounds> bounds_for(std::span<const float> query) const override;
  std::size_t summary_bytes() const override;
  std::size_t overflow_leaves() const override;
  void write_structure(const std::filesystem::path& dir) const override;

  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  IsaxIndex(IndexParams params, LeafStorage storage, std::vector<Node> nodes);

  std::vector<Node> nodes_;
  std::size_t leaf_count_ = 0;
};

}  // namespace dsidx
