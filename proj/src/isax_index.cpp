#include "dsidx/isax_index.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>

#include "dsidx/io.hpp"

namespace dsidx {

namespace {

constexpr Magic kTreeMagic = {'D', 'S', 'I', 'S', 'A', 'X', 'T', '1'};

struct BuildNode {
  SaxWord word;
  bool leaf = true;
  bool overflow = false;
  std::int32_t split_segment = -1;
  std::vector<NodeId> children;
  std::vector<SeriesId> members;
};

class Builder {
 public:
  Builder(const Dataset& dataset, const IndexParams& params) : dataset_(dataset), params_(params) {
    const std::vector<std::uint8_t> max_bits(params_.segments, static_cast<std::uint8_t>(kMaxSaxBits));
    words_.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      words_.push_back(sax_from_paa(paa(dataset.series(i), params_.segments), max_bits));
    }
    nodes_.push_back(BuildNode{.leaf = false});
  }

  void insert(SeriesId id) {
    const std::vector<std::uint8_t> base(params_.segments, static_cast<std::uint8_t>(params_.base_bits));
    SaxWord key = promote_down(words_[id], base);
    auto it = root_children_.find(key);
    NodeId node;
    if (it == root_children_.end()) {
      node = add_node(BuildNode{.word = key});
      root_children_.emplace(std::move(key), node);
    } else {
      node = it->second;
    }
    while (!nodes_[node].leaf) {
      node = route(node, id);
    }
    nodes_[node].members.push_back(id);
    if (nodes_[node].members.size() > params_.leaf_capacity && !nodes_[node].overflow) split(node);
  }

  std::vector<BuildNode> finish() && {
    for (const auto& [key, id] : root_children_) nodes_[0].children.push_back(id);
    return std::move(nodes_);
  }

 private:
  NodeId add_node(BuildNode n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  // Bit of the full-cardinality symbol that a promotion to `bits`+1 reveals.
  unsigned next_bit(SeriesId id, std::size_t segment, unsigned bits) const {
    return (words_[id].symbols[segment] >> (kMaxSaxBits - bits - 1)) & 1u;
  }

  NodeId route(NodeId node, SeriesId id) const {
    const auto& n = nodes_[node];
    const auto s = static_cast<std::size_t>(n.split_segment);
    return n.children[next_bit(id, s, n.word.bits[s])];
  }

  void split(NodeId node) {
    const SaxWord word = nodes_[node].word;
    const auto& members = nodes_[node].members;

    std::int32_t best = -1;
    std::size_t best_imbalance = 0;
    for (std::size_t s = 0; s < word.segments(); ++s) {
      if (word.bits[s] >= kMaxSaxBits) continue;
      std::size_t ones = 0;
      for (auto id : members) ones += next_bit(id, s, word.bits[s]);
      const std::size_t zeros = members.size() - ones;
      const std::size_t imbalance = ones > zeros ? ones - zeros : zeros - ones;
      if (best < 0 || imbalance < best_imbalance) {
        best = static_cast<std::int32_t>(s);
        best_imbalance = imbalance;
      }
    }
    if (best < 0) {
      nodes_[node].overflow = true;
      return;
    }

    const auto s = static_cast<std::size_t>(best);
    NodeId kids[2];
    for (unsigned b = 0; b < 2; ++b) {
      SaxWord w = word;
      w.symbols[s] = (w.symbols[s] << 1) | b;
      w.bits[s] = static_cast<std::uint8_t>(w.bits[s] + 1);
      kids[b] = add_node(BuildNode{.word = std::move(w)});
    }
    auto moved = std::move(nodes_[node].members);
    auto& parent = nodes_[node];
    parent.members.clear();
    parent.leaf = false;
    parent.split_segment = best;
    parent.children = {kids[0], kids[1]};
    for (auto id : moved) nodes_[kids[next_bit(id, s, word.bits[s])]].members.push_back(id);
    for (auto kid : kids) {
      if (nodes_[kid].members.size() > params_.leaf_capacity) split(kid);
    }
  }

  const Dataset& dataset_;
  const IndexParams& params_;
  std::vector<SaxWord> words_;
  std::vector<BuildNode> nodes_;
  std::map<SaxWord, NodeId> root_children_;
};

class IsaxBounds final : public QueryBounds {
 public:
  IsaxBounds(const IsaxIndex& index, std::span<const float> query)
      : index_(index), paa_(paa(query, index.params().segments)) {}

  double min_dist(NodeId node) const override {
    return mindist_paa_isax(paa_, index_.nodes()[node].word, index_.length());
  }

 private:
  const IsaxIndex& index_;
  PaaSummary paa_;
};

}  // namespace

IsaxIndex::IsaxIndex(IndexParams params, LeafStorage storage, std::vector<Node> nodes)
    : Index(std::move(params), std::move(storage)), nodes_(std::move(nodes)) {
  for (const auto& n : nodes_) leaf_count_ += n.leaf ? 1 : 0;
}

IsaxIndex IsaxIndex::build(const Dataset& dataset, const IndexParams& requested) {
  check_build_input(dataset, requested);
  const IndexParams params = requested.effective_for(dataset.length());

  Builder builder(dataset, params);
  for (std::size_t i = 0; i < dataset.size(); ++i) builder.insert(static_cast<SeriesId>(i));
  auto built = std::move(builder).finish();

  // Lay leaves out depth-first so each leaf's series are contiguous.
  std::vector<Node> nodes(built.size());
  LeafStorageWriter writer(dataset.length(), params.buffer_bytes);
  std::uint32_t slot = 0;
  std::vector<NodeId> stack{0};
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    auto& b = built[id];
    auto& n = nodes[id];
    n.word = std::move(b.word);
    n.leaf = b.leaf;
    n.overflow = b.overflow;
    n.split_segment = b.split_segment;
    n.children = b.children;
    if (b.leaf) {
      n.span = {slot, static_cast<std::uint32_t>(b.members.size())};
      for (auto sid : b.members) writer.append(sid, dataset.series(sid));
      slot += n.span.count;
    } else {
      for (auto it = b.children.rbegin(); it != b.children.rend(); ++it) stack.push_back(*it);
    }
  }
  return IsaxIndex(params, std::move(writer).finish(), std::move(nodes));
}

std::unique_ptr<QueryBounds> IsaxIndex::bounds_for(std::span<const float> query) const {
  if (query.size() != length()) throw PreconditionError("query length mismatch");
  return std::make_unique<IsaxBounds>(*this, query);
}

std::size_t IsaxIndex::summary_bytes() const {
  std::size_t bytes = 0;
  for (const auto& n : nodes_) {
    bytes += sizeof(Node) + n.word.symbols.size() * sizeof(std::uint32_t) + n.word.bits.size() +
             n.children.size() * sizeof(NodeId);
  }
  return bytes;
}

std::size_t IsaxIndex::overflow_leaves() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.overflow; }));
}

void IsaxIndex::write_structure(const std::filesystem::path& dir) const {
  ByteWriter w(kTreeMagic, true);
  w.u32(static_cast<std::uint32_t>(nodes_.size()));
  w.u32(static_cast<std::uint32_t>(params_.segments));
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    w.u8(static_cast<std::uint8_t>((n.leaf ? 1 : 0) | (n.overflow ? 2 : 0)));
    w.u32(static_cast<std::uint32_t>(n.split_segment));
    if (i != 0) {
      for (auto s : n.word.symbols) w.u8(static_cast<std::uint8_t>(s));
      for (auto b : n.word.bits) w.u8(b);
    }
    w.u32(static_cast<std::uint32_t>(n.children.size()));
    for (auto c : n.children) w.u32(c);
    w.u32(n.span.first_slot);
    w.u32(n.span.count);
  }
  w.u32(static_cast<std::uint32_t>(storage_.slots()));
  for (auto id : storage_.ids()) w.u32(id);
  write_file(dir / "tree.bin", std::move(w).finish());
}

IsaxIndex IsaxIndex::read(const std::filesystem::path& dir, const IndexParams& params, std::size_t length,
                          std::vector<float> data) {
  ByteReader r(read_file(dir / "tree.bin"), kTreeMagic, true, "tree.bin", true);
  const std::uint32_t count = r.u32();
  const std::uint32_t w = r.u32();
  if (w != params.segments) throw FormatError(FormatErrorKind::kInvalid, "tree.bin: segment count mismatch");
  if (count == 0 || count > r.remaining()) throw FormatError(FormatErrorKind::kInvalid, "tree.bin: bad node count");
  std::vector<Node> nodes(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto& n = nodes[i];
    const auto flags = r.u8();
    n.leaf = flags & 1;
    n.overflow = flags & 2;
    n.split_segment = static_cast<std::int32_t>(r.u32());
    if (i != 0) {
      n.word.symbols.resize(w);
      n.word.bits.resize(w);
      for (auto& s : n.word.symbols) s = r.u8();
      for (auto& b : n.word.bits) {
        b = r.u8();
        if (b < 1 || b > kMaxSaxBits) throw FormatError(FormatErrorKind::kInvalid, "tree.bin: bad cardinality");
      }
    }
    n.children.resize(r.u32());
    for (auto& c : n.children) {
      c = r.u32();
      if (c >= count) throw FormatError(FormatErrorKind::kInvalid, "tree.bin: child out of range");
    }
    n.span.first_slot = r.u32();
    n.span.count = r.u32();
  }
  std::vector<SeriesId> ids(r.u32());
  for (auto& id : ids) id = r.u32();
  r.expect_end();
  if (ids.size() * length != data.size()) {
    throw FormatError(FormatErrorKind::kInvalid, "tree.bin: slot count disagrees with leaves.bin");
  }
  for (const auto& n : nodes) {
    if (n.leaf && std::size_t{n.span.first_slot} + n.span.count > ids.size()) {
      throw FormatError(FormatErrorKind::kInvalid, "tree.bin: leaf span out of range");
    }
  }
  return IsaxIndex(params, LeafStorage(length, std::move(data), std::move(ids)), std::move(nodes));
}

}  // namespace dsidx
