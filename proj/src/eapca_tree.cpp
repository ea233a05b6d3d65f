#include "dsidx/eapca_tree.hpp"

#include <algorithm>
#include <limits>
#include <optional>

#include "dsidx/io.hpp"

namespace dsidx {

namespace {

constexpr Magic kTreeMagic = {'D', 'S', 'E', 'A', 'P', 'C', 'T', '1'};

struct BuildNode {
  EapcaSynopsis synopsis;
  bool leaf = true;
  bool overflow = false;
  SplitRule rule;
  std::vector<NodeId> children;
  std::vector<SeriesId> members;
};

double stat_of(const SegmentStats& s, SplitStat stat) { return stat == SplitStat::kMean ? s.mean : s.stddev; }

// Member stats over one segmentation, row-major (member x segment).
struct StatsTable {
  Segmentation segmentation;
  std::vector<SegmentStats> rows;
  std::size_t width() const { return segmentation.size(); }
  std::span<const SegmentStats> row(std::size_t m) const { return {rows.data() + m * width(), width()}; }
};

struct Candidate {
  SplitRule rule;
  const StatsTable* table = nullptr;
  double score = std::numeric_limits<double>::infinity();
};

class Builder {
 public:
  Builder(const Dataset& dataset, const IndexParams& params) : dataset_(dataset), params_(params) {
    nodes_.push_back(BuildNode{
        .synopsis = EapcaSynopsis::empty(uniform_segmentation(dataset.length(), params.eapca_initial_segments))});
  }

  void insert(SeriesId id) {
    const auto series = dataset_.series(id);
    NodeId node = 0;
    for (;;) {
      auto& n = nodes_[node];
      n.synopsis.include(eapca(series, n.synopsis.segmentation).stats);
      if (n.leaf) break;
      node = route(n, series);
    }
    nodes_[node].members.push_back(id);
    if (nodes_[node].members.size() > params_.leaf_capacity && !nodes_[node].overflow) split(node);
  }

  std::vector<BuildNode> finish() && { return std::move(nodes_); }

 private:
  NodeId route(const BuildNode& n, std::span<const float> series) const {
    const auto& seg = nodes_[n.children[0]].synopsis.segmentation;
    const std::size_t begin = n.rule.segment == 0 ? 0 : seg[n.rule.segment - 1];
    const Segmentation one{static_cast<std::uint32_t>(seg[n.rule.segment] - begin)};
    const auto st = eapca(series.subspan(begin, one[0]), one).stats[0];
    return n.children[stat_of(st, n.rule.stat) < n.rule.threshold ? 0 : 1];
  }

  StatsTable table_for(const std::vector<SeriesId>& members, Segmentation seg) const {
    StatsTable t{std::move(seg), {}};
    t.rows.reserve(members.size() * t.width());
    for (auto id : members) {
      auto st = eapca(dataset_.series(id), t.segmentation).stats;
      t.rows.insert(t.rows.end(), st.begin(), st.end());
    }
    return t;
  }

  // count * squared length-weighted diagonal of the group's synopsis box
  static double group_cost(const StatsTable& t, const std::vector<std::size_t>& group) {
    if (group.empty()) return 0.0;
    double diag = 0.0;
    std::uint32_t begin = 0;
    for (std::size_t s = 0; s < t.width(); ++s) {
      double lo_m = std::numeric_limits<double>::infinity(), hi_m = -lo_m, lo_s = lo_m, hi_s = -lo_m;
      for (auto m : group) {
        const auto& st = t.row(m)[s];
        lo_m = std::min(lo_m, st.mean);
        hi_m = std::max(hi_m, st.mean);
        lo_s = std::min(lo_s, st.stddev);
        hi_s = std::max(hi_s, st.stddev);
      }
      const double len = t.segmentation[s] - begin;
      diag += len * ((hi_m - lo_m) * (hi_m - lo_m) + (hi_s - lo_s) * (hi_s - lo_s));
      begin = t.segmentation[s];
    }
    return static_cast<double>(group.size()) * diag;
  }

  void evaluate(const StatsTable& t, std::uint32_t segment, SplitStat stat, bool vertical, Candidate& best) const {
    const std::size_t m = t.rows.size() / t.width();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < m; ++i) {
      const double v = stat_of(t.row(i)[segment], stat);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    // ranges at rounding-noise level count as zero extent
    if (!(hi - lo > 1e-6 * std::max({1.0, std::abs(lo), std::abs(hi)}))) return;
    const double threshold = lo + (hi - lo) / 2.0;
    std::vector<std::size_t> left, right;
    for (std::size_t i = 0; i < m; ++i) {
      (stat_of(t.row(i)[segment], stat) < threshold ? left : right).push_back(i);
    }
    if (left.empty() || right.empty()) return;
    const double score = group_cost(t, left) + group_cost(t, right);
    if (score < best.score) best = {{stat, segment, threshold, vertical}, &t, score};
  }

  void split(NodeId node) {
    const auto members = nodes_[node].members;
    const Segmentation seg = nodes_[node].synopsis.segmentation;

    std::vector<StatsTable> tables;
    tables.reserve(seg.size() + 1);
    tables.push_back(table_for(members, seg));
    std::uint32_t begin = 0;
    for (std::size_t s = 0; s < seg.size(); ++s) {
      if (seg[s] - begin >= 2) {
        Segmentation refined = seg;
        refined.insert(refined.begin() + static_cast<std::ptrdiff_t>(s), begin + (seg[s] - begin) / 2);
        tables.push_back(table_for(members, std::move(refined)));
      }
      begin = seg[s];
    }

    Candidate best;
    for (std::uint32_t s = 0; s < seg.size(); ++s) {
      for (auto stat : {SplitStat::kMean, SplitStat::kStd}) evaluate(tables[0], s, stat, false, best);
    }
    for (std::size_t t = 1; t < tables.size(); ++t) {
      // the halved segment is the one whose end differs from the parent's
      std::uint32_t s = 0;
      while (s < seg.size() && tables[t].segmentation[s] == seg[s]) ++s;
      for (std::uint32_t h : {s, s + 1}) {
        for (auto stat : {SplitStat::kMean, SplitStat::kStd}) evaluate(tables[t], h, stat, true, best);
      }
    }
    if (best.table == nullptr) {
      nodes_[node].overflow = true;
      return;
    }

    const StatsTable& t = *best.table;
    NodeId kids[2];
    for (auto& kid : kids) {
      nodes_.push_back(BuildNode{.synopsis = EapcaSynopsis::empty(t.segmentation)});
      kid = static_cast<NodeId>(nodes_.size() - 1);
    }
    for (std::size_t i = 0; i < members.size(); ++i) {
      const auto row = t.row(i);
      auto& child = nodes_[kids[stat_of(row[best.rule.segment], best.rule.stat) < best.rule.threshold ? 0 : 1]];
      child.synopsis.include(row);
      child.members.push_back(members[i]);
    }
    auto& parent = nodes_[node];
    parent.members.clear();
    parent.leaf = false;
    parent.rule = best.rule;
    parent.children = {kids[0], kids[1]};
    for (auto kid : kids) {
      if (nodes_[kid].members.size() > params_.leaf_capacity) split(kid);
    }
  }

  const Dataset& dataset_;
  const IndexParams& params_;
  std::vector<BuildNode> nodes_;
};

class EapcaBounds final : public QueryBounds {
 public:
  EapcaBounds(const EapcaTreeIndex& index, std::span<const float> query) : index_(index), prefix_(query) {}

  double min_dist(NodeId node) const override { return eapca_node_lb(prefix_, index_.nodes()[node].synopsis); }

 private:
  const EapcaTreeIndex& index_;
  PrefixStats prefix_;
};

}  // namespace

EapcaTreeIndex::EapcaTreeIndex(IndexParams params, LeafStorage storage, std::vector<Node> nodes)
    : Index(std::move(params), std::move(storage)), nodes_(std::move(nodes)) {
  for (const auto& n : nodes_) leaf_count_ += n.leaf ? 1 : 0;
}

EapcaTreeIndex EapcaTreeIndex::build(const Dataset& dataset, const IndexParams& requested) {
  check_build_input(dataset, requested);
  const IndexParams params = requested.effective_for(dataset.length());

  Builder builder(dataset, params);
  for (std::size_t i = 0; i < dataset.size(); ++i) builder.insert(static_cast<SeriesId>(i));
  auto built = std::move(builder).finish();

  std::vector<Node> nodes(built.size());
  LeafStorageWriter writer(dataset.length(), params.buffer_bytes);
  std::uint32_t slot = 0;
  std::vector<NodeId> stack{0};
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    auto& b = built[id];
    auto& n = nodes[id];
    n.synopsis = std::move(b.synopsis);
    n.leaf = b.leaf;
    n.overflow = b.overflow;
    n.rule = b.rule;
    n.children = b.children;
    if (b.leaf) {
      n.span = {slot, static_cast<std::uint32_t>(b.members.size())};
      for (auto sid : b.members) writer.append(sid, dataset.series(sid));
      slot += n.span.count;
    } else {
      for (auto it = b.children.rbegin(); it != b.children.rend(); ++it) stack.push_back(*it);
    }
  }
  return EapcaTreeIndex(params, std::move(writer).finish(), std::move(nodes));
}

std::unique_ptr<QueryBounds> EapcaTreeIndex::bounds_for(std::span<const float> query) const {
  if (query.size() != length()) throw PreconditionError("query length mismatch");
  return std::make_unique<EapcaBounds>(*this, query);
}

std::size_t EapcaTreeIndex::summary_bytes() const {
  std::size_t bytes = 0;
  for (const auto& n : nodes_) {
    bytes += sizeof(Node) + n.synopsis.segmentation.size() * sizeof(std::uint32_t) +
             n.synopsis.boxes.size() * sizeof(SynopsisBox) + n.children.size() * sizeof(NodeId);
  }
  return bytes;
}

std::size_t EapcaTreeIndex::overflow_leaves() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.overflow; }));
}

void EapcaTreeIndex::write_structure(const std::filesystem::path& dir) const {
  ByteWriter w(kTreeMagic, true);
  w.u32(static_cast<std::uint32_t>(nodes_.size()));
  for (const auto& n : nodes_) {
    w.u8(static_cast<std::uint8_t>((n.leaf ? 1 : 0) | (n.overflow ? 2 : 0) | (n.rule.vertical ? 4 : 0)));
    w.u8(static_cast<std::uint8_t>(n.rule.stat));
    w.u32(n.rule.segment);
    w.f64(n.rule.threshold);
    w.u32(static_cast<std::uint32_t>(n.synopsis.segmentation.size()));
    for (auto e : n.synopsis.segmentation) w.u32(e);
    w.u8(n.synopsis.is_empty() ? 0 : 1);
    for (const auto& b : n.synopsis.boxes) {
      w.f64(b.min_mean);
      w.f64(b.max_mean);
      w.f64(b.min_std);
      w.f64(b.max_std);
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

EapcaTreeIndex EapcaTreeIndex::read(const std::filesystem::path& dir, const IndexParams& params, std::size_t length,
                                    std::vector<float> data) {
  ByteReader r(read_file(dir / "tree.bin"), kTreeMagic, true, "tree.bin", true);
  const std::uint32_t count = r.u32();
  if (count == 0 || count > r.remaining()) throw FormatError(FormatErrorKind::kInvalid, "tree.bin: bad node count");
  std::vector<Node> nodes(count);
  for (auto& n : nodes) {
    const auto flags = r.u8();
    n.leaf = flags & 1;
    n.overflow = flags & 2;
    n.rule.vertical = flags & 4;
    n.rule.stat = static_cast<SplitStat>(r.u8());
    n.rule.segment = r.u32();
    n.rule.threshold = r.f64();
    const std::uint32_t segs = r.u32();
    if (segs == 0 || segs > length) throw FormatError(FormatErrorKind::kInvalid, "tree.bin: bad segmentation");
    n.synopsis.segmentation.resize(segs);
    for (auto& e : n.synopsis.segmentation) e = r.u32();
    try {
      validate_segmentation(n.synopsis.segmentation, length);
    } catch (const PreconditionError& e) {
      throw FormatError(FormatErrorKind::kInvalid, std::string("tree.bin: ") + e.what());
    }
    if (r.u8() != 0) {
      n.synopsis.boxes.resize(segs);
      for (auto& b : n.synopsis.boxes) {
        b.min_mean = r.f64();
        b.max_mean = r.f64();
        b.min_std = r.f64();
        b.max_std = r.f64();
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
  return EapcaTreeIndex(params, LeafStorage(length, std::move(data), std::move(ids)), std::move(nodes));
}

}  // namespace dsidx
