#include "dsidx/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <queue>

#include "dsidx/random.hpp"
#include "dsidx/va_file.hpp"

namespace dsidx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Early-abandon threshold slightly above kth^2 so a candidate that ties the
// k-th distance is still refined and can win on id.
constexpr double kAbandonSlack = 1.0 + 1e-12;

struct QueueEntry {
  double bound;
  NodeId node;
  bool sentinel;
};

// Min-heap order on (bound, sentinel-last, node id).
struct QueueAfter {
  bool operator()(const QueueEntry& a, const QueueEntry& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    if (a.sentinel != b.sentinel) return a.sentinel;
    return a.node > b.node;
  }
};

using NodeQueue = std::priority_queue<QueueEntry, std::vector<QueueEntry>, QueueAfter>;

std::size_t effective_k(const Index& index, std::size_t k) {
  if (k == 0) throw PreconditionError("k must be positive");
  if (index.size() == 0) throw PreconditionError("search on an empty index");
  return std::min(k, index.size());
}

class Searcher {
 public:
  Searcher(const Index& index, std::span<const float> query, std::size_t k)
      : index_(index),
        query_(query),
        reader_(index.storage(), out_.stats),
        heap_(effective_k(index, k)),
        bounds_(index.bounds_for(query)) {
    out_.result.k = k;
    out_.k_truncated = k > index.size();
  }

  double bound(NodeId node) {
    ++out_.stats.lb_computations;
    return bounds_->min_dist(node);
  }

  /// Refines every series of a leaf; returns whether the bsf changed.
  bool visit_leaf(NodeId node) {
    ++out_.stats.leaves_visited;
    const LeafSpan span = index_.leaf(node);
    reader_.account(span.first_slot, span.count);
    bool improved = false;
    for (std::uint32_t i = 0; i < span.count; ++i) improved |= refine(span.first_slot + i);
    return improved;
  }

  bool refine(std::size_t slot) {
    ++out_.stats.raw_compared;
    const auto& storage = index_.storage();
    const double kth = heap_.kth_distance();
    const double limit = heap_.full() ? kth * kth * kAbandonSlack : kInf;
    const auto d2 = squared_distance_early_abandon(query_, storage.series(slot), limit);
    if (!d2) return false;
    if (!heap_.offer({storage.id(slot), std::sqrt(*d2)})) return false;
    if (heap_.full()) out_.bsf_trace.push_back(heap_.kth_distance());
    return true;
  }

  const NeighborHeap& heap() const { return heap_; }
  RawReader& reader() { return reader_; }
  SearchOutcome& outcome() { return out_; }

  SearchOutcome finish() && {
    out_.result = [&] {
      auto r = heap_.sorted();
      r.k = out_.result.k;
      return r;
    }();
    return std::move(out_);
  }

 private:
  const Index& index_;
  std::span<const float> query_;
  SearchOutcome out_;
  RawReader reader_;
  NeighborHeap heap_;
  std::unique_ptr<QueryBounds> bounds_;
};

// Follows the smallest-bound child from the best root down to one leaf.
// Siblings seen on the way go to `frontier` when it is given.
NodeId descend(Searcher& s, const Index& index, const std::vector<QueueEntry>& root_entries, NodeQueue* frontier) {
  QueueEntry best = root_entries.front();
  for (const auto& e : root_entries) {
    if (QueueAfter{}(best, e)) best = e;
  }
  if (frontier) {
    for (const auto& e : root_entries) {
      if (e.node != best.node) frontier->push(e);
    }
  }
  NodeId node = best.node;
  while (!index.is_leaf(node)) {
    QueueEntry pick{kInf, 0, false};
    bool first = true;
    std::vector<QueueEntry> seen;
    for (NodeId c : index.children(node)) {
      const QueueEntry e{s.bound(c), c, false};
      seen.push_back(e);
      if (first || QueueAfter{}(pick, e)) {
        pick = e;
        first = false;
      }
    }
    if (frontier) {
      for (const auto& e : seen) {
        if (e.node != pick.node) frontier->push(e);
      }
    }
    node = pick.node;
  }
  return node;
}

std::vector<QueueEntry> bound_roots(Searcher& s, const Index& index) {
  std::vector<QueueEntry> entries;
  entries.reserve(index.roots().size());
  for (NodeId r : index.roots()) entries.push_back({s.bound(r), r, false});
  return entries;
}

SearchOutcome ng_vafile(const VaFile& file, std::span<const float> query, std::size_t k, std::size_t nprobe) {
  Searcher s(file, query, k);
  std::size_t refined = 0;
  for (NodeId id = 0; id < file.size() && refined < nprobe; ++id) {
    if (s.bound(id) <= s.heap().kth_distance()) {
      s.visit_leaf(id);
      ++refined;
    }
  }
  return std::move(s).finish();
}

}  // namespace

std::string_view to_string(SearchMode mode) {
  switch (mode) {
    case SearchMode::kExact: return "exact";
    case SearchMode::kNg: return "ng";
    case SearchMode::kGuaranteed: return "guaranteed";
  }
  return "unknown";
}

std::string_view to_string(EarlyExit exit) {
  switch (exit) {
    case EarlyExit::kNone: return "none";
    case EarlyExit::kAfterSeed: return "after-seed";
    case EarlyExit::kInLoop: return "in-loop";
  }
  return "unknown";
}

void SearchParams::validate() const {
  if (k < 1) throw PreconditionError("k must be positive");
  if (mode == SearchMode::kNg && nprobe < 1) throw PreconditionError("nprobe must be >= 1");
  if (mode == SearchMode::kGuaranteed) {
    if (!(epsilon >= 0.0)) throw PreconditionError("epsilon must be >= 0");
    if (!(delta > 0.0 && delta <= 1.0)) throw PreconditionError("delta must lie in (0, 1]");
  }
}

// ---------------------------------------------------------------------------

DistanceDistribution::DistanceDistribution(std::vector<std::uint64_t> counts, double d_max, std::size_t sample_size)
    : counts_(std::move(counts)), d_max_(d_max), sample_size_(sample_size) {
  if (counts_.empty()) throw PreconditionError("distance histogram needs at least one bin");
  if (!(d_max_ >= 0.0)) throw PreconditionError("d_max must be non-negative");
  total_ = std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
  if (total_ == 0) throw PreconditionError("distance histogram is empty");
}

double DistanceDistribution::cdf(double r) const {
  if (r < 0.0) return 0.0;
  if (r >= d_max_) return 1.0;
  const double width = d_max_ / static_cast<double>(counts_.size());
  const double pos = r / width;
  const auto bin = std::min(static_cast<std::size_t>(pos), counts_.size() - 1);
  std::uint64_t below = 0;
  for (std::size_t b = 0; b < bin; ++b) below += counts_[b];
  const double frac = pos - static_cast<double>(bin);
  return (static_cast<double>(below) + frac * static_cast<double>(counts_[bin])) / static_cast<double>(total_);
}

double DistanceDistribution::quantile(double p) const {
  if (p <= 0.0 || d_max_ == 0.0) return 0.0;
  if (p >= 1.0) return d_max_;
  const double width = d_max_ / static_cast<double>(counts_.size());
  const double target = p * static_cast<double>(total_);
  double cum = 0.0;
  for (std::size_t b = 0; b < counts_.size(); ++b) {
    const double c = static_cast<double>(counts_[b]);
    if (c > 0.0 && cum + c >= target) {
      return (static_cast<double>(b) + (target - cum) / c) * width;
    }
    cum += c;
  }
  return d_max_;
}

namespace {

template <typename SeriesAt>
DistanceDistribution estimate(std::size_t count, SeriesAt series_at, std::size_t sample_size, std::size_t pairs,
                              std::uint64_t seed) {
  if (count < 2) throw PreconditionError("distance distribution needs at least two series");
  if (sample_size < 2 || sample_size > count) throw PreconditionError("sample size must lie in [2, dataset size]");
  if (pairs < 1) throw PreconditionError("pair count must be positive");

  const CounterRng sampler(seed, 1);
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < sample_size; ++i) {
    std::swap(order[i], order[i + sampler.below(i, count - i)]);
  }

  const CounterRng picker(seed, 2);
  std::vector<double> dist(pairs);
  double d_max = 0.0;
  for (std::size_t p = 0; p < pairs; ++p) {
    const auto a = picker.below(2 * p, sample_size);
    auto b = picker.below(2 * p + 1, sample_size - 1);
    if (b >= a) ++b;
    dist[p] = euclidean_distance(series_at(order[a]), series_at(order[b]));
    d_max = std::max(d_max, dist[p]);
  }

  std::vector<std::uint64_t> counts(DistanceDistribution::kBins, 0);
  for (double d : dist) {
    const auto bin = d_max == 0.0 ? 0
                                  : std::min(counts.size() - 1,
                                             static_cast<std::size_t>(d / d_max * static_cast<double>(counts.size())));
    ++counts[bin];
  }
  return DistanceDistribution(std::move(counts), d_max, sample_size);
}

}  // namespace

DistanceDistribution estimate_distance_distribution(const Dataset& dataset, std::size_t sample_size,
                                                    std::size_t pairs, std::uint64_t seed) {
  return estimate(dataset.size(), [&](std::size_t i) { return dataset.series(i); }, sample_size, pairs, seed);
}

DistanceDistribution estimate_distance_distribution(const LeafStorage& storage, std::size_t sample_size,
                                                    std::size_t pairs, std::uint64_t seed) {
  return estimate(storage.slots(), [&](std::size_t i) { return storage.series(i); }, sample_size, pairs, seed);
}

DeltaRadius calc_delta_radius(const DistanceDistribution& f, double delta, std::size_t n) {
  if (!(delta > 0.0 && delta <= 1.0)) throw PreconditionError("delta must lie in (0, 1]");
  if (n < 1) throw PreconditionError("dataset size must be >= 1");
  DeltaRadius out{0.0, delta, n, false};
  if (delta == 1.0) return out;
  // 1 - delta^(1/N), computed without cancellation
  const double p = -std::expm1(std::log(delta) / static_cast<double>(n));
  if (p * static_cast<double>(f.pairs()) < 1.0) {
    out.resolution_limited = true;
    return out;
  }
  out.r_delta = f.quantile(p);
  return out;
}

// ---------------------------------------------------------------------------

SearchOutcome ng_approx_knn(const Index& index, std::span<const float> query, std::size_t k, std::size_t nprobe) {
  if (nprobe < 1) throw PreconditionError("nprobe must be >= 1");
  if (index.kind() == IndexKind::kVaFile) {
    return ng_vafile(static_cast<const VaFile&>(index), query, k, nprobe);
  }
  Searcher s(index, query, k);
  NodeQueue frontier;
  const auto roots = bound_roots(s, index);
  s.visit_leaf(descend(s, index, roots, &frontier));
  std::size_t visited = 1;
  while (visited < nprobe && !frontier.empty()) {
    const auto e = frontier.top();
    frontier.pop();
    if (index.is_leaf(e.node)) {
      s.visit_leaf(e.node);
      ++visited;
    } else {
      for (NodeId c : index.children(e.node)) frontier.push({s.bound(c), c, false});
    }
  }
  s.outcome().guarantee.exit = EarlyExit::kNone;
  return std::move(s).finish();
}

SearchOutcome delta_epsilon_knn(const Index& index, std::span<const float> query, std::size_t k, double epsilon,
                                double delta, const DistanceDistribution* f) {
  if (!(epsilon >= 0.0)) throw PreconditionError("epsilon must be >= 0");
  if (!(delta > 0.0 && delta <= 1.0)) throw PreconditionError("delta must lie in (0, 1]");
  if (delta < 1.0 && f == nullptr) throw PreconditionError("delta < 1 requires a distance distribution");

  Searcher s(index, query, k);
  auto& g = s.outcome().guarantee;
  g.epsilon = epsilon;
  g.delta = delta;
  if (delta < 1.0) g.radius = calc_delta_radius(*f, delta, index.size());
  const bool radius_exit = delta < 1.0;
  const double exit_radius = (1.0 + epsilon) * g.radius.r_delta;
  const auto should_exit = [&] { return radius_exit && s.heap().full() && s.heap().kth_distance() <= exit_radius; };
  const auto threshold = [&] { return s.heap().kth_distance() / (1.0 + epsilon); };

  NodeQueue queue;
  const auto roots = bound_roots(s, index);
  for (const auto& e : roots) queue.push(e);

  // ng-approximate seed: one leaf.
  const NodeId seed_leaf = descend(s, index, roots, nullptr);
  s.visit_leaf(seed_leaf);
  if (should_exit()) {
    g.exit = EarlyExit::kAfterSeed;
    return std::move(s).finish();
  }
  queue.push({s.heap().kth_distance(), 0, true});

  while (!queue.empty()) {
    const auto e = queue.top();
    queue.pop();
    if (e.bound > threshold()) break;
    if (e.sentinel) continue;
    if (index.is_leaf(e.node)) {
      if (e.node == seed_leaf) continue;
      if (s.visit_leaf(e.node) && should_exit()) {
        g.exit = EarlyExit::kInLoop;
        break;
      }
    } else {
      for (NodeId c : index.children(e.node)) {
        const double b = s.bound(c);
        if (b <= threshold()) queue.push({b, c, false});
      }
    }
  }
  return std::move(s).finish();
}

SearchOutcome exact_knn(const Index& index, std::span<const float> query, std::size_t k) {
  return delta_epsilon_knn(index, query, k, 0.0, 1.0, nullptr);
}

SearchOutcome search(const Index& index, std::span<const float> query, const SearchParams& params,
                     const DistanceDistribution* f) {
  params.validate();
  switch (params.mode) {
    case SearchMode::kExact: return exact_knn(index, query, params.k);
    case SearchMode::kNg: return ng_approx_knn(index, query, params.k, params.nprobe);
    case SearchMode::kGuaranteed: return delta_epsilon_knn(index, query, params.k, params.epsilon, params.delta, f);
  }
  throw PreconditionError("unknown search mode");
}

RangeOutcome range_query(const Index& index, std::span<const float> query, double radius) {
  if (!(radius >= 0.0)) throw PreconditionError("range radius must be >= 0");
  if (query.size() != index.length()) throw PreconditionError("query length mismatch");
  RangeOutcome out;
  RawReader reader(index.storage(), out.stats);
  const auto bounds = index.bounds_for(query);
  const auto& storage = index.storage();
  const double limit = std::isinf(radius) ? kInf : radius * radius * kAbandonSlack;

  std::vector<NodeId> stack;
  for (auto it = index.roots().rbegin(); it != index.roots().rend(); ++it) {
    ++out.stats.lb_computations;
    if (bounds->min_dist(*it) <= radius) stack.push_back(*it);
  }
  while (!stack.empty()) {
    const NodeId node = stack.back();
    stack.pop_back();
    if (index.is_leaf(node)) {
      ++out.stats.leaves_visited;
      const auto span = index.leaf(node);
      reader.account(span.first_slot, span.count);
      for (std::uint32_t i = 0; i < span.count; ++i) {
        ++out.stats.raw_compared;
        const auto d2 = squared_distance_early_abandon(query, storage.series(span.first_slot + i), limit);
        if (d2 && std::sqrt(*d2) <= radius) out.ids.push_back(storage.id(span.first_slot + i));
      }
    } else {
      const auto ch = index.children(node);
      for (auto it = ch.rbegin(); it != ch.rend(); ++it) {
        ++out.stats.lb_computations;
        if (bounds->min_dist(*it) <= radius) stack.push_back(*it);
      }
    }
  }
  std::sort(out.ids.begin(), out.ids.end());
  return out;
}

}  // namespace dsidx
