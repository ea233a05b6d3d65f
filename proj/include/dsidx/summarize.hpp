#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dsidx {

// ---------------------------------------------------------------------------
// PAA

struct PaaSummary {
  std::vector<double> means;
  std::size_t length = 0;  // n of the summarized series

  std::size_t segments() const { return means.size(); }
};

/// Half-open [begin, end) of segment `i` when n points are split into w
/// segments; the first n % w segments receive one extra point.
struct SegmentRange {
  std::size_t begin;
  std::size_t end;
};
SegmentRange paa_segment(std::size_t n, std::size_t w, std::size_t i);

PaaSummary paa(std::span<const float> s, std::size_t w);

// ---------------------------------------------------------------------------
// SAX / iSAX

inline constexpr unsigned kMaxSaxBits = 8;

struct Breakpoints {
  std::size_t cardinality = 0;
  std::vector<double> cuts;  // cardinality - 1 standard-normal quantiles
};

/// Quantiles 1/a .. (a-1)/a of N(0,1); `a` must be a power of two >= 2.
Breakpoints gaussian_breakpoints(std::size_t a);

/// Region bounds [lo, hi) of `symbol` at `bits` bits per symbol.
struct SymbolRegion {
  double lo;
  double hi;
};
SymbolRegion sax_region(std::uint32_t symbol, unsigned bits);

/// Symbol of `value` at `bits`: the number of cuts <= value (left-closed).
std::uint32_t sax_symbol(double value, unsigned bits);

/// An iSAX word: one symbol per segment with its own cardinality exponent.
struct SaxWord {
  std::vector<std::uint32_t> symbols;
  std::vector<std::uint8_t> bits;

  std::size_t segments() const { return symbols.size(); }
  friend bool operator==(const SaxWord&, const SaxWord&) = default;
  friend auto operator<=>(const SaxWord&, const SaxWord&) = default;
};

SaxWord sax_from_paa(const PaaSummary& p, std::span<const std::uint8_t> bits);

/// Drops low-order bits so symbol `i` has `bits[i]` bits (each <= current).
SaxWord promote_down(const SaxWord& w, std::span<const std::uint8_t> bits);

/// Whether `full` (at any cardinality >= prefix's) falls under `prefix`.
bool sax_covers(const SaxWord& prefix, const SaxWord& full);

/// iSAX MINDIST: sqrt(n/w * sum of squared gaps from each query mean to its
/// symbol's region).
double mindist_paa_isax(const PaaSummary& query_paa, const SaxWord& word, std::size_t n);

// ---------------------------------------------------------------------------
// EAPCA

/// Segment end indices (exclusive), strictly increasing, last == n.
using Segmentation = std::vector<std::uint32_t>;

Segmentation uniform_segmentation(std::size_t n, std::size_t segments);
void validate_segmentation(const Segmentation& seg, std::size_t n);

struct SegmentStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

struct EapcaSummary {
  Segmentation segmentation;
  std::vector<SegmentStats> stats;
};

EapcaSummary eapca(std::span<const float> s, const Segmentation& segmentation);

struct SynopsisBox {
  double min_mean, max_mean;
  double min_std, max_std;
};

/// Per-segment bounding box of the EAPCA stats of every series in a node.
struct EapcaSynopsis {
  Segmentation segmentation;
  std::vector<SynopsisBox> boxes;

  static EapcaSynopsis empty(Segmentation segmentation);
  bool is_empty() const { return boxes.empty(); }
  void include(std::span<const SegmentStats> stats);
  bool contains(std::span<const SegmentStats> stats) const;
};

/// Query-side prefix sums; give segment mean/std over any segmentation in
/// O(segments).
class PrefixStats {
 public:
  explicit PrefixStats(std::span<const float> s);
  SegmentStats segment(std::size_t begin, std::size_t end) const;
  std::size_t length() const { return sum_.size() - 1; }

 private:
  std::vector<double> sum_;
  std::vector<double> sum_sq_;
  double shift_ = 0.0;
};

/// sqrt(sum_i len_i * (dmean_i^2 + dstd_i^2)) where d* are the gaps from the
/// query's segment stats to the synopsis box.
double eapca_node_lb(std::span<const SegmentStats> query_stats, const EapcaSynopsis& synopsis);
double eapca_node_lb(std::span<const float> query, const EapcaSynopsis& synopsis);
double eapca_node_lb(const PrefixStats& query, const EapcaSynopsis& synopsis);

// ---------------------------------------------------------------------------
// DFT / VA+

struct DftSummary {
  std::vector<double> coefficients;
};

/// First l coefficients in the orthonormal real Fourier basis ordered DC,
/// cos1, sin1, cos2, sin2, ... (with the Nyquist cosine last for even n).
DftSummary dft(std::span<const float> s, std::size_t l);

struct VaDimension {
  unsigned bits = 1;
  /// 2^bits + 1 boundaries; front is -inf and back is +inf.
  std::vector<double> boundaries;

  std::size_t cells() const { return boundaries.size() - 1; }
};

struct VaGrid {
  std::vector<VaDimension> dims;
};

using VaCell = std::vector<std::uint16_t>;

inline constexpr unsigned kMaxVaBitsPerDim = 16;

VaGrid build_va_grid(std::span<const DftSummary> summaries, unsigned total_bits);

VaCell va_cell(const DftSummary& s, const VaGrid& grid);

double va_cell_lb(const DftSummary& query, std::span<const std::uint16_t> cell, const VaGrid& grid);

}  // namespace dsidx
