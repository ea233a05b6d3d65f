#include "dsidx/summarize.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "dsidx/core.hpp"
#include "dsidx/normal.hpp"

namespace dsidx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> compute_cuts(std::size_t a) {
  std::vector<double> cuts(a - 1);
  const std::size_t half = a / 2;
  for (std::size_t i = 1; i < a; ++i) {
    if (i < half) {
      cuts[i - 1] = normal_quantile(static_cast<double>(i) / static_cast<double>(a));
    } else if (i == half) {
      cuts[i - 1] = 0.0;
    } else {
      cuts[i - 1] = -cuts[a - i - 1];
    }
  }
  return cuts;
}

// Cut table at the maximum cardinality; every lower cardinality's cuts are a
// subsequence of it, which keeps bit truncation and region lookup coherent.
const std::vector<double>& max_cuts() {
  static const std::vector<double> cuts = compute_cuts(std::size_t{1} << kMaxSaxBits);
  return cuts;
}

double cut_at(unsigned bits, std::size_t j) {
  // j-th cut (0-based) at cardinality 2^bits
  const std::size_t stride = std::size_t{1} << (kMaxSaxBits - bits);
  return max_cuts()[(j + 1) * stride - 1];
}

void check_bits(unsigned bits) {
  if (bits < 1 || bits > kMaxSaxBits) {
    throw PreconditionError("SAX bits must be in [1, " + std::to_string(kMaxSaxBits) + "]");
  }
}

}  // namespace

SegmentRange paa_segment(std::size_t n, std::size_t w, std::size_t i) {
  const std::size_t base = n / w;
  const std::size_t extra = n % w;
  const std::size_t begin = i * base + std::min(i, extra);
  return {begin, begin + base + (i < extra ? 1 : 0)};
}

PaaSummary paa(std::span<const float> s, std::size_t w) {
  if (w < 1 || w > s.size()) {
    throw PreconditionError("PAA width must satisfy 1 <= w <= n");
  }
  PaaSummary out;
  out.length = s.size();
  out.means.resize(w);
  for (std::size_t i = 0; i < w; ++i) {
    const auto r = paa_segment(s.size(), w, i);
    double sum = 0.0;
    for (std::size_t t = r.begin; t < r.end; ++t) sum += s[t];
    out.means[i] = sum / static_cast<double>(r.end - r.begin);
  }
  return out;
}

Breakpoints gaussian_breakpoints(std::size_t a) {
  if (a < 2 || !std::has_single_bit(a)) {
    throw PreconditionError("SAX cardinality must be a power of two >= 2");
  }
  Breakpoints bp;
  bp.cardinality = a;
  if (a <= (std::size_t{1} << kMaxSaxBits)) {
    const unsigned bits = static_cast<unsigned>(std::countr_zero(a));
    bp.cuts.resize(a - 1);
    for (std::size_t j = 0; j + 1 < a; ++j) bp.cuts[j] = cut_at(bits, j);
  } else {
    bp.cuts = compute_cuts(a);
  }
  return bp;
}

SymbolRegion sax_region(std::uint32_t symbol, unsigned bits) {
  check_bits(bits);
  const std::uint32_t top = (1u << bits) - 1;
  if (symbol > top) throw PreconditionError("SAX symbol out of range");
  return {symbol == 0 ? -kInf : cut_at(bits, symbol - 1), symbol == top ? kInf : cut_at(bits, symbol)};
}

std::uint32_t sax_symbol(double value, unsigned bits) {
  check_bits(bits);
  const auto& cuts = max_cuts();
  const auto full = static_cast<std::uint32_t>(std::upper_bound(cuts.begin(), cuts.end(), value) - cuts.begin());
  return full >> (kMaxSaxBits - bits);
}

SaxWord sax_from_paa(const PaaSummary& p, std::span<const std::uint8_t> bits) {
  if (bits.size() != p.segments()) throw PreconditionError("bits/segment count mismatch");
  SaxWord w;
  w.symbols.resize(p.segments());
  w.bits.assign(bits.begin(), bits.end());
  for (std::size_t i = 0; i < p.segments(); ++i) w.symbols[i] = sax_symbol(p.means[i], bits[i]);
  return w;
}

SaxWord promote_down(const SaxWord& w, std::span<const std::uint8_t> bits) {
  if (bits.size() != w.segments()) throw PreconditionError("bits/segment count mismatch");
  SaxWord out;
  out.symbols.resize(w.segments());
  out.bits.assign(bits.begin(), bits.end());
  for (std::size_t i = 0; i < w.segments(); ++i) {
    if (bits[i] > w.bits[i]) throw PreconditionError("cannot raise cardinality by truncation");
    out.symbols[i] = w.symbols[i] >> (w.bits[i] - bits[i]);
  }
  return out;
}

bool sax_covers(const SaxWord& prefix, const SaxWord& full) {
  if (prefix.segments() != full.segments()) return false;
  for (std::size_t i = 0; i < prefix.segments(); ++i) {
    if (full.bits[i] < prefix.bits[i]) return false;
    if ((full.symbols[i] >> (full.bits[i] - prefix.bits[i])) != prefix.symbols[i]) return false;
  }
  return true;
}

double mindist_paa_isax(const PaaSummary& query_paa, const SaxWord& word, std::size_t n) {
  if (query_paa.segments() != word.segments()) {
    throw PreconditionError("mindist: segment count mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < word.segments(); ++i) {
    const auto r = sax_region(word.symbols[i], word.bits[i]);
    const double q = query_paa.means[i];
    double gap = 0.0;
    if (q < r.lo) {
      gap = r.lo - q;
    } else if (q > r.hi) {
      gap = q - r.hi;
    }
    sum += gap * gap;
  }
  return std::sqrt(static_cast<double>(n) / static_cast<double>(word.segments()) * sum);
}

// ---------------------------------------------------------------------------

Segmentation uniform_segmentation(std::size_t n, std::size_t segments) {
  if (segments < 1 || segments > n) throw PreconditionError("invalid segment count");
  Segmentation seg(segments);
  for (std::size_t i = 0; i < segments; ++i) {
    seg[i] = static_cast<std::uint32_t>(paa_segment(n, segments, i).end);
  }
  return seg;
}

void validate_segmentation(const Segmentation& seg, std::size_t n) {
  if (seg.empty() || seg.back() != n) throw PreconditionError("segmentation must end at n");
  std::uint32_t prev = 0;
  for (auto e : seg) {
    if (e <= prev) throw PreconditionError("empty segment in segmentation");
    prev = e;
  }
}

namespace {

SegmentStats stats_of(std::span<const float> s, std::size_t begin, std::size_t end) {
  const double len = static_cast<double>(end - begin);
  double mean = 0.0;
  for (std::size_t t = begin; t < end; ++t) mean += s[t];
  mean /= len;
  double var = 0.0;
  for (std::size_t t = begin; t < end; ++t) var += (s[t] - mean) * (s[t] - mean);
  return {mean, std::sqrt(var / len)};
}

double gap_to(double v, double lo, double hi) {
  if (v < lo) return lo - v;
  if (v > hi) return v - hi;
  return 0.0;
}

}  // namespace

EapcaSummary eapca(std::span<const float> s, const Segmentation& segmentation) {
  validate_segmentation(segmentation, s.size());
  EapcaSummary out;
  out.segmentation = segmentation;
  out.stats.reserve(segmentation.size());
  std::size_t begin = 0;
  for (auto end : segmentation) {
    out.stats.push_back(stats_of(s, begin, end));
    begin = end;
  }
  return out;
}

EapcaSynopsis EapcaSynopsis::empty(Segmentation segmentation) {
  EapcaSynopsis syn;
  syn.segmentation = std::move(segmentation);
  return syn;
}

void EapcaSynopsis::include(std::span<const SegmentStats> stats) {
  if (stats.size() != segmentation.size()) throw PreconditionError("synopsis segmentation mismatch");
  if (boxes.empty()) {
    boxes.reserve(stats.size());
    for (const auto& st : stats) boxes.push_back({st.mean, st.mean, st.stddev, st.stddev});
    return;
  }
  for (std::size_t i = 0; i < stats.size(); ++i) {
    auto& b = boxes[i];
    b.min_mean = std::min(b.min_mean, stats[i].mean);
    b.max_mean = std::max(b.max_mean, stats[i].mean);
    b.min_std = std::min(b.min_std, stats[i].stddev);
    b.max_std = std::max(b.max_std, stats[i].stddev);
  }
}

bool EapcaSynopsis::contains(std::span<const SegmentStats> stats) const {
  if (stats.size() != boxes.size()) return false;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const auto& b = boxes[i];
    if (stats[i].mean < b.min_mean || stats[i].mean > b.max_mean) return false;
    if (stats[i].stddev < b.min_std || stats[i].stddev > b.max_std) return false;
  }
  return true;
}

PrefixStats::PrefixStats(std::span<const float> s) : sum_(s.size() + 1, 0.0), sum_sq_(s.size() + 1, 0.0) {
  // Sums are taken about the series mean to limit cancellation in var.
  double shift = 0.0;
  for (float v : s) shift += v;
  shift = s.empty() ? 0.0 : shift / static_cast<double>(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double v = s[i] - shift;
    sum_[i + 1] = sum_[i] + v;
    sum_sq_[i + 1] = sum_sq_[i] + v * v;
  }
  shift_ = shift;
}

SegmentStats PrefixStats::segment(std::size_t begin, std::size_t end) const {
  const double len = static_cast<double>(end - begin);
  const double m = (sum_[end] - sum_[begin]) / len;
  const double var = std::max(0.0, (sum_sq_[end] - sum_sq_[begin]) / len - m * m);
  return {m + shift_, std::sqrt(var)};
}

double eapca_node_lb(std::span<const SegmentStats> query_stats, const EapcaSynopsis& synopsis) {
  if (query_stats.size() != synopsis.segmentation.size()) {
    throw PreconditionError("eapca_node_lb: segmentation mismatch");
  }
  if (synopsis.is_empty()) return 0.0;
  double sum = 0.0;
  std::uint32_t begin = 0;
  for (std::size_t i = 0; i < query_stats.size(); ++i) {
    const auto& b = synopsis.boxes[i];
    const double dm = gap_to(query_stats[i].mean, b.min_mean, b.max_mean);
    const double ds = gap_to(query_stats[i].stddev, b.min_std, b.max_std);
    sum += static_cast<double>(synopsis.segmentation[i] - begin) * (dm * dm + ds * ds);
    begin = synopsis.segmentation[i];
  }
  return std::sqrt(sum);
}

double eapca_node_lb(std::span<const float> query, const EapcaSynopsis& synopsis) {
  return eapca_node_lb(eapca(query, synopsis.segmentation).stats, synopsis);
}

double eapca_node_lb(const PrefixStats& query, const EapcaSynopsis& synopsis) {
  if (synopsis.segmentation.empty() || synopsis.segmentation.back() != query.length()) {
    throw PreconditionError("eapca_node_lb: segmentation mismatch");
  }
  std::vector<SegmentStats> st;
  st.reserve(synopsis.segmentation.size());
  std::size_t begin = 0;
  for (auto end : synopsis.segmentation) {
    st.push_back(query.segment(begin, end));
    begin = end;
  }
  return eapca_node_lb(st, synopsis);
}

// ---------------------------------------------------------------------------

DftSummary dft(std::span<const float> s, std::size_t l) {
  const std::size_t n = s.size();
  if (l < 1 || l > n) throw PreconditionError("DFT coefficient count must satisfy 1 <= l <= n");
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  const double pair_scale = std::sqrt(2.0 / static_cast<double>(n));
  DftSummary out;
  out.coefficients.resize(l);
  for (std::size_t j = 0; j < l; ++j) {
    const std::size_t f = (j + 1) / 2;
    const bool is_cos = j == 0 || (j % 2 == 1);
    const bool nyquist = is_cos && j > 0 && 2 * f == n;
    double acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>((f * t) % n) / static_cast<double>(n);
      acc += s[t] * (is_cos ? std::cos(angle) : std::sin(angle));
    }
    const double scale = (j == 0 || nyquist) ? inv_sqrt_n : pair_scale;
    out.coefficients[j] = acc * scale;
  }
  return out;
}

VaGrid build_va_grid(std::span<const DftSummary> summaries, unsigned total_bits) {
  if (summaries.size() < 2) throw PreconditionError("VA+ grid needs at least two summaries");
  const std::size_t dims = summaries.front().coefficients.size();
  if (dims == 0) throw PreconditionError("VA+ grid needs at least one dimension");
  if (total_bits < dims) throw PreconditionError("VA+ total bits below dimension count");
  for (const auto& s : summaries) {
    if (s.coefficients.size() != dims) throw PreconditionError("VA+ summaries differ in dimension");
  }
  const std::size_t m = summaries.size();

  std::vector<double> var(dims, 0.0);
  for (std::size_t d = 0; d < dims; ++d) {
    double mean = 0.0;
    for (const auto& s : summaries) mean += s.coefficients[d];
    mean /= static_cast<double>(m);
    for (const auto& s : summaries) var[d] += (s.coefficients[d] - mean) * (s.coefficients[d] - mean);
    var[d] /= static_cast<double>(m);
  }

  // Greedy allocation: each extra bit goes to the dimension with the largest
  // residual variance var/4^bits, which yields bits ~ log(var) + const.
  std::vector<unsigned> bits(dims, 1);
  unsigned remaining = total_bits - static_cast<unsigned>(dims);
  while (remaining > 0) {
    std::size_t best = dims;
    double best_score = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
      if (bits[d] >= kMaxVaBitsPerDim || var[d] <= 0.0) continue;
      const double score = std::ldexp(var[d], -2 * static_cast<int>(bits[d]));
      if (score > best_score) {
        best_score = score;
        best = d;
      }
    }
    if (best == dims) break;
    ++bits[best];
    --remaining;
  }

  VaGrid grid;
  grid.dims.resize(dims);
  std::vector<double> sample(m);
  for (std::size_t d = 0; d < dims; ++d) {
    auto& dim = grid.dims[d];
    dim.bits = bits[d];
    for (std::size_t i = 0; i < m; ++i) sample[i] = summaries[i].coefficients[d];
    std::sort(sample.begin(), sample.end());
    const std::size_t cells = std::size_t{1} << bits[d];
    dim.boundaries.reserve(cells + 1);
    dim.boundaries.push_back(-kInf);
    if (var[d] <= 0.0) {
      const double c = sample.front();
      dim.boundaries.push_back(c + std::max(1e-9, std::abs(c) * 1e-9));
    } else {
      for (std::size_t i = 1; i < cells; ++i) {
        const std::size_t k = std::clamp<std::size_t>(i * m / cells, 1, m - 1);
        double cut = 0.5 * (sample[k - 1] + sample[k]);
        const double prev = dim.boundaries.back();
        if (i > 1 && cut <= prev) cut = std::nextafter(prev, kInf);
        dim.boundaries.push_back(cut);
      }
    }
    dim.boundaries.push_back(kInf);
  }
  return grid;
}

VaCell va_cell(const DftSummary& s, const VaGrid& grid) {
  if (s.coefficients.size() != grid.dims.size()) throw PreconditionError("VA+ dimension mismatch");
  VaCell cell(grid.dims.size());
  for (std::size_t d = 0; d < grid.dims.size(); ++d) {
    const auto& b = grid.dims[d].boundaries;
    const auto it = std::upper_bound(b.begin() + 1, b.end() - 1, s.coefficients[d]);
    cell[d] = static_cast<std::uint16_t>(it - (b.begin() + 1));
  }
  return cell;
}

double va_cell_lb(const DftSummary& query, std::span<const std::uint16_t> cell, const VaGrid& grid) {
  if (query.coefficients.size() != grid.dims.size() || cell.size() != grid.dims.size()) {
    throw PreconditionError("VA+ dimension mismatch");
  }
  double sum = 0.0;
  for (std::size_t d = 0; d < grid.dims.size(); ++d) {
    const auto& b = grid.dims[d].boundaries;
    const double gap = gap_to(query.coefficients[d], b[cell[d]], b[cell[d] + 1]);
    sum += gap * gap;
  }
  return std::sqrt(sum);
}

}  // namespace dsidx
