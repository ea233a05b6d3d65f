#include "dsidx/va_file.hpp"

#include <numeric>

#include "dsidx/io.hpp"

namespace dsidx {

namespace {

constexpr Magic kGridMagic = {'D', 'S', 'V', 'A', 'G', 'R', 'D', '1'};
constexpr Magic kCellsMagic = {'D', 'S', 'V', 'A', 'C', 'E', 'L', '1'};

class VaBounds final : public QueryBounds {
 public:
  VaBounds(const VaFile& file, std::span<const float> query) : file_(file), q_(file.summarize(query)) {}

  double min_dist(NodeId node) const override { return va_cell_lb(q_, file_.cell(node), file_.grid()); }

 private:
  const VaFile& file_;
  DftSummary q_;
};

}  // namespace

VaFile::VaFile(IndexParams params, LeafStorage storage, VaGrid grid, std::vector<std::uint16_t> cells)
    : Index(std::move(params), std::move(storage)), grid_(std::move(grid)), cells_(std::move(cells)) {
  all_.resize(storage_.slots());
  std::iota(all_.begin(), all_.end(), NodeId{0});
}

VaFile VaFile::build(const Dataset& dataset, const IndexParams& requested) {
  check_build_input(dataset, requested);
  const IndexParams params = requested.effective_for(dataset.length());

  std::vector<DftSummary> summaries;
  summaries.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) summaries.push_back(dft(dataset.series(i), params.dft_coefficients));

  VaGrid grid;
  if (summaries.size() == 1) {
    const std::vector<DftSummary> pair{summaries[0], summaries[0]};
    grid = build_va_grid(pair, params.va_total_bits);
  } else {
    grid = build_va_grid(summaries, params.va_total_bits);
  }

  std::vector<std::uint16_t> cells;
  cells.reserve(dataset.size() * grid.dims.size());
  LeafStorageWriter writer(dataset.length(), params.buffer_bytes);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto c = va_cell(summaries[i], grid);
    cells.insert(cells.end(), c.begin(), c.end());
    writer.append(static_cast<SeriesId>(i), dataset.series(i));
  }
  return VaFile(params, std::move(writer).finish(), std::move(grid), std::move(cells));
}

std::unique_ptr<QueryBounds> VaFile::bounds_for(std::span<const float> query) const {
  if (query.size() != length()) throw PreconditionError("query length mismatch");
  return std::make_unique<VaBounds>(*this, query);
}

std::size_t VaFile::summary_bytes() const {
  std::size_t bytes = cells_.size() * sizeof(std::uint16_t);
  for (const auto& d : grid_.dims) bytes += d.boundaries.size() * sizeof(double);
  return bytes;
}

void VaFile::write_structure(const std::filesystem::path& dir) const {
  ByteWriter g(kGridMagic, true);
  g.u32(static_cast<std::uint32_t>(grid_.dims.size()));
  for (const auto& d : grid_.dims) {
    g.u8(static_cast<std::uint8_t>(d.bits));
    g.u32(static_cast<std::uint32_t>(d.boundaries.size()));
    for (double b : d.boundaries) g.f64(b);
  }
  write_file(dir / "grid.bin", std::move(g).finish());

  ByteWriter c(kCellsMagic, true);
  c.u32(static_cast<std::uint32_t>(size()));
  c.u32(static_cast<std::uint32_t>(dims()));
  for (auto v : cells_) c.u16(v);
  write_file(dir / "cells.bin", std::move(c).finish());
}

VaFile VaFile::read(const std::filesystem::path& dir, const IndexParams& params, std::size_t length,
                    std::vector<float> data) {
  ByteReader g(read_file(dir / "grid.bin"), kGridMagic, true, "grid.bin", true);
  VaGrid grid;
  grid.dims.resize(g.u32());
  if (grid.dims.empty() || grid.dims.size() > length) {
    throw FormatError(FormatErrorKind::kInvalid, "grid.bin: bad dimension count");
  }
  for (auto& d : grid.dims) {
    d.bits = g.u8();
    const std::uint32_t nb = g.u32();
    if (d.bits < 1 || d.bits > kMaxVaBitsPerDim || nb != (1u << d.bits) + 1) {
      throw FormatError(FormatErrorKind::kInvalid, "grid.bin: bad boundary count");
    }
    d.boundaries.resize(nb);
    for (auto& b : d.boundaries) b = g.f64();
  }
  g.expect_end();

  ByteReader c(read_file(dir / "cells.bin"), kCellsMagic, true, "cells.bin", true);
  const std::uint32_t count = c.u32();
  const std::uint32_t dims = c.u32();
  if (dims != grid.dims.size()) throw FormatError(FormatErrorKind::kInvalid, "cells.bin: dimension mismatch");
  if (std::size_t{count} * length != data.size()) {
    throw FormatError(FormatErrorKind::kInvalid, "cells.bin: count disagrees with leaves.bin");
  }
  if (std::size_t{count} * dims * 2 != c.remaining()) {
    throw FormatError(FormatErrorKind::kTruncated, "cells.bin: cell array size mismatch");
  }
  std::vector<std::uint16_t> cells(std::size_t{count} * dims);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i] = c.u16();
    if (cells[i] >= grid.dims[i % dims].cells()) throw FormatError(FormatErrorKind::kInvalid, "cells.bin: cell out of range");
  }
  c.expect_end();

  std::vector<SeriesId> ids(count);
  std::iota(ids.begin(), ids.end(), SeriesId{0});
  return VaFile(params, LeafStorage(length, std::move(data), std::move(ids)), std::move(grid), std::move(cells));
}

}  // namespace dsidx
