#include <algorithm>
#include <string>

#include "dsidx/eapca_tree.hpp"
#include "dsidx/index.hpp"
#include "dsidx/isax_index.hpp"
#include "dsidx/summarize.hpp"
#include "dsidx/va_file.hpp"

namespace dsidx {

std::string_view to_string(IndexKind kind) {
  switch (kind) {
    case IndexKind::kIsax: return "isax";
    case IndexKind::kEapcaTree: return "eapca-tree";
    case IndexKind::kVaFile: return "vafile";
  }
  return "unknown";
}

IndexKind parse_index_kind(std::string_view name) {
  if (name == "isax") return IndexKind::kIsax;
  if (name == "eapca-tree") return IndexKind::kEapcaTree;
  if (name == "vafile") return IndexKind::kVaFile;
  throw PreconditionError("unknown index kind: " + std::string(name));
}

IndexParams IndexParams::effective_for(std::size_t n) const {
  IndexParams p = *this;
  p.segments = std::min(p.segments, n);
  p.eapca_initial_segments = std::min(p.eapca_initial_segments, n);
  p.dft_coefficients = std::min(p.dft_coefficients, n);
  p.va_total_bits = std::max<unsigned>(p.va_total_bits, static_cast<unsigned>(p.dft_coefficients));
  return p;
}

void IndexParams::validate() const {
  if (leaf_capacity < 1) throw PreconditionError("leaf capacity must be >= 1");
  if (segments < 1) throw PreconditionError("segment count must be >= 1");
  if (base_bits < 1 || base_bits > kMaxSaxBits) throw PreconditionError("base bits must be in [1, 8]");
  if (eapca_initial_segments < 1) throw PreconditionError("initial EAPCA segments must be >= 1");
  if (dft_coefficients < 1) throw PreconditionError("DFT coefficient count must be >= 1");
  if (va_total_bits > dft_coefficients * kMaxVaBitsPerDim) {
    throw PreconditionError("VA+ total bits exceed 16 per dimension");
  }
}

void check_build_input(const Dataset& dataset, const IndexParams& params) {
  if (dataset.empty()) throw PreconditionError("cannot index an empty dataset");
  if (dataset.normalized() != params.normalized) {
    throw PreconditionError(params.normalized ? "index expects a Z-normalized dataset"
                                              : "index expects a raw (unnormalized) dataset");
  }
  params.validate();
}

LeafStorage::LeafStorage(std::size_t length, std::vector<float> data, std::vector<SeriesId> ids)
    : length_(length), data_(std::move(data)), ids_(std::move(ids)) {
  if (data_.size() != ids_.size() * length_) throw PreconditionError("leaf storage size mismatch");
}

LeafStorageWriter::LeafStorageWriter(std::size_t length, std::size_t budget_bytes)
    : length_(length), budget_series_(std::max<std::size_t>(1, budget_bytes / (length * sizeof(float)))) {}

void LeafStorageWriter::append(SeriesId id, std::span<const float> values) {
  if (values.size() != length_) throw PreconditionError("leaf storage: length mismatch");
  staged_.insert(staged_.end(), values.begin(), values.end());
  ids_.push_back(id);
  if (staged_.size() >= budget_series_ * length_) flush();
}

void LeafStorageWriter::flush() {
  if (staged_.empty()) return;
  flushed_.insert(flushed_.end(), staged_.begin(), staged_.end());
  staged_.clear();
  ++flushes_;
}

LeafStorage LeafStorageWriter::finish() && {
  flush();
  return LeafStorage(length_, std::move(flushed_), std::move(ids_));
}

void RawReader::account(std::size_t first_slot, std::size_t count) {
  if (count == 0) return;
  stats_.bytes_read += count * storage_.length() * sizeof(float);
  if (first_slot != next_slot_) ++stats_.random_seeks;
  next_slot_ = first_slot + count;
}

std::vector<SeriesId> ids_in(const Index& index, NodeId node) {
  std::vector<SeriesId> out;
  std::vector<NodeId> stack{node};
  while (!stack.empty()) {
    const NodeId n = stack.back();
    stack.pop_back();
    if (index.is_leaf(n)) {
      const auto span = index.leaf(n);
      for (std::uint32_t s = 0; s < span.count; ++s) out.push_back(index.storage().id(span.first_slot + s));
    } else {
      const auto ch = index.children(n);
      for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
    }
  }
  return out;
}

std::unique_ptr<Index> build_index(IndexKind kind, const Dataset& dataset, const IndexParams& params) {
  switch (kind) {
    case IndexKind::kIsax: return std::make_unique<IsaxIndex>(IsaxIndex::build(dataset, params));
    case IndexKind::kEapcaTree: return std::make_unique<EapcaTreeIndex>(EapcaTreeIndex::build(dataset, params));
    case IndexKind::kVaFile: return std::make_unique<VaFile>(VaFile::build(dataset, params));
  }
  throw PreconditionError("unknown index kind");
}

}  // namespace dsidx
