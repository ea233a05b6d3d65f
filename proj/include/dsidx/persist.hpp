#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "dsidx/index.hpp"

namespace dsidx {

inline constexpr int kIndexFormatVersion = 1;

/// Writes meta.json, leaves.bin and the kind-specific structure files into
/// `dir` (created if needed). Output is deterministic except for the
/// `created_at` field of meta.json.
void persist(const Index& index, const std::filesystem::path& dir);

/// Loads an index written by persist(). Throws FormatError.
std::unique_ptr<Index> load_index(const std::filesystem::path& dir);

/// CRC32 (hex) over the series values in id order.
std::string dataset_digest(const Dataset& dataset);
std::string dataset_digest(const LeafStorage& storage);

}  // namespace dsidx
