#include "dsidx/persist.hpp"

#include <chrono>
#include <cstdio>
#include <string>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "json.hpp"

#include "dsidx/eapca_tree.hpp"
#include "dsidx/io.hpp"
#include "dsidx/isax_index.hpp"
#include "dsidx/va_file.hpp"

namespace dsidx {

namespace {

using nlohmann::json;

constexpr Magic kLeavesMagic = {'D', 'S', 'L', 'E', 'A', 'F', '0', '1'};

json params_to_json(const IndexParams& p) {
  return {{"leaf_capacity", p.leaf_capacity},
          {"segments", p.segments},
          {"base_bits", p.base_bits},
          {"eapca_initial_segments", p.eapca_initial_segments},
          {"dft_coefficients", p.dft_coefficients},
          {"va_total_bits", p.va_total_bits},
          {"buffer_bytes", p.buffer_bytes},
          {"normalized", p.normalized}};
}

IndexParams params_from_json(const json& j) {
  IndexParams p;
  p.leaf_capacity = j.at("leaf_capacity").get<std::size_t>();
  p.segments = j.at("segments").get<std::size_t>();
  p.base_bits = j.at("base_bits").get<unsigned>();
  p.eapca_initial_segments = j.at("eapca_initial_segments").get<std::size_t>();
  p.dft_coefficients = j.at("dft_coefficients").get<std::size_t>();
  p.va_total_bits = j.at("va_total_bits").get<unsigned>();
  p.buffer_bytes = j.at("buffer_bytes").get<std::size_t>();
  p.normalized = j.at("normalized").get<bool>();
  return p;
}

std::string hex32(std::uint32_t v) { return fmt::format("{:08x}", v); }

std::string utc_now() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  return fmt::format("{:%FT%TZ}", now);
}

}  // namespace

std::string dataset_digest(const Dataset& dataset) {
  const auto& v = dataset.values();
  return hex32(crc32({reinterpret_cast<const std::uint8_t*>(v.data()), v.size() * sizeof(float)}));
}

std::string dataset_digest(const LeafStorage& storage) {
  std::vector<std::size_t> slot_of(storage.slots());
  for (std::size_t s = 0; s < storage.slots(); ++s) {
    if (storage.id(s) >= storage.slots()) throw FormatError(FormatErrorKind::kInvalid, "series id out of range");
    slot_of[storage.id(s)] = s;
  }
  std::uint32_t c = 0;
  for (auto s : slot_of) {
    const auto series = storage.series(s);
    c = crc32({reinterpret_cast<const std::uint8_t*>(series.data()), series.size_bytes()}, c);
  }
  return hex32(c);
}

void persist(const Index& index, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FormatError(FormatErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());

  const auto& storage = index.storage();
  ByteWriter leaves(kLeavesMagic, true);
  leaves.u32(static_cast<std::uint32_t>(storage.slots()));
  leaves.u32(static_cast<std::uint32_t>(storage.length()));
  leaves.f32s(storage.data());
  write_file(dir / "leaves.bin", std::move(leaves).finish());

  index.write_structure(dir);

  json meta = {{"format", "dsidx-index"},
               {"format_version", kIndexFormatVersion},
               {"kind", std::string(to_string(index.kind()))},
               {"params", params_to_json(index.params())},
               {"series_count", storage.slots()},
               {"series_length", storage.length()},
               {"leaf_count", index.leaf_count()},
               {"node_count", index.node_count()},
               {"overflow_leaves", index.overflow_leaves()},
               {"dataset_digest", dataset_digest(storage)},
               {"created_at", utc_now()}};
  const std::string text = meta.dump(2) + "\n";
  write_file(dir / "meta.json", {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::unique_ptr<Index> load_index(const std::filesystem::path& dir) {
  const auto meta_bytes = read_file(dir / "meta.json");
  json meta;
  try {
    meta = json::parse(meta_bytes.begin(), meta_bytes.end());
  } catch (const json::exception& e) {
    throw FormatError(FormatErrorKind::kInvalid, std::string("meta.json: ") + e.what());
  }

  IndexKind kind;
  IndexParams params;
  std::size_t count = 0;
  std::size_t length = 0;
  std::string digest;
  try {
    if (meta.at("format").get<std::string>() != "dsidx-index") {
      throw FormatError(FormatErrorKind::kBadMagic, "meta.json: not an index directory");
    }
    const int version = meta.at("format_version").get<int>();
    if (version != kIndexFormatVersion) {
      throw FormatError(FormatErrorKind::kVersion, "meta.json: unsupported format version " + std::to_string(version));
    }
    kind = parse_index_kind(meta.at("kind").get<std::string>());
    params = params_from_json(meta.at("params"));
    count = meta.at("series_count").get<std::size_t>();
    length = meta.at("series_length").get<std::size_t>();
    digest = meta.at("dataset_digest").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError(FormatErrorKind::kInvalid, std::string("meta.json: ") + e.what());
  } catch (const PreconditionError& e) {
    throw FormatError(FormatErrorKind::kInvalid, std::string("meta.json: ") + e.what());
  }

  ByteReader leaves(read_file(dir / "leaves.bin"), kLeavesMagic, true, "leaves.bin", true);
  const std::uint32_t slots = leaves.u32();
  const std::uint32_t len = leaves.u32();
  if (slots != count || len != length || length == 0) {
    throw FormatError(FormatErrorKind::kInvalid, "leaves.bin: shape disagrees with meta.json");
  }
  if (std::size_t{slots} * len * sizeof(float) != leaves.remaining()) {
    throw FormatError(FormatErrorKind::kTruncated, "leaves.bin: payload size mismatch");
  }
  std::vector<float> data(std::size_t{slots} * len);
  leaves.f32s(data);

  std::unique_ptr<Index> index;
  switch (kind) {
    case IndexKind::kIsax:
      index = std::make_unique<IsaxIndex>(IsaxIndex::read(dir, params, length, std::move(data)));
      break;
    case IndexKind::kEapcaTree:
      index = std::make_unique<EapcaTreeIndex>(EapcaTreeIndex::read(dir, params, length, std::move(data)));
      break;
    case IndexKind::kVaFile:
      index = std::make_unique<VaFile>(VaFile::read(dir, params, length, std::move(data)));
      break;
  }
  if (dataset_digest(index->storage()) != digest) {
    throw FormatError(FormatErrorKind::kChecksum, "dataset digest mismatch");
  }
  return index;
}

}  // namespace dsidx
