#include "dsidx/datagen.hpp"

#include <algorithm>
#include <cstring>

#include "dsidx/io.hpp"
#include "dsidx/random.hpp"

namespace dsidx {

namespace {

constexpr Magic kDatasetMagic = {'D', 'S', 'B', 'I', 'N', '1', '\0', '\0'};
constexpr Magic kTruthMagic = {'D', 'S', 'G', 'T', '1', '\0', '\0', '\0'};

constexpr std::uint64_t kWalkStream = 0x100;
constexpr std::uint64_t kQuerySourceStream = 0x200;
constexpr std::uint64_t kQueryNoiseStream = 0x201;

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw FormatError(FormatErrorKind::kOverflow, std::string(what) + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

Dataset gen_random_walk(const GeneratorSpec& spec) {
  if (spec.count < 1 || spec.length < 1) throw PreconditionError("generator needs count >= 1 and length >= 1");
  const CounterRng rng(spec.seed, kWalkStream);
  std::vector<float> values(spec.count * spec.length);
  for (std::size_t i = 0; i < spec.count; ++i) {
    double acc = 0.0;
    for (std::size_t t = 0; t < spec.length; ++t) {
      acc += rng.normal(i * spec.length + t);
      values[i * spec.length + t] = static_cast<float>(acc);
    }
  }
  return Dataset(spec.length, std::move(values), false);
}

QueryWorkload gen_queries(const Dataset& source, const QueryWorkloadSpec& spec) {
  if (source.empty()) throw PreconditionError("query generation needs a non-empty source dataset");
  if (spec.count < 1) throw PreconditionError("query count must be positive");
  if (spec.noise_levels.empty()) throw PreconditionError("at least one noise level is required");
  if (!std::is_sorted(spec.noise_levels.begin(), spec.noise_levels.end())) {
    throw PreconditionError("noise levels must be sorted ascending");
  }
  for (double l : spec.noise_levels) {
    if (!(l >= 0.0)) throw PreconditionError("noise levels must be non-negative");
  }

  const CounterRng pick(spec.seed, kQuerySourceStream);
  const CounterRng noise(spec.seed, kQueryNoiseStream);
  const std::size_t n = source.length();
  QueryWorkload w;
  std::vector<float> values(spec.count * n);
  for (std::size_t j = 0; j < spec.count; ++j) {
    const auto src = static_cast<SeriesId>(pick.below(j, source.size()));
    const double level = spec.noise_levels[j % spec.noise_levels.size()];
    const auto s = source.series(src);
    for (std::size_t t = 0; t < n; ++t) {
      const double v = level == 0.0 ? s[t] : s[t] + level * noise.normal(j * n + t);
      values[j * n + t] = static_cast<float>(v);
    }
    w.sources.push_back(src);
    w.noise.push_back(level);
  }
  w.queries = Dataset(n, std::move(values), false);
  return w;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  if (dataset.empty()) throw PreconditionError("refusing to write an empty dataset");
  ByteWriter w(kDatasetMagic);
  w.u32(checked_u32(dataset.size(), "series count"));
  w.u32(checked_u32(dataset.length(), "series length"));
  w.f32s(dataset.values());
  write_file(path, std::move(w).finish());
}

Dataset read_dataset(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  const std::string name = path.filename().string();
  if (bytes.size() < kDatasetMagic.size() || std::memcmp(bytes.data(), kDatasetMagic.data(), kDatasetMagic.size()) != 0) {
    throw FormatError(bytes.size() < kDatasetMagic.size() ? FormatErrorKind::kTruncated : FormatErrorKind::kBadMagic,
                      name + ": not a DSBIN1 file");
  }
  if (bytes.size() < 16) throw FormatError(FormatErrorKind::kTruncated, name + ": header truncated");
  std::uint32_t count, length;
  std::memcpy(&count, bytes.data() + 8, 4);
  std::memcpy(&length, bytes.data() + 12, 4);
  if (count == 0 || length == 0) throw FormatError(FormatErrorKind::kInvalid, name + ": zero count or length");
  const unsigned __int128 payload = static_cast<unsigned __int128>(count) * length * sizeof(float);
  if (payload > (static_cast<unsigned __int128>(1) << 48)) {
    throw FormatError(FormatErrorKind::kOverflow, name + ": declared size overflows");
  }
  const std::size_t expected = 16 + static_cast<std::size_t>(payload) + 4;
  if (bytes.size() < expected) throw FormatError(FormatErrorKind::kTruncated, name + ": truncated payload");
  if (bytes.size() > expected) throw FormatError(FormatErrorKind::kInvalid, name + ": trailing bytes");

  ByteReader r(std::move(bytes), kDatasetMagic, true, name);
  r.u32();
  r.u32();
  std::vector<float> values(std::size_t{count} * length);
  r.f32s(values);
  r.expect_end();
  try {
    return Dataset(length, std::move(values), false);
  } catch (const PreconditionError& e) {
    throw FormatError(FormatErrorKind::kInvalid, name + ": " + e.what());
  }
}

GroundTruth gen_ground_truth(const Dataset& dataset, const Dataset& queries, std::size_t k) {
  if (queries.length() != dataset.length()) throw PreconditionError("query/dataset length mismatch");
  if (k < 1 || k > dataset.size()) throw PreconditionError("ground-truth k must lie in [1, dataset size]");
  GroundTruth gt;
  gt.k = k;
  gt.rows.reserve(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    auto r = knn_bruteforce(dataset, queries.series(q), k);
    for (auto& n : r.neighbors) n.distance = static_cast<float>(n.distance);
    gt.rows.push_back(std::move(r.neighbors));
  }
  return gt;
}

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth) {
  ByteWriter w(kTruthMagic);
  w.u32(checked_u32(truth.rows.size(), "query count"));
  w.u32(checked_u32(truth.k, "k"));
  for (const auto& row : truth.rows) {
    if (row.size() != truth.k) throw PreconditionError("ground-truth row has wrong width");
    for (const auto& n : row) {
      w.u32(n.id);
      w.f32(static_cast<float>(n.distance));
    }
  }
  write_file(path, w.raw());
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  const std::string name = path.filename().string();
  ByteReader r(read_file(path), kTruthMagic, false, name);
  GroundTruth gt;
  const std::uint32_t queries = r.u32();
  gt.k = r.u32();
  if (gt.k == 0) throw FormatError(FormatErrorKind::kInvalid, name + ": k is zero");
  if (std::size_t{queries} * gt.k * 8 != r.remaining()) {
    throw FormatError(std::size_t{queries} * gt.k * 8 > r.remaining() ? FormatErrorKind::kTruncated
                                                                        : FormatErrorKind::kInvalid,
                      name + ": payload size disagrees with header");
  }
  gt.rows.resize(queries);
  for (auto& row : gt.rows) {
    row.resize(gt.k);
    for (auto& n : row) {
      n.id = r.u32();
      n.distance = r.f32();
    }
  }
  return gt;
}

}  // namespace dsidx
