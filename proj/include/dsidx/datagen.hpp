#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dsidx/core.hpp"

namespace dsidx {

struct GeneratorSpec {
  std::size_t count = 0;
  std::size_t length = 0;
  std::uint64_t seed = 0;
};

/// Random walks: series i, point t is the running sum of N(0,1) steps. The
/// step at (i, t) is CounterRng(seed, 0x100).normal(i * length + t).
Dataset gen_random_walk(const GeneratorSpec& spec);

inline const std::vector<double> kDefaultNoiseLevels = {0.0, 0.01, 0.1, 1.0};

struct QueryWorkloadSpec {
  std::size_t count = 100;
  std::vector<double> noise_levels = kDefaultNoiseLevels;
  std::uint64_t seed = 0;
};

struct QueryWorkload {
  Dataset queries;
  std::vector<SeriesId> sources;
  std::vector<double> noise;
};

/// Query j copies a uniformly drawn source series and adds N(0, level^2)
/// noise per point, with levels assigned round-robin.
QueryWorkload gen_queries(const Dataset& source, const QueryWorkloadSpec& spec);

/// DSBIN1: magic, u32 count, u32 length, float32 values, CRC32 trailer.
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);

struct GroundTruth {
  std::size_t k = 0;
  std::vector<std::vector<Neighbor>> rows;  // distances rounded to float32
};

GroundTruth gen_ground_truth(const Dataset& dataset, const Dataset& queries, std::size_t k);

/// DSGT1: magic, u32 query count, u32 k, then k x (u32 id, f32 distance) per query.
void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth);
GroundTruth read_ground_truth(const std::filesystem::path& path);

}  // namespace dsidx
