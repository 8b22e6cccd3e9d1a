#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "vf/env/world.hpp"
#include "vf/eval/cortex.hpp"

namespace vf {

// Stimuli plus recorded (surrogate) responses and a fixed train/test split.
//
// File layout, little-endian:
//   "VFAD"             magic
//   version            u8 (currently 1), then 3 zero bytes
//   stimulus_rows      u64
//   height, width      u32, u32   (feature dimension = height * width)
//   response_rows      u64
//   neurons            u32
//   dataset_seed       u64
//   cortex_seed        u64
//   sigma              f64
//   train_count        u64, then u32[train_count] row indices
//   test_count         u64, then u32[test_count] row indices
//   stimuli            f32[stimulus_rows * height * width], row-major
//   responses          f64[response_rows * neurons], row-major
//   crc32              u32 over every preceding byte
struct AlignmentDataset {
  static constexpr std::uint8_t kFormatVersion = 1;

  int height = 0;
  int width = 0;
  std::vector<Observation> stimuli;
  Matrix responses;
  std::uint64_t dataset_seed = 0;
  std::uint64_t cortex_seed = 0;
  double sigma = 0;
  std::vector<int> train_rows;
  std::vector<int> test_rows;

  // Errors: Data for a row-count mismatch or a split that is not a disjoint cover.
  void validate() const;
};

// Poses from reset(world, derive_seed(seed, Dataset, i)); clean renderings.
std::vector<Observation> sample_stimuli(const WorldConfig& world, int count, std::uint64_t seed);

// Stimuli at the world's resolution, responses from `respond` (cortex_seed
// and sigma stay 0), 80/20 split.
AlignmentDataset generate_alignment_dataset(const WorldConfig& world, int count, std::uint64_t dataset_seed,
                                            const std::function<Matrix(const std::vector<Observation>&)>& respond);

// Same stimuli and split, responses from `cortex`.
AlignmentDataset generate_alignment_dataset(const WorldConfig& world, int count, std::uint64_t dataset_seed,
                                            const SurrogateCortex& cortex);

std::vector<std::uint8_t> serialize_dataset(const AlignmentDataset& d);
// Errors: Data (magic, malformed, row mismatch), Version, Truncated, Checksum.
AlignmentDataset deserialize_dataset(const std::vector<std::uint8_t>& bytes);
void save_dataset(const AlignmentDataset& d, const std::filesystem::path& path);
AlignmentDataset load_dataset(const std::filesystem::path& path);

}  // namespace vf
