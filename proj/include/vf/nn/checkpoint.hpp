#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "vf/core/rng.hpp"
#include "vf/nn/model.hpp"

namespace vf {

// Binary checkpoint, little-endian throughout:
//
//   "VFCK"            4 bytes magic
//   version           u8 (currently 1), then 3 zero bytes
//   payload_size      u64, bytes between this field and the trailing CRC
//   payload:
//     arch_id         u32 length + UTF-8 bytes
//     step            u64
//     rng_state       4 x u64
//     normalizer      u32 channels, f64 momentum, u64 updates,
//                     f64[channels] raw mean, f64[channels] raw second moment
//     tensor_count    u32
//     tensors         u32 name length + bytes, u32 rank, u32[rank] dims,
//                     f32[prod(dims)] values
//   crc32             u32 (zlib polynomial) over every preceding byte
struct ModelCheckpoint {
  static constexpr std::uint8_t kFormatVersion = 1;

  Model<float> model;
  std::uint64_t step = 0;
  Rng::State rng_state{};
};

std::vector<std::uint8_t> serialize_checkpoint(const Model<float>& model, std::uint64_t step,
                                               const Rng::State& rng_state);

// Errors: Truncated, Version, Checksum, Data (bad magic / malformed payload),
// Architecture (when `expected` is given and differs from the stored id).
ModelCheckpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes,
                                       const std::optional<ModelSpec>& expected = std::nullopt);

void save_checkpoint(const Model<float>& model, std::uint64_t step, const Rng::State& rng_state,
                     const std::filesystem::path& path);

ModelCheckpoint load_checkpoint(const std::filesystem::path& path,
                                const std::optional<ModelSpec>& expected = std::nullopt);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace vf
