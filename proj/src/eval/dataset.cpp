#include "vf/eval/dataset.hpp"

#include <cstring>
#include <functional>
#include <zlib.h>

#include "vf/core/binary_io.hpp"
#include "vf/core/error.hpp"
#include "vf/nn/checkpoint.hpp"

namespace vf {

namespace {

constexpr char kMagic[4] = {'V', 'F', 'A', 'D'};

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

}  // namespace

void AlignmentDataset::validate() const {
  if (static_cast<Eigen::Index>(stimuli.size()) != responses.rows()) {
    fail(ErrorKind::Data, "row-count mismatch: " + std::to_string(stimuli.size()) + " stimuli vs " +
                              std::to_string(responses.rows()) + " response rows");
  }
  for (std::size_t i = 0; i < stimuli.size(); ++i) {
    if (stimuli[i].height != height || stimuli[i].width != width ||
        stimuli[i].pixels.size() != static_cast<std::size_t>(height) * width) {
      fail(ErrorKind::Data, "stimulus " + std::to_string(i) + " does not match the dataset's " + std::to_string(height) +
                                "x" + std::to_string(width) + " resolution");
    }
  }
  std::vector<int> seen(stimuli.size(), 0);
  for (const auto* rows : {&train_rows, &test_rows}) {
    for (int r : *rows) {
      if (r < 0 || r >= static_cast<int>(stimuli.size())) fail(ErrorKind::Data, "split index " + std::to_string(r) + " out of range");
      if (seen[static_cast<std::size_t>(r)]++) fail(ErrorKind::Data, "split index " + std::to_string(r) + " appears twice");
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) fail(ErrorKind::Data, "row " + std::to_string(i) + " is in neither split");
  }
}

std::vector<Observation> sample_stimuli(const WorldConfig& world, int count, std::uint64_t seed) {
  if (count <= 0) fail(ErrorKind::Config, "stimulus count must be positive");
  std::vector<Observation> out(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < count; ++i) {
    auto [state, obs] = reset(world, derive_seed(seed, kSeedDataset, 2 + static_cast<std::uint64_t>(i)));
    obs.depth.clear();
    out[static_cast<std::size_t>(i)] = std::move(obs);
  }
  return out;
}

AlignmentDataset generate_alignment_dataset(const WorldConfig& world, int count, std::uint64_t dataset_seed,
                                            const std::function<Matrix(const std::vector<Observation>&)>& respond) {
  AlignmentDataset d;
  d.height = world.render_height;
  d.width = world.render_width;
  d.stimuli = sample_stimuli(world, count, dataset_seed);
  d.responses = respond(d.stimuli);
  d.dataset_seed = dataset_seed;
  split_rows(count, 0.8, dataset_seed, d.train_rows, d.test_rows);
  d.validate();
  return d;
}

AlignmentDataset generate_alignment_dataset(const WorldConfig& world, int count, std::uint64_t dataset_seed,
                                            const SurrogateCortex& cortex) {
  auto d = generate_alignment_dataset(world, count, dataset_seed,
                                      [&](const std::vector<Observation>& s) { return cortex.respond(s); });
  d.cortex_seed = cortex.seed();
  d.sigma = cortex.sigma();
  return d;
}

std::vector<std::uint8_t> serialize_dataset(const AlignmentDataset& d) {
  d.validate();
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u8(AlignmentDataset::kFormatVersion);
  w.u8(0);
  w.u8(0);
  w.u8(0);
  w.u64(d.stimuli.size());
  w.u32(static_cast<std::uint32_t>(d.height));
  w.u32(static_cast<std::uint32_t>(d.width));
  w.u64(static_cast<std::uint64_t>(d.responses.rows()));
  w.u32(static_cast<std::uint32_t>(d.responses.cols()));
  w.u64(d.dataset_seed);
  w.u64(d.cortex_seed);
  w.f64(d.sigma);
  for (const auto* rows : {&d.train_rows, &d.test_rows}) {
    w.u64(rows->size());
    for (int r : *rows) w.u32(static_cast<std::uint32_t>(r));
  }
  for (const auto& s : d.stimuli) {
    for (float v : s.pixels) w.f32(v);
  }
  for (Eigen::Index i = 0; i < d.responses.rows(); ++i) {
    for (Eigen::Index k = 0; k < d.responses.cols(); ++k) w.f64(d.responses(i, k));
  }
  auto& bytes = w.bytes();
  const std::uint32_t crc = crc_of(bytes.data(), bytes.size());
  for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
  return bytes;
}

AlignmentDataset deserialize_dataset(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorKind::Data, "not an alignment dataset (bad magic)");
  }
  if (bytes[4] != AlignmentDataset::kFormatVersion) {
    fail(ErrorKind::Version, "unsupported alignment dataset version " + std::to_string(bytes[4]));
  }
  if (bytes.size() < 12) fail(ErrorKind::Truncated, "alignment dataset ends inside its header");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[body + i]) << (8 * i);

  ByteReader r(bytes.data(), body);
  r.u64();  // magic, version, reserved
  AlignmentDataset d;
  const std::uint64_t stim_rows = r.u64();
  d.height = static_cast<int>(r.u32());
  d.width = static_cast<int>(r.u32());
  const std::uint64_t resp_rows = r.u64();
  const std::uint32_t neurons = r.u32();
  d.dataset_seed = r.u64();
  d.cortex_seed = r.u64();
  d.sigma = r.f64();
  const std::size_t pixels = static_cast<std::size_t>(d.height) * static_cast<std::size_t>(d.width);
  for (auto* rows : {&d.train_rows, &d.test_rows}) {
    const std::uint64_t n = r.u64();
    if (n > r.remaining() / 4) fail(ErrorKind::Truncated, "alignment dataset ends inside its split indices");
    rows->resize(n);
    for (auto& v : *rows) v = static_cast<int>(r.u32());
  }
  const std::size_t need = stim_rows * pixels * 4 + resp_rows * neurons * 8;
  if (r.remaining() < need) fail(ErrorKind::Truncated, "alignment dataset ends inside its matrices");
  if (crc_of(bytes.data(), body) != stored) fail(ErrorKind::Checksum, "alignment dataset checksum mismatch");
  if (r.remaining() != need) fail(ErrorKind::Data, "alignment dataset has trailing bytes");
  if (stim_rows != resp_rows) {
    fail(ErrorKind::Data, "row-count mismatch: " + std::to_string(stim_rows) + " stimuli vs " +
                              std::to_string(resp_rows) + " response rows");
  }
  d.stimuli.resize(stim_rows);
  for (auto& s : d.stimuli) {
    s.height = d.height;
    s.width = d.width;
    s.pixels.resize(pixels);
    for (auto& v : s.pixels) v = r.f32();
  }
  d.responses.resize(static_cast<Eigen::Index>(resp_rows), neurons);
  for (Eigen::Index i = 0; i < d.responses.rows(); ++i) {
    for (Eigen::Index k = 0; k < d.responses.cols(); ++k) d.responses(i, k) = r.f64();
  }
  d.validate();
  return d;
}

void save_dataset(const AlignmentDataset& d, const std::filesystem::path& path) {
  write_file_bytes(path, serialize_dataset(d));
}

AlignmentDataset load_dataset(const std::filesystem::path& path) { return deserialize_dataset(read_file_bytes(path)); }

}  // namespace vf
