#include "vf/nn/checkpoint.hpp"

#include <zlib.h>

#include <fstream>
#include <iterator>

#include "vf/core/binary_io.hpp"

namespace vf {

namespace {

constexpr char kMagic[4] = {'V', 'F', 'C', 'K'};
constexpr std::size_t kHeaderSize = 16;  // magic, version, 3 reserved, payload size

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(0L, data, static_cast<uInt>(n)));
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Model<float>& model, std::uint64_t step,
                                               const Rng::State& rng_state) {
  ByteWriter payload;
  payload.str(model.spec().arch_id());
  payload.u64(step);
  for (auto w : rng_state) payload.u64(w);
  const auto& norm = model.normalizer();
  payload.u32(static_cast<std::uint32_t>(norm.channels()));
  payload.f64(norm.momentum());
  payload.u64(norm.updates());
  for (double v : norm.raw_mean()) payload.f64(v);
  for (double v : norm.raw_second_moment()) payload.f64(v);
  payload.u32(static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& p : model.parameters()) {
    payload.str(p.name);
    payload.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (int d : p.value.shape()) payload.u32(static_cast<std::uint32_t>(d));
    for (float v : p.value.storage()) payload.f32(v);
  }

  ByteWriter out;
  out.raw(kMagic, 4);
  out.u8(ModelCheckpoint::kFormatVersion);
  out.u8(0);
  out.u8(0);
  out.u8(0);
  out.u64(payload.bytes().size());
  out.raw(payload.bytes().data(), payload.bytes().size());
  out.u32(crc_of(out.bytes().data(), out.bytes().size()));
  return std::move(out.bytes());
}

ModelCheckpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes,
                                       const std::optional<ModelSpec>& expected) {
  if (bytes.size() < kHeaderSize) fail(ErrorKind::Truncated, "checkpoint shorter than its header");
  if (!std::equal(kMagic, kMagic + 4, bytes.begin())) fail(ErrorKind::Data, "not a checkpoint file (bad magic)");
  if (bytes[4] != ModelCheckpoint::kFormatVersion) {
    fail(ErrorKind::Version, "unsupported checkpoint version " + std::to_string(bytes[4]) + " (expected " +
                                 std::to_string(ModelCheckpoint::kFormatVersion) + ")");
  }
  ByteReader header(bytes.data() + 8, 8);
  const std::uint64_t payload_size = header.u64();
  if (bytes.size() - kHeaderSize < 4 || bytes.size() - kHeaderSize - 4 < payload_size) {
    fail(ErrorKind::Truncated, "checkpoint truncated: header declares " + std::to_string(payload_size) +
                                   " payload bytes, file has " + std::to_string(bytes.size()));
  }
  if (bytes.size() != kHeaderSize + payload_size + 4) fail(ErrorKind::Data, "trailing bytes after checkpoint");
  ByteReader crc_reader(bytes.data() + kHeaderSize + payload_size, 4);
  const std::uint32_t stored_crc = crc_reader.u32();
  if (stored_crc != crc_of(bytes.data(), kHeaderSize + payload_size)) {
    fail(ErrorKind::Checksum, "checkpoint checksum mismatch");
  }

  ByteReader in(bytes.data() + kHeaderSize, payload_size);
  const std::string arch = in.str();
  if (expected && expected->arch_id() != arch) {
    fail(ErrorKind::Architecture, "checkpoint architecture '" + arch + "' does not match expected '" +
                                      expected->arch_id() + "'");
  }
  ModelCheckpoint ck{Model<float>(ModelSpec::from_arch_id(arch), 0), 0, {}};
  ck.step = in.u64();
  for (auto& w : ck.rng_state) w = in.u64();
  const std::uint32_t channels = in.u32();
  if (channels == 0 || channels > 4096) fail(ErrorKind::Data, "implausible normalizer channel count");
  const double momentum = in.f64();
  const std::uint64_t updates = in.u64();
  std::vector<double> raw_mean(channels), raw_sq(channels);
  for (auto& v : raw_mean) v = in.f64();
  for (auto& v : raw_sq) v = in.f64();
  ck.model.normalizer().restore(momentum, updates, std::move(raw_mean), std::move(raw_sq));

  const std::uint32_t count = in.u32();
  if (count != ck.model.parameters().size()) {
    fail(ErrorKind::Architecture, "checkpoint holds " + std::to_string(count) + " tensors, architecture '" + arch +
                                      "' has " + std::to_string(ck.model.parameters().size()));
  }
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string name = in.str();
    if (!ck.model.has_parameter(name)) fail(ErrorKind::Architecture, "unexpected tensor '" + name + "'");
    auto& p = ck.model.parameter(name);
    const std::uint32_t rank = in.u32();
    Shape shape;
    for (std::uint32_t i = 0; i < rank && i < 8; ++i) shape.push_back(static_cast<int>(in.u32()));
    if (shape != p.value.shape()) {
      fail(ErrorKind::Architecture, "tensor '" + name + "' has shape " + shape_string(shape) + ", expected " +
                                        shape_string(p.value.shape()));
    }
    for (auto& v : p.value.storage()) v = in.f32();
  }
  if (in.remaining() != 0) fail(ErrorKind::Data, "unparsed bytes at end of checkpoint payload");
  return ck;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot open '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorKind::Io, "cannot write '" + tmp + "'");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) fail(ErrorKind::Io, "write failed for '" + tmp + "' (disk full?)");
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const Model<float>& model, std::uint64_t step, const Rng::State& rng_state,
                     const std::filesystem::path& path) {
  write_file_bytes(path, serialize_checkpoint(model, step, rng_state));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path, const std::optional<ModelSpec>& expected) {
  return deserialize_checkpoint(read_file_bytes(path), expected);
}

}  // namespace vf
