#pragma once

// Checkpoint file, magic "S2PC".
//
//   header:   magic[4] version:u16 kind:u8 stage:u8 fingerprint:u64 seed:u64
//   payload:  blob_count:u32, then per blob: ndims:u8, dims:i32 x ndims,
//             data: f64 x numel
//   trailer:  checksum:u64 = FNV-1a over all preceding bytes
//
// Parameters are stored f64, the training precision. The fingerprint hashes
// the layer hyperparameter records so a checkpoint can never be loaded into
// a mismatched architecture.

#include <filesystem>

#include "s2pd/io/binary.hpp"
#include "s2pd/nd/tensor.hpp"

namespace s2pd::io {

constexpr char kCheckpointMagic[4] = {'S', '2', 'P', 'C'};
constexpr uint16_t kCheckpointVersion = 1;

enum class NetworkKind : uint8_t { vae = 1, cnn = 2 };
enum class StageTag : uint8_t { vae1 = 1, vae2 = 2, cnn = 3, baseline = 4 };

inline const char* stage_name(StageTag s) {
  switch (s) {
    case StageTag::vae1: return "vae1";
    case StageTag::vae2: return "vae2";
    case StageTag::cnn: return "cnn";
    case StageTag::baseline: return "baseline";
  }
  return "?";
}

struct Checkpoint {
  NetworkKind kind = NetworkKind::vae;
  StageTag stage = StageTag::vae1;
  uint64_t arch_fingerprint = 0;
  uint64_t seed = 0;
  std::vector<nd::Tensor> params;  // ordered parameter blobs
};

inline std::vector<uint8_t> serialize_checkpoint(const Checkpoint& ck) {
  std::vector<uint8_t> out;
  put_bytes(out, kCheckpointMagic, 4);
  put_le<uint16_t>(out, kCheckpointVersion);
  put_le<uint8_t>(out, static_cast<uint8_t>(ck.kind));
  put_le<uint8_t>(out, static_cast<uint8_t>(ck.stage));
  put_le<uint64_t>(out, ck.arch_fingerprint);
  put_le<uint64_t>(out, ck.seed);
  put_le<uint32_t>(out, static_cast<uint32_t>(ck.params.size()));
  for (const auto& t : ck.params) {
    put_le<uint8_t>(out, static_cast<uint8_t>(t.shape.size()));
    for (int d : t.shape) put_le<int32_t>(out, d);
    for (double v : t.data) put_f64(out, v);
  }
  put_le<uint64_t>(out, fnv1a(out));
  return out;
}

inline Checkpoint parse_checkpoint(const std::vector<uint8_t>& bytes, const std::string& origin) {
  if (bytes.size() < 8) throw IoError(origin + ": file too short to be a checkpoint");
  const uint64_t stored_sum = [&] {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes[bytes.size() - 8 + i]) << (8 * i);
    return v;
  }();
  if (fnv1a(bytes.data(), bytes.size() - 8) != stored_sum)
    throw IoError(origin + ": checksum mismatch, file is corrupt or truncated");

  ByteReader r(bytes.data(), bytes.size() - 8, origin);
  const std::string magic = r.get_string(4);
  if (magic != std::string(kCheckpointMagic, 4))
    throw IoError(origin + ": bad magic '" + magic + "' at byte offset 0 (expected S2PC)");
  const auto version = r.get_le<uint16_t>();
  if (version != kCheckpointVersion)
    throw IoError(origin + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.kind = static_cast<NetworkKind>(r.get_le<uint8_t>());
  ck.stage = static_cast<StageTag>(r.get_le<uint8_t>());
  ck.arch_fingerprint = r.get_le<uint64_t>();
  ck.seed = r.get_le<uint64_t>();
  const auto blobs = r.get_le<uint32_t>();
  ck.params.reserve(blobs);
  for (uint32_t i = 0; i < blobs; ++i) {
    const auto ndims = r.get_le<uint8_t>();
    nd::Shape shape(ndims);
    for (auto& d : shape) {
      d = r.get_le<int32_t>();
      if (d <= 0) r.fail("nonpositive blob dimension");
    }
    nd::Tensor t = nd::Tensor::zeros(shape);
    r.get_f64_array(t.data.data(), t.data.size());
    ck.params.push_back(std::move(t));
  }
  if (r.remaining() != 0)
    throw IoError(origin + ": trailing bytes before checksum at byte offset " +
                  std::to_string(r.offset()));
  return ck;
}

inline void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  write_file_atomic(path, serialize_checkpoint(ck));
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path), path.string());
}

/// Content hash used in experiment report provenance.
inline uint64_t checkpoint_hash(const Checkpoint& ck) { return fnv1a(serialize_checkpoint(ck)); }

}  // namespace s2pd::io
