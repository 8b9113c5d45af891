#pragma once

// Dataset container, magic "S2PD".
//
//   header:   magic[4] version:u16 width:u16 height:u16 channels:u8(=4)
//             count:u32 label_dim:u8(=2)
//   payload:  count x ( width*height*4 f32 image, channel-planar R,G,B,D;
//                       label_dim f32 label )
//   trailer:  manifest_len:u32, manifest UTF-8 JSON
//
// All scalars little-endian. f32 is the canonical image precision, so a
// read(write(d)) round trip is bit-exact.

#include <filesystem>

#include "json.hpp"
#include "s2pd/io/binary.hpp"
#include "s2pd/scene/dataset.hpp"

namespace s2pd::io {

constexpr char kDatasetMagic[4] = {'S', '2', 'P', 'D'};
constexpr uint16_t kDatasetVersion = 1;

inline std::vector<uint8_t> serialize_dataset(const scene::LabeledDataset& ds) {
  ds.validate();
  if (ds.images.empty()) throw IoError("refusing to serialize an empty dataset");
  const int w = ds.images[0].width, h = ds.images[0].height;
  for (const auto& img : ds.images)
    if (img.width != w || img.height != h)
      throw IoError("dataset images have inconsistent dimensions");

  std::vector<uint8_t> out;
  out.reserve(16 + ds.images.size() * (static_cast<size_t>(w) * h * 4 + 2) * 4);
  put_bytes(out, kDatasetMagic, 4);
  put_le<uint16_t>(out, kDatasetVersion);
  put_le<uint16_t>(out, static_cast<uint16_t>(w));
  put_le<uint16_t>(out, static_cast<uint16_t>(h));
  put_le<uint8_t>(out, 4);
  put_le<uint32_t>(out, static_cast<uint32_t>(ds.images.size()));
  put_le<uint8_t>(out, 2);

  for (size_t i = 0; i < ds.images.size(); ++i) {
    const auto& img = ds.images[i];
    for (int c = 0; c < 4; ++c)
      for (float v : img.plane(c)) put_f32(out, v);
    put_f32(out, static_cast<float>(ds.labels_mm[i][0]));
    put_f32(out, static_cast<float>(ds.labels_mm[i][1]));
  }

  nlohmann::json manifest = ds.manifest;
  manifest["domain_tag"] = ds.domain == scene::DomainKind::canonical ? "canonical" : "real_proxy";
  const std::string mstr = manifest.dump();
  put_le<uint32_t>(out, static_cast<uint32_t>(mstr.size()));
  put_bytes(out, mstr.data(), mstr.size());
  return out;
}

inline scene::LabeledDataset parse_dataset(const std::vector<uint8_t>& bytes,
                                           const std::string& origin) {
  ByteReader r(bytes.data(), bytes.size(), origin);
  r.need(4, "magic");
  const std::string magic = r.get_string(4);
  if (magic != std::string(kDatasetMagic, 4))
    throw IoError(origin + ": bad magic '" + magic + "' at byte offset 0 (expected S2PD)");
  const auto version = r.get_le<uint16_t>();
  if (version != kDatasetVersion)
    throw IoError(origin + ": unsupported dataset version " + std::to_string(version) +
                  " at byte offset 4");
  const int w = r.get_le<uint16_t>();
  const int h = r.get_le<uint16_t>();
  const auto channels = r.get_le<uint8_t>();
  if (channels != 4)
    throw IoError(origin + ": expected 4 channels, got " + std::to_string(int(channels)) +
                  " at byte offset 10");
  const auto count = r.get_le<uint32_t>();
  const auto label_dim = r.get_le<uint8_t>();
  if (label_dim != 2)
    throw IoError(origin + ": expected label_dim 2, got " + std::to_string(int(label_dim)) +
                  " at byte offset 15");
  if (w <= 0 || h <= 0) r.fail("image dimensions must be positive");

  scene::LabeledDataset ds;
  ds.images.reserve(count);
  ds.labels_mm.reserve(count);
  const size_t npx = static_cast<size_t>(w) * h;
  for (uint32_t i = 0; i < count; ++i) {
    scene::ImageRGBD img = scene::ImageRGBD::create(w, h);
    for (int c = 0; c < 4; ++c) r.get_f32_array(img.plane(c).data(), npx);
    const double lx = r.get_f32();
    const double ly = r.get_f32();
    ds.images.push_back(std::move(img));
    ds.labels_mm.push_back({lx, ly});
  }

  const auto mlen = r.get_le<uint32_t>();
  const std::string mstr = r.get_string(mlen);
  try {
    ds.manifest = nlohmann::json::parse(mstr);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(origin + ": malformed manifest JSON: " + e.what());
  }
  if (r.remaining() != 0)
    throw IoError(origin + ": " + std::to_string(r.remaining()) +
                  " trailing bytes after manifest at byte offset " + std::to_string(r.offset()));

  const std::string tag = ds.manifest.value("domain_tag", "canonical");
  ds.domain = tag == "real_proxy" ? scene::DomainKind::real_proxy : scene::DomainKind::canonical;
  if (ds.manifest.contains("depth_scale_mm"))
    for (auto& img : ds.images)
      img.depth_scale_mm = ds.manifest["depth_scale_mm"].get<float>();
  return ds;
}

inline void write_dataset(const std::filesystem::path& path, const scene::LabeledDataset& ds) {
  write_file_atomic(path, serialize_dataset(ds));
}

inline scene::LabeledDataset read_dataset(const std::filesystem::path& path) {
  return parse_dataset(read_file(path), path.string());
}

}  // namespace s2pd::io
