#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace s2pd::io {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// All on-disk integers and floats are little-endian with fixed widths, so
// containers written on any platform load on any other.

inline void put_bytes(std::vector<uint8_t>& out, const void* p, size_t n) {
  const auto* b = static_cast<const uint8_t*>(p);
  out.insert(out.end(), b, b + n);
}

template <typename T>
void put_le(std::vector<uint8_t>& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<uint8_t>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff));
}

inline void put_f32(std::vector<uint8_t>& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_le<uint32_t>(out, bits);
}

inline void put_f64(std::vector<uint8_t>& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_le<uint64_t>(out, bits);
}

/// Cursor over a byte buffer that reports the offset of any malformed field.
class ByteReader {
 public:
  ByteReader(const uint8_t* data, size_t size, std::string origin)
      : data_(data), size_(size), origin_(std::move(origin)) {}

  size_t offset() const { return pos_; }
  size_t remaining() const { return size_ - pos_; }

  template <typename T>
  T get_le() {
    static_assert(std::is_integral_v<T>);
    need(sizeof(T), "integer");
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  float get_f32() {
    const uint32_t bits = get_le<uint32_t>();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  double get_f64() {
    const uint64_t bits = get_le<uint64_t>();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  void get_f32_array(float* dst, size_t n) {
    need(n * 4, "f32 array");
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(dst, data_ + pos_, n * 4);
      pos_ += n * 4;
    } else {
      for (size_t i = 0; i < n; ++i) dst[i] = get_f32();
    }
  }

  void get_f64_array(double* dst, size_t n) {
    need(n * 8, "f64 array");
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(dst, data_ + pos_, n * 8);
      pos_ += n * 8;
    } else {
      for (size_t i = 0; i < n; ++i) dst[i] = get_f64();
    }
  }

  std::string get_string(size_t n) {
    need(n, "string");
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw IoError(origin_ + ": " + what + " at byte offset " + std::to_string(pos_));
  }

  void need(size_t n, const char* what) {
    if (pos_ + n > size_)
      throw IoError(origin_ + ": truncated " + what + " at byte offset " + std::to_string(pos_) +
                    " (need " + std::to_string(n) + " bytes, have " + std::to_string(size_ - pos_) +
                    ")");
  }

 private:
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
  std::string origin_;
};

/// FNV-1a, used both for architecture fingerprints and file checksums.
inline uint64_t fnv1a(const uint8_t* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  for (size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a(const std::vector<uint8_t>& v) { return fnv1a(v.data(), v.size()); }

inline std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  f.seekg(0, std::ios::end);
  const auto n = static_cast<size_t>(f.tellg());
  f.seekg(0);
  std::vector<uint8_t> buf(n);
  if (n) f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  if (!f) throw IoError("short read from " + path.string());
  return buf;
}

/// Atomic write: temp file in the same directory, then rename over the target.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::vector<uint8_t>& bytes) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + tmp.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace s2pd::io
