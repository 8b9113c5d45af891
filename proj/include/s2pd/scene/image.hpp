#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace s2pd::scene {

/// 4-channel image: R, G, B and depth, each stored as a separate plane of
/// floats in [0,1]. f32 is the canonical storage precision for images; the
/// training core widens to f64 on ingest.
struct ImageRGBD {
  int width = 0;
  int height = 0;
  std::vector<float> r, g, b, d;
  float depth_scale_mm = 1000.0f;  // maps normalized depth to millimeters

  static ImageRGBD create(int w, int h, float depth_scale_mm = 1000.0f) {
    ImageRGBD img;
    img.width = w;
    img.height = h;
    img.depth_scale_mm = depth_scale_mm;
    const size_t n = static_cast<size_t>(w) * static_cast<size_t>(h);
    img.r.assign(n, 0.0f);
    img.g.assign(n, 0.0f);
    img.b.assign(n, 0.0f);
    img.d.assign(n, 0.0f);
    return img;
  }

  size_t npx() const { return static_cast<size_t>(width) * static_cast<size_t>(height); }

  std::vector<float>& plane(int c) {
    switch (c) {
      case 0: return r;
      case 1: return g;
      case 2: return b;
      case 3: return d;
    }
    throw std::out_of_range("channel index");
  }
  const std::vector<float>& plane(int c) const {
    return const_cast<ImageRGBD*>(this)->plane(c);
  }

  bool same_dims(const ImageRGBD& o) const { return width == o.width && height == o.height; }

  bool operator==(const ImageRGBD& o) const {
    return width == o.width && height == o.height && depth_scale_mm == o.depth_scale_mm &&
           r == o.r && g == o.g && b == o.b && d == o.d;
  }
};

}  // namespace s2pd::scene
