#pragma once

#include <algorithm>
#include <cmath>

#include "s2pd/nd/rng.hpp"
#include "s2pd/scene/image.hpp"
#include "s2pd/scene/types.hpp"

namespace s2pd::scene {

namespace detail {

inline double hash01(int64_t ix, int64_t iy, uint64_t seed) {
  uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
  h ^= static_cast<uint64_t>(ix) * 0xbf58476d1ce4e5b9ULL;
  h = (h ^ (h >> 31)) * 0x94d049bb133111ebULL;
  h ^= static_cast<uint64_t>(iy) * 0x2545f4914f6cdd1dULL;
  h = (h ^ (h >> 29)) * 0xff51afd7ed558ccdULL;
  h ^= h >> 32;
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Bilinear value noise over an integer lattice, smoothstep-interpolated,
/// output in [0,1).
inline double value_noise(double u, double v, uint64_t seed, double cell) {
  const double fu = u / cell, fv = v / cell;
  const auto iu = static_cast<int64_t>(std::floor(fu));
  const auto iv = static_cast<int64_t>(std::floor(fv));
  double tu = fu - static_cast<double>(iu);
  double tv = fv - static_cast<double>(iv);
  tu = tu * tu * (3.0 - 2.0 * tu);
  tv = tv * tv * (3.0 - 2.0 * tv);
  const double a = hash01(iu, iv, seed), b = hash01(iu + 1, iv, seed);
  const double c = hash01(iu, iv + 1, seed), d = hash01(iu + 1, iv + 1, seed);
  return (a * (1 - tu) + b * tu) * (1 - tv) + (c * (1 - tu) + d * tu) * tv;
}

/// Footprint membership in object-local mm coordinates (dx, dy from center).
inline bool in_footprint(const ObjectSpec& o, double dx, double dy) {
  switch (o.shape) {
    case ShapeKind::cube:
      return std::abs(dx) <= 0.5 * o.size_mm[0] && std::abs(dy) <= 0.5 * o.size_mm[1];
    case ShapeKind::cylinder:
      return dx * dx + dy * dy <= o.size_mm[0] * o.size_mm[0];
    case ShapeKind::triangular_prism: {
      // Equilateral triangle inscribed in the stated radius, apex toward +y.
      const double r = o.size_mm[0];
      const double v0x = 0.0, v0y = r;
      const double v1x = -0.8660254037844386 * r, v1y = -0.5 * r;
      const double v2x = 0.8660254037844386 * r, v2y = -0.5 * r;
      auto side = [&](double ax, double ay, double bx, double by) {
        return (bx - ax) * (dy - ay) - (by - ay) * (dx - ax);
      };
      const double s0 = side(v0x, v0y, v1x, v1y);
      const double s1 = side(v1x, v1y, v2x, v2y);
      const double s2 = side(v2x, v2y, v0x, v0y);
      return (s0 >= 0 && s1 >= 0 && s2 >= 0) || (s0 <= 0 && s1 <= 0 && s2 <= 0);
    }
  }
  return false;
}

struct BoardPlaced {
  const ObjectSpec* object;
  double cx, cy;  // board coordinates of the footprint center
};

struct SampleHit {
  double r, g, b;
  double height_mm;
};

inline std::array<double, 3> background_color(const Background& bg, double bx, double by) {
  switch (bg.kind) {
    case BackgroundKind::white:
      return {0.92, 0.92, 0.92};
    case BackgroundKind::black:
      return {0.06, 0.06, 0.06};
    case BackgroundKind::checkered: {
      const auto& pal = bg.palette;
      if (pal.empty()) return {0.5, 0.5, 0.5};
      const auto ci = static_cast<int64_t>(std::floor(bx / bg.cell_mm));
      const auto cj = static_cast<int64_t>(std::floor(by / bg.cell_mm));
      const size_t idx =
          static_cast<size_t>(((ci & 1) + 2 * (cj & 1))) % pal.size();
      const auto& c = pal[idx];
      return {c[0], c[1], c[2]};
    }
  }
  return {0.5, 0.5, 0.5};
}

class SceneSampler {
 public:
  SceneSampler(const SceneSpec& spec) : spec_(spec) {
    if (spec.target)
      objects_.push_back({&spec.target->object, spec.target->x_mm + kRegionInsetMm,
                          spec.target->y_mm + kRegionInsetMm});
    for (const auto& d : spec.distractors)
      objects_.push_back({&d.object, d.x_mm + kRegionInsetMm, d.y_mm + kRegionInsetMm});
  }

  /// Shade one scene point given in board mm coordinates.
  SampleHit sample(double bx, double by) const {
    const BoardPlaced* top = nullptr;
    for (const auto& o : objects_) {
      if (!in_footprint(*o.object, bx - o.cx, by - o.cy)) continue;
      if (!top || o.object->height_mm() > top->object->height_mm()) top = &o;
    }
    std::array<double, 3> base;
    double z;
    if (top) {
      base = top->object->color;
      if (top->object->texture) {
        const auto& tx = *top->object->texture;
        const double n = value_noise(bx - top->cx, by - top->cy, tx.seed, tx.cell_mm);
        const double m = 1.0 + 0.5 * (n - 0.5);
        for (auto& c : base) c = std::clamp(c * m, 0.0, 1.0);
      }
      z = top->object->height_mm();
    } else {
      base = background_color(spec_.background, bx, by);
      z = 0.0;
    }

    const Lighting& L = spec_.lighting;
    double lambert = -L.direction[2];  // all visible faces point straight up
    if (L.shadows && occluded(bx, by, z)) lambert = 0.0;
    const double intensity = std::clamp(L.ambient + L.directional_intensity * lambert, 0.0, 1.0);
    return {base[0] * intensity, base[1] * intensity, base[2] * intensity, z};
  }

 private:
  const SceneSpec& spec_;
  std::vector<BoardPlaced> objects_;

  /// True when the directional light is blocked on its way to (bx, by, z).
  /// The ray toward the light is marched at a fixed number of heights through
  /// every object standing taller than z.
  bool occluded(double bx, double by, double z) const {
    const auto& L = spec_.lighting.direction;
    const double inv_dz = 1.0 / (-L[2]);
    for (const auto& o : objects_) {
      const double h = o.object->height_mm();
      if (h <= z + 1e-9) continue;
      constexpr int kSteps = 8;
      for (int m = 1; m <= kSteps; ++m) {
        const double zq = z + (h - z) * m / kSteps;
        const double t = (zq - z) * inv_dz;
        const double qx = bx - t * L[0];
        const double qy = by - t * L[1];
        if (in_footprint(*o.object, qx - o.cx, qy - o.cy)) return true;
      }
    }
    return false;
  }
};

inline void gaussian_blur_inplace(std::vector<float>& plane, int w, int h, double sigma) {
  if (sigma <= 0.0) return;
  const int radius = std::max(1, static_cast<int>(std::ceil(2.5 * sigma)));
  std::vector<double> kernel(static_cast<size_t>(radius) * 2 + 1);
  double ksum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    ksum += kernel[static_cast<size_t>(i + radius)];
  }
  for (auto& k : kernel) k /= ksum;

  std::vector<float> tmp(plane.size());
  // horizontal pass, clamp-to-edge
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int xx = std::clamp(x + i, 0, w - 1);
        acc += kernel[static_cast<size_t>(i + radius)] * plane[static_cast<size_t>(y) * w + xx];
      }
      tmp[static_cast<size_t>(y) * w + x] = static_cast<float>(acc);
    }
  // vertical pass
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int yy = std::clamp(y + i, 0, h - 1);
        acc += kernel[static_cast<size_t>(i + radius)] * tmp[static_cast<size_t>(yy) * w + x];
      }
      plane[static_cast<size_t>(y) * w + x] = static_cast<float>(acc);
    }
}

}  // namespace detail

/// Renders a top-down orthographic view of the whole board. Canonical scenes
/// come out clean; real_proxy scenes are post-processed in a fixed order:
/// shading (during sampling), global brightness jitter on RGB, Gaussian blur
/// on all channels, additive Gaussian pixel noise on all channels, then a
/// final clamp to [0,1]. Deterministic for a fixed spec including the domain
/// seed.
inline ImageRGBD render(const SceneSpec& spec, int width, int height) {
  validate_scene(spec);
  ImageRGBD img = ImageRGBD::create(width, height, static_cast<float>(kDepthScaleMm));
  detail::SceneSampler sampler(spec);

  const double bw = spec.board_w_mm();
  const double bh = spec.board_h_mm();
  constexpr int kSS = 4;  // 4x4 supersampling: edge pixels encode coverage

  for (int py = 0; py < height; ++py) {
    for (int px = 0; px < width; ++px) {
      double ar = 0, ag = 0, ab = 0, ad = 0;
      for (int sy = 0; sy < kSS; ++sy)
        for (int sx = 0; sx < kSS; ++sx) {
          const double bx = (px + (sx + 0.5) / kSS) * bw / width;
          const double by = (py + (sy + 0.5) / kSS) * bh / height;
          const auto hit = sampler.sample(bx, by);
          ar += hit.r;
          ag += hit.g;
          ab += hit.b;
          ad += (kDepthScaleMm - hit.height_mm) / kDepthScaleMm;
        }
      const size_t i = static_cast<size_t>(py) * width + px;
      constexpr double inv = 1.0 / (kSS * kSS);
      img.r[i] = static_cast<float>(ar * inv);
      img.g[i] = static_cast<float>(ag * inv);
      img.b[i] = static_cast<float>(ab * inv);
      img.d[i] = static_cast<float>(ad * inv);
    }
  }

  if (spec.domain.kind == DomainKind::real_proxy) {
    nd::Rng rng(spec.domain.seed);
    const double delta = rng.uniform(-spec.domain.brightness_jitter, spec.domain.brightness_jitter);
    for (size_t i = 0; i < img.npx(); ++i) {
      img.r[i] = static_cast<float>(img.r[i] + delta);
      img.g[i] = static_cast<float>(img.g[i] + delta);
      img.b[i] = static_cast<float>(img.b[i] + delta);
    }
    for (int c = 0; c < 4; ++c)
      detail::gaussian_blur_inplace(img.plane(c), width, height, spec.domain.blur_radius_px);
    if (spec.domain.noise_std > 0.0) {
      for (int c = 0; c < 4; ++c) {
        auto& plane = img.plane(c);
        for (auto& v : plane)
          v = static_cast<float>(v + spec.domain.noise_std * rng.normal());
      }
    }
    for (int c = 0; c < 4; ++c)
      for (auto& v : img.plane(c)) v = std::clamp(v, 0.0f, 1.0f);
  }
  return img;
}

}  // namespace s2pd::scene
