#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace s2pd::scene {

// Workspace geometry. Objects are placed on a board analogous to a white
// styrofoam sheet; labels live in the placement region, a rectangle inset
// from the board edge so footprints never hang off the side.
constexpr double kRegionInsetMm = 25.0;
constexpr double kDefaultRegionWmm = 400.0;
constexpr double kDefaultRegionHmm = 250.0;
constexpr double kDepthScaleMm = 1000.0;  // camera plane height over the table

enum class ShapeKind { cube, cylinder, triangular_prism };

struct NoiseTexture {
  uint64_t seed = 0;
  double cell_mm = 8.0;  // lattice cell size of the value-noise pattern
};

struct ObjectSpec {
  std::string name;  // catalog id; empty for ad-hoc objects
  ShapeKind shape = ShapeKind::cube;
  std::array<double, 3> color{0.5, 0.5, 0.5};
  // cube: {x, y, z} edge lengths; cylinder/prism: {radius, height, 0}
  std::array<double, 3> size_mm{10.0, 10.0, 10.0};
  std::optional<NoiseTexture> texture;  // flat color when absent

  double height_mm() const {
    return shape == ShapeKind::cube ? size_mm[2] : size_mm[1];
  }
  /// Radius of the circumscribed footprint circle, used for overlap checks.
  double footprint_radius_mm() const {
    switch (shape) {
      case ShapeKind::cube:
        return 0.5 * std::hypot(size_mm[0], size_mm[1]);
      case ShapeKind::cylinder:
      case ShapeKind::triangular_prism:
        return size_mm[0];
    }
    return 0.0;
  }
  void validate() const {
    for (double s : size_mm)
      if (s < 0.0) throw std::invalid_argument("object size_mm must be positive");
    const int needed = shape == ShapeKind::cube ? 3 : 2;
    for (int i = 0; i < needed; ++i)
      if (size_mm[static_cast<size_t>(i)] <= 0.0)
        throw std::invalid_argument("object size_mm must be positive");
  }
};

struct Lighting {
  double ambient = 0.75;
  double directional_intensity = 0.35;
  std::array<double, 3> direction{0.0, 0.0, -1.0};  // unit, pointing down
  bool shadows = false;
};

inline std::array<double, 3> normalized(double x, double y, double z) {
  const double n = std::sqrt(x * x + y * y + z * z);
  return {x / n, y / n, z / n};
}

/// Fixed lighting of the clean synthetic domain.
inline Lighting nominal_canonical_lighting() {
  return {0.75, 0.35, normalized(0.25, 0.15, -1.0), false};
}
/// Default lighting of the perturbed domain: room light analog with shadows.
inline Lighting nominal_real_lighting() {
  return {0.62, 0.45, normalized(0.35, 0.25, -1.0), true};
}
/// Low-angle strong light: the "table light instead of room light" variant.
inline Lighting table_light_lighting() {
  return {0.40, 0.75, normalized(-0.9, -0.6, -0.8), true};
}

enum class BackgroundKind { white, black, checkered };

struct Background {
  BackgroundKind kind = BackgroundKind::white;
  double cell_mm = 50.0;
  std::vector<std::array<double, 3>> palette;

  static Background white() { return {}; }
  static Background black() {
    Background b;
    b.kind = BackgroundKind::black;
    return b;
  }
  static Background checkered(double cell_mm = 50.0, std::vector<std::array<double, 3>> palette = {
                                                         {0.82, 0.30, 0.28},
                                                         {0.28, 0.48, 0.80},
                                                         {0.88, 0.80, 0.30},
                                                         {0.36, 0.68, 0.40}}) {
    Background b;
    b.kind = BackgroundKind::checkered;
    b.cell_mm = cell_mm;
    b.palette = std::move(palette);
    return b;
  }
};

enum class DomainKind { canonical, real_proxy };

struct DomainParams {
  DomainKind kind = DomainKind::canonical;
  double noise_std = 0.0;
  double brightness_jitter = 0.0;
  double blur_radius_px = 0.0;  // Gaussian sigma in pixels
  uint64_t seed = 0;

  static DomainParams canonical() { return {}; }
  static DomainParams real_proxy(uint64_t seed, double noise_std = 0.03,
                                 double brightness_jitter = 0.15, double blur_radius_px = 0.8) {
    DomainParams d;
    d.kind = DomainKind::real_proxy;
    d.noise_std = noise_std;
    d.brightness_jitter = brightness_jitter;
    d.blur_radius_px = blur_radius_px;
    d.seed = seed;
    return d;
  }
};

struct Placed {
  ObjectSpec object;
  double x_mm = 0.0;  // footprint center in placement-region coordinates
  double y_mm = 0.0;
};

/// Complete declarative description of one renderable scene.
struct SceneSpec {
  std::optional<Placed> target;
  std::vector<Placed> distractors;
  Background background;
  Lighting lighting = nominal_canonical_lighting();
  DomainParams domain;
  std::array<double, 2> region_mm{kDefaultRegionWmm, kDefaultRegionHmm};

  double board_w_mm() const { return region_mm[0] + 2.0 * kRegionInsetMm; }
  double board_h_mm() const { return region_mm[1] + 2.0 * kRegionInsetMm; }
};

inline bool footprints_overlap(const Placed& a, const Placed& b) {
  const double d = std::hypot(a.x_mm - b.x_mm, a.y_mm - b.y_mm);
  return d < a.object.footprint_radius_mm() + b.object.footprint_radius_mm();
}

inline void validate_scene(const SceneSpec& spec) {
  auto check_inside = [&](const Placed& p, const char* role) {
    if (p.x_mm < 0.0 || p.x_mm > spec.region_mm[0] || p.y_mm < 0.0 || p.y_mm > spec.region_mm[1])
      throw std::invalid_argument(std::string(role) + " position (" + std::to_string(p.x_mm) +
                                  ", " + std::to_string(p.y_mm) +
                                  ") mm lies outside the placement region");
    p.object.validate();
  };
  if (spec.target) check_inside(*spec.target, "target");
  for (const auto& d : spec.distractors) {
    check_inside(d, "distractor");
    if (spec.target && footprints_overlap(*spec.target, d))
      throw std::invalid_argument("distractor at (" + std::to_string(d.x_mm) + ", " +
                                  std::to_string(d.y_mm) + ") mm overlaps the target footprint");
  }
  if (spec.domain.kind == DomainKind::canonical) {
    if (spec.domain.noise_std != 0.0 || spec.domain.brightness_jitter != 0.0 ||
        spec.domain.blur_radius_px != 0.0)
      throw std::invalid_argument("canonical domain must carry zero perturbations");
  }
}

// ---- object catalog ----

inline ObjectSpec make_object(std::string name, ShapeKind shape, std::array<double, 3> color,
                              std::array<double, 3> size_mm,
                              std::optional<NoiseTexture> tex = std::nullopt) {
  ObjectSpec o;
  o.name = std::move(name);
  o.shape = shape;
  o.color = color;
  o.size_mm = size_mm;
  o.texture = tex;
  return o;
}

/// Five plain printed objects plus the textured set and the simplified
/// canonical proxy used for the textured target.
inline const std::vector<ObjectSpec>& catalog() {
  static const std::vector<ObjectSpec> objects = {
      make_object("red-cube", ShapeKind::cube, {0.80, 0.10, 0.10}, {50, 50, 50}),
      make_object("green-cube", ShapeKind::cube, {0.10, 0.62, 0.15}, {40, 40, 40}),
      make_object("black-cylinder", ShapeKind::cylinder, {0.08, 0.08, 0.08}, {35, 10, 0}),
      make_object("blue-prism", ShapeKind::triangular_prism, {0.12, 0.20, 0.72}, {45, 10, 0}),
      make_object("red-cube-small", ShapeKind::cube, {0.80, 0.10, 0.10}, {40, 40, 40}),
      make_object("tex-orange-cylinder", ShapeKind::cylinder, {0.85, 0.45, 0.12}, {35, 80, 0},
                  NoiseTexture{601, 8.0}),
      make_object("tex-blue-cube", ShapeKind::cube, {0.22, 0.35, 0.70}, {55, 55, 45},
                  NoiseTexture{702, 10.0}),
      make_object("tex-green-cylinder", ShapeKind::cylinder, {0.25, 0.58, 0.28}, {30, 40, 0},
                  NoiseTexture{803, 7.0}),
      make_object("tex-purple-prism", ShapeKind::triangular_prism, {0.55, 0.25, 0.60}, {40, 30, 0},
                  NoiseTexture{904, 9.0}),
      make_object("tex-yellow-cube", ShapeKind::cube, {0.80, 0.74, 0.20}, {45, 45, 35},
                  NoiseTexture{1005, 6.0}),
      make_object("orange-cylinder", ShapeKind::cylinder, {0.85, 0.45, 0.12}, {35, 80, 0}),
  };
  return objects;
}

inline const ObjectSpec* find_object(const std::string& name) {
  for (const auto& o : catalog())
    if (o.name == name) return &o;
  return nullptr;
}

inline std::string object_names_joined() {
  std::string s;
  for (const auto& o : catalog()) {
    if (!s.empty()) s += ", ";
    s += o.name;
  }
  return s;
}

}  // namespace s2pd::scene
