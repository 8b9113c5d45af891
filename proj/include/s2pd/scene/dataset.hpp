#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "s2pd/nd/rng.hpp"
#include "s2pd/scene/render.hpp"
#include "s2pd/scene/types.hpp"

namespace s2pd::scene {

struct GridSpec {
  double region_w_mm = kDefaultRegionWmm;
  double region_h_mm = kDefaultRegionHmm;
  double spacing_mm = 5.0;

  bool operator==(const GridSpec&) const = default;
};

/// Regular lattice over the placement region, both boundary rows/cols
/// included: (floor(w/s)+1) * (floor(h/s)+1) points. A degenerate region
/// yields the single point (0,0).
inline std::vector<std::array<double, 2>> grid_positions(double region_w_mm, double region_h_mm,
                                                         double spacing_mm) {
  if (spacing_mm <= 0.0)
    throw std::invalid_argument("grid spacing must be positive, got " +
                                std::to_string(spacing_mm));
  if (region_w_mm < 0.0 || region_h_mm < 0.0)
    throw std::invalid_argument("placement region dimensions must be nonnegative");
  const int nx = static_cast<int>(std::floor(region_w_mm / spacing_mm)) + 1;
  const int ny = static_cast<int>(std::floor(region_h_mm / spacing_mm)) + 1;
  std::vector<std::array<double, 2>> out;
  out.reserve(static_cast<size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      out.push_back({i * spacing_mm, j * spacing_mm});
  return out;
}

inline std::vector<std::array<double, 2>> grid_positions(const GridSpec& g) {
  return grid_positions(g.region_w_mm, g.region_h_mm, g.spacing_mm);
}

struct LabeledDataset {
  std::vector<ImageRGBD> images;
  std::vector<std::array<double, 2>> labels_mm;  // placement-region coordinates
  DomainKind domain = DomainKind::canonical;
  nlohmann::json manifest;

  size_t size() const { return images.size(); }
  void validate() const {
    if (images.size() != labels_mm.size())
      throw std::logic_error("dataset images and labels differ in length");
  }
};

/// Scene policy shared by all images of one generated dataset.
struct SceneOptions {
  std::vector<ObjectSpec> distractors;  // placed at seeded random poses per image
  Background background = Background::white();
  std::optional<Lighting> lighting;  // default: nominal for the domain
  int width = 32;
  int height = 32;
};

namespace detail {

inline Lighting default_lighting(DomainKind kind) {
  return kind == DomainKind::canonical ? nominal_canonical_lighting() : nominal_real_lighting();
}

/// Draw a pose for `obj` that stays inside the region and clear of everything
/// already placed. Throws after a bounded number of rejections.
inline Placed place_random(const ObjectSpec& obj, const GridSpec& grid, const Placed& target,
                           const std::vector<Placed>& placed, nd::Rng& rng) {
  constexpr int kMaxTries = 100;
  Placed p{obj, 0.0, 0.0};
  for (int attempt = 0; attempt < kMaxTries; ++attempt) {
    p.x_mm = rng.uniform(0.0, grid.region_w_mm);
    p.y_mm = rng.uniform(0.0, grid.region_h_mm);
    bool ok = !footprints_overlap(p, target);
    for (const auto& q : placed) ok = ok && !footprints_overlap(p, q);
    if (ok) return p;
  }
  throw std::runtime_error("could not place distractor '" + obj.name +
                           "' without overlap; last tried (" + std::to_string(p.x_mm) + ", " +
                           std::to_string(p.y_mm) + ") mm");
}

inline nlohmann::json object_json(const ObjectSpec& o) {
  nlohmann::json j{{"name", o.name},
                   {"shape", static_cast<int>(o.shape)},
                   {"color", o.color},
                   {"size_mm", o.size_mm}};
  if (o.texture) j["texture"] = {{"seed", o.texture->seed}, {"cell_mm", o.texture->cell_mm}};
  return j;
}

inline nlohmann::json domain_json(const DomainParams& d) {
  return {{"kind", d.kind == DomainKind::canonical ? "canonical" : "real_proxy"},
          {"noise_std", d.noise_std},
          {"brightness_jitter", d.brightness_jitter},
          {"blur_radius_px", d.blur_radius_px},
          {"seed", d.seed}};
}

}  // namespace detail

/// One image per grid position; labels equal the grid positions. Per-image
/// randomness (domain seed, distractor poses) is forked from (seed, index) so
/// generation order never matters.
inline LabeledDataset generate_dataset(const ObjectSpec& object, const GridSpec& grid,
                                       const DomainParams& domain, const SceneOptions& opts,
                                       uint64_t seed) {
  const auto positions = grid_positions(grid);
  LabeledDataset ds;
  ds.domain = domain.kind;
  ds.images.reserve(positions.size());
  ds.labels_mm = positions;

  const Lighting lighting = opts.lighting ? *opts.lighting : detail::default_lighting(domain.kind);
  nd::Rng base(seed);
  nlohmann::json scenes = nlohmann::json::array();

  for (size_t i = 0; i < positions.size(); ++i) {
    nd::Rng rng = base.fork(i);
    SceneSpec spec;
    spec.region_mm = {grid.region_w_mm, grid.region_h_mm};
    spec.target = Placed{object, positions[i][0], positions[i][1]};
    spec.background = opts.background;
    spec.lighting = lighting;
    spec.domain = domain;
    spec.domain.seed = rng.next_u64();

    nlohmann::json scene_rec{{"index", i}, {"domain_seed", spec.domain.seed}};
    if (!opts.distractors.empty()) {
      nlohmann::json dj = nlohmann::json::array();
      for (const auto& dob : opts.distractors) {
        Placed p = detail::place_random(dob, grid, *spec.target, spec.distractors, rng);
        spec.distractors.push_back(p);
        dj.push_back({{"name", dob.name}, {"x_mm", p.x_mm}, {"y_mm", p.y_mm}});
      }
      scene_rec["distractors"] = dj;
    }
    scenes.push_back(scene_rec);
    ds.images.push_back(render(spec, opts.width, opts.height));
  }

  ds.manifest = {{"seed", seed},
                 {"grid",
                  {{"region_mm", {grid.region_w_mm, grid.region_h_mm}},
                   {"spacing_mm", grid.spacing_mm}}},
                 {"object", detail::object_json(object)},
                 {"domain", detail::domain_json(domain)},
                 {"background", static_cast<int>(opts.background.kind)},
                 {"resolution", {opts.width, opts.height}},
                 {"depth_scale_mm", kDepthScaleMm},
                 {"scenes", scenes}};
  ds.validate();
  return ds;
}

/// Index-aligned (real_proxy, canonical) dataset pair over one grid. The real
/// side may carry distractors, textures and lighting variation; the canonical
/// side renders only the proxy object on a clean white background.
inline std::pair<LabeledDataset, LabeledDataset> paired_dataset(
    const ObjectSpec& target_real, const ObjectSpec& target_synth_proxy, const GridSpec& grid,
    uint64_t seed, const SceneOptions& real_opts = {},
    const DomainParams& real_domain = DomainParams::real_proxy(0)) {
  LabeledDataset real = generate_dataset(target_real, grid, real_domain, real_opts, seed);

  SceneOptions canon_opts;
  canon_opts.width = real_opts.width;
  canon_opts.height = real_opts.height;
  LabeledDataset canon =
      generate_dataset(target_synth_proxy, grid, DomainParams::canonical(), canon_opts, seed + 1);

  real.manifest["paired_with"] = canon.manifest["object"];
  canon.manifest["paired_with"] = real.manifest["object"];
  return {std::move(real), std::move(canon)};
}

/// Pairing contract used by the VAE2 stage: equal length and identical labels
/// index by index.
inline void require_paired(const LabeledDataset& real, const LabeledDataset& canon) {
  if (real.size() != canon.size())
    throw std::invalid_argument("paired datasets differ in size: " + std::to_string(real.size()) +
                                " vs " + std::to_string(canon.size()));
  for (size_t i = 0; i < real.size(); ++i) {
    if (real.labels_mm[i] != canon.labels_mm[i])
      throw std::invalid_argument("paired datasets disagree on label " + std::to_string(i) +
                                  ": grids do not match");
  }
}

}  // namespace s2pd::scene
