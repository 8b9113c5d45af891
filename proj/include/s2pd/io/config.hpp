#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "json.hpp"
#include "s2pd/io/binary.hpp"

namespace s2pd::io {

/// Full run configuration as stored in a JSON config file. `epochs` of zero
/// means "use the per-stage default". Unknown keys are rejected so a typo in
/// a config cannot silently fall back to defaults.
struct RunConfig {
  int epochs = 0;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta = 1e-3;
  int latent_dim = 32;
  uint64_t seed = 1;
  int resolution = 32;
  std::array<double, 2> placement_region_mm{400.0, 250.0};
  double grid_spacing_large_mm = 50.0;
  double grid_spacing_small_mm = 5.0;
  bool vae2_keep_kl = true;    // keep the KL term during VAE2 encoder adaptation
  bool cnn_sampled_z = false;  // train the regressor on sampled-z decodes (ablation)
  std::string out_dir = "out";

  bool operator==(const RunConfig&) const = default;
};

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"beta", c.beta},
          {"latent_dim", c.latent_dim},
          {"seed", c.seed},
          {"resolution", c.resolution},
          {"placement_region_mm", c.placement_region_mm},
          {"grid_spacing_large_mm", c.grid_spacing_large_mm},
          {"grid_spacing_small_mm", c.grid_spacing_small_mm},
          {"vae2_keep_kl", c.vae2_keep_kl},
          {"cnn_sampled_z", c.cnn_sampled_z},
          {"paths", {{"out_dir", c.out_dir}}}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j, const std::string& origin) {
  RunConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "epochs") {
      c.epochs = value.get<int>();
    } else if (key == "batch_size") {
      c.batch_size = value.get<int>();
    } else if (key == "learning_rate") {
      c.learning_rate = value.get<double>();
    } else if (key == "beta") {
      c.beta = value.get<double>();
    } else if (key == "latent_dim") {
      c.latent_dim = value.get<int>();
    } else if (key == "seed") {
      c.seed = value.get<uint64_t>();
    } else if (key == "resolution") {
      c.resolution = value.get<int>();
    } else if (key == "placement_region_mm") {
      c.placement_region_mm = value.get<std::array<double, 2>>();
    } else if (key == "grid_spacing_large_mm") {
      c.grid_spacing_large_mm = value.get<double>();
    } else if (key == "grid_spacing_small_mm") {
      c.grid_spacing_small_mm = value.get<double>();
    } else if (key == "vae2_keep_kl") {
      c.vae2_keep_kl = value.get<bool>();
    } else if (key == "cnn_sampled_z") {
      c.cnn_sampled_z = value.get<bool>();
    } else if (key == "paths") {
      for (const auto& [pk, pv] : value.items()) {
        if (pk == "out_dir")
          c.out_dir = pv.get<std::string>();
        else
          throw IoError(origin + ": unknown config key 'paths." + pk + "'");
      }
    } else {
      throw IoError(origin + ": unknown config key '" + key + "'");
    }
  }
  if (c.epochs < 0 || c.batch_size <= 0 || c.learning_rate <= 0 || c.beta < 0 ||
      c.latent_dim <= 0 || c.resolution <= 0 || c.placement_region_mm[0] < 0 ||
      c.placement_region_mm[1] < 0 || c.grid_spacing_large_mm <= 0 ||
      c.grid_spacing_small_mm <= 0)
    throw IoError(origin + ": config fields out of range");
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": malformed config JSON: " + e.what());
  }
  return run_config_from_json(j, path.string());
}

inline void save_run_config(const std::filesystem::path& path, const RunConfig& c) {
  const std::string s = to_json(c).dump(2) + "\n";
  write_file_atomic(path, std::vector<uint8_t>(s.begin(), s.end()));
}

}  // namespace s2pd::io
