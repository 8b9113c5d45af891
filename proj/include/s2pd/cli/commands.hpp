#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "s2pd/eval/experiments.hpp"
#include "s2pd/io/config.hpp"
#include "s2pd/io/container.hpp"
#include "s2pd/pipeline/train.hpp"

namespace s2pd::cli {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double parse_grid_mm(const std::string& s) {
  if (s.size() < 3 || s.substr(s.size() - 2) != "mm")
    throw UsageError("grid must look like '5mm' or '50mm', got '" + s + "'");
  try {
    const double v = std::stod(s.substr(0, s.size() - 2));
    if (v <= 0) throw UsageError("grid spacing must be positive, got '" + s + "'");
    return v;
  } catch (const std::invalid_argument&) {
    throw UsageError("grid must look like '5mm' or '50mm', got '" + s + "'");
  }
}

inline const scene::ObjectSpec& parse_object(const std::string& name) {
  const auto* o = scene::find_object(name);
  if (!o)
    throw UsageError("unknown object '" + name + "'; valid objects: " +
                     scene::object_names_joined());
  return *o;
}

inline scene::Background parse_background(const std::string& name) {
  if (name == "white") return scene::Background::white();
  if (name == "black") return scene::Background::black();
  if (name == "checkered") return scene::Background::checkered();
  throw UsageError("unknown background '" + name + "'; valid: white, black, checkered");
}

inline scene::Lighting parse_lighting(const std::string& name, scene::DomainKind domain) {
  if (name.empty())
    return domain == scene::DomainKind::canonical ? scene::nominal_canonical_lighting()
                                                  : scene::nominal_real_lighting();
  if (name == "canonical") return scene::nominal_canonical_lighting();
  if (name == "nominal-real") return scene::nominal_real_lighting();
  if (name == "table-light") return scene::table_light_lighting();
  throw UsageError("unknown lighting '" + name +
                   "'; valid: canonical, nominal-real, table-light");
}

// ---- gen ----

struct GenOptions {
  std::string object;
  std::string domain = "canonical";  // canonical | real-proxy
  std::string grid = "5mm";
  std::vector<std::string> distractors;
  std::string background = "white";
  std::string lighting;  // empty: domain default
  io::RunConfig config;
  std::string out = "dataset.s2pd";
};

inline int cmd_gen(const GenOptions& opt) {
  const auto& object = parse_object(opt.object);
  scene::DomainParams domain;
  if (opt.domain == "canonical")
    domain = scene::DomainParams::canonical();
  else if (opt.domain == "real-proxy")
    domain = scene::DomainParams::real_proxy(0);
  else
    throw UsageError("unknown domain '" + opt.domain + "'; valid: canonical, real-proxy");

  scene::GridSpec grid{opt.config.placement_region_mm[0], opt.config.placement_region_mm[1],
                       parse_grid_mm(opt.grid)};
  scene::SceneOptions scene_opts;
  scene_opts.width = scene_opts.height = opt.config.resolution;
  scene_opts.background = parse_background(opt.background);
  scene_opts.lighting = parse_lighting(opt.lighting, domain.kind);
  for (const auto& d : opt.distractors) scene_opts.distractors.push_back(parse_object(d));

  scene::LabeledDataset ds =
      scene::generate_dataset(object, grid, domain, scene_opts, opt.config.seed);
  io::write_dataset(opt.out, ds);
  std::printf("wrote %zu images (%s, %s grid, %s) to %s\n", ds.size(), opt.domain.c_str(),
              opt.grid.c_str(), opt.object.c_str(), opt.out.c_str());
  std::printf("manifest: %s\n", ds.manifest.dump().substr(0, 200).c_str());
  return 0;
}

// ---- train ----

struct TrainOptions {
  std::string stage;  // vae1 | vae2 | cnn | baseline
  std::string data;   // vae1/cnn: canonical container; baseline: real container
  std::string pairs_real, pairs_synth;  // vae2
  std::string vae1_path;                // vae2, cnn
  io::RunConfig config;
  std::string out = "checkpoint.s2pc";
};

inline int cmd_train(const TrainOptions& opt) {
  const auto need = [&](const std::string& value, const std::string& flag,
                        const std::string& prior) {
    if (value.empty())
      throw UsageError("train " + opt.stage + " requires " + flag + " (run the " + prior +
                       " stage first)");
  };

  pipeline::StageResult result;
  if (opt.stage == "vae1") {
    need(opt.data, "--data", "gen");
    auto cfg = pipeline::train_config_from_run(opt.config, io::StageTag::vae1);
    result = pipeline::train_vae1(io::read_dataset(opt.data), cfg);
  } else if (opt.stage == "vae2") {
    need(opt.vae1_path, "--vae1", "vae1");
    need(opt.pairs_real, "--pairs-real", "gen");
    need(opt.pairs_synth, "--pairs-synth", "gen");
    auto cfg = pipeline::train_config_from_run(opt.config, io::StageTag::vae2);
    result = pipeline::train_vae2(io::read_dataset(opt.pairs_real),
                                  io::read_dataset(opt.pairs_synth),
                                  io::read_checkpoint(opt.vae1_path), cfg);
  } else if (opt.stage == "cnn") {
    need(opt.vae1_path, "--vae1", "vae1");
    need(opt.data, "--data", "gen");
    auto cfg = pipeline::train_config_from_run(opt.config, io::StageTag::cnn);
    result = pipeline::train_cnn(io::read_checkpoint(opt.vae1_path), io::read_dataset(opt.data),
                                 cfg);
  } else if (opt.stage == "baseline") {
    need(opt.data, "--data", "gen");
    auto cfg = pipeline::train_config_from_run(opt.config, io::StageTag::baseline);
    result = pipeline::train_baseline(io::read_dataset(opt.data), cfg);
  } else {
    throw UsageError("unknown stage '" + opt.stage + "'; valid: vae1, vae2, cnn, baseline");
  }

  io::write_checkpoint(opt.out, result.checkpoint);
  std::printf("stage %s: %zu epochs, final loss %.6e", opt.stage.c_str(),
              result.loss_curve.size(), result.final_loss);
  if (opt.stage == "vae1" || opt.stage == "vae2")
    std::printf(", recon mse %.6e", result.final_recon_mse);
  std::printf("\nwrote %s\n", opt.out.c_str());
  return 0;
}

// ---- eval ----

struct EvalOptions {
  std::string matrix;       // simple | textured | all (empty: use experiments)
  std::string experiments;  // comma list of ids, or "none"
  std::string ckpt_dir = ".";
  std::string out_dir = "reports";
  io::RunConfig config;
};

namespace detail {

inline std::optional<io::Checkpoint> try_load(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) return std::nullopt;
  return io::read_checkpoint(p);
}

}  // namespace detail

inline int cmd_eval(const EvalOptions& opt) {
  auto cfg = pipeline::train_config_from_run(opt.config, io::StageTag::cnn);

  std::vector<eval::ExperimentSpec> specs;
  const auto simple = eval::simple_matrix(cfg, opt.config.seed);
  const auto textured = eval::textured_matrix(cfg, opt.config.seed);
  if (!opt.matrix.empty()) {
    if (opt.matrix == "simple" || opt.matrix == "all")
      specs.insert(specs.end(), simple.begin(), simple.end());
    if (opt.matrix == "textured" || opt.matrix == "all")
      specs.insert(specs.end(), textured.begin(), textured.end());
    if (specs.empty())
      throw UsageError("unknown matrix '" + opt.matrix + "'; valid: simple, textured, all");
  } else if (!opt.experiments.empty()) {
    if (opt.experiments != "none") {
      std::string ids = opt.experiments;
      for (auto& ch : ids)
        if (ch == ',') ch = ' ';
      std::istringstream is(ids);
      std::string id;
      while (is >> id) {
        bool found = false;
        for (const auto& s : simple)
          if (s.id == id) {
            specs.push_back(s);
            found = true;
          }
        for (const auto& s : textured)
          if (s.id == id) {
            specs.push_back(s);
            found = true;
          }
        if (!found)
          throw UsageError("unknown experiment id '" + id + "'; valid ids are a through n");
      }
    }
  } else {
    throw UsageError("eval requires --matrix or --experiments");
  }

  std::vector<eval::ExperimentReport> reports;
  for (const auto& spec : specs) {
    const auto set = eval::CheckpointSet::in_dir(opt.ckpt_dir, spec.checkpoint_tag);
    std::optional<io::Checkpoint> vae2, cnn;
    if (spec.baseline) {
      cnn = detail::try_load(set.baseline);
      if (!cnn)
        throw UsageError("experiment " + spec.id + " requires " + set.baseline.string() +
                         " (train stage baseline for '" + spec.checkpoint_tag + "' first)");
    } else {
      vae2 = detail::try_load(set.vae2);
      cnn = detail::try_load(set.cnn);
      if (!vae2)
        throw UsageError("experiment " + spec.id + " requires " + set.vae2.string() +
                         " (train stage vae2 for '" + spec.checkpoint_tag + "' first)");
      if (!cnn)
        throw UsageError("experiment " + spec.id + " requires " + set.cnn.string() +
                         " (train stage cnn for '" + spec.checkpoint_tag + "' first)");
    }
    auto rep = eval::run_experiment(spec, vae2 ? &*vae2 : nullptr, &*cnn, cfg);
    std::printf("experiment %s [%s]: mean %.3f mm, max %.3f mm, p95 %.3f mm over %zu positions\n",
                rep.id.c_str(), spec.description.c_str(), rep.mean_mm, rep.max_mm, rep.p95_mm,
                rep.results.size());
    reports.push_back(std::move(rep));
  }

  const auto files = eval::emit_report(reports, opt.out_dir);
  std::printf("wrote %zu report files to %s\n", files.size(), opt.out_dir.c_str());

  const auto failures = eval::evaluate_gates(reports, cfg);
  for (const auto& f : failures) std::printf("GATE FAIL: %s\n", f.c_str());
  if (failures.empty()) std::printf("all gates pass\n");
  return failures.empty() ? 0 : 1;
}

// ---- infer ----

struct InferOptions {
  std::string vae2_path, cnn_path, image_path;
  int index = 0;
  io::RunConfig config;
};

inline int cmd_infer(const InferOptions& opt) {
  if (opt.vae2_path.empty()) throw UsageError("infer requires --vae2 (train stage vae2 first)");
  if (opt.cnn_path.empty()) throw UsageError("infer requires --cnn (train stage cnn first)");
  if (opt.image_path.empty()) throw UsageError("infer requires --image (a dataset container)");

  scene::LabeledDataset ds = io::read_dataset(opt.image_path);
  if (opt.index < 0 || static_cast<size_t>(opt.index) >= ds.size())
    throw UsageError("image index " + std::to_string(opt.index) + " out of range, file holds " +
                     std::to_string(ds.size()) + " images");

  auto cfg = pipeline::train_config_from_run(opt.config, io::StageTag::cnn);
  const auto pos = pipeline::infer(io::read_checkpoint(opt.vae2_path),
                                   io::read_checkpoint(opt.cnn_path), ds.images[opt.index], cfg);
  std::printf("x_mm=%.1f y_mm=%.1f\n", pos[0], pos[1]);
  return 0;
}

}  // namespace s2pd::cli
