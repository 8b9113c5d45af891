// s2pd: sim-to-real position detection pipeline.
//
//   s2pd gen    --object green-cube --domain canonical --grid 5mm --out ds.s2pd
//   s2pd train  vae1 --data ds.s2pd --out green-cube_vae1.s2pc
//   s2pd train  vae2 --vae1 ... --pairs-real ... --pairs-synth ... --out ...
//   s2pd train  cnn --vae1 ... --data ds.s2pd --out ...
//   s2pd train  baseline --data real54.s2pd --out ...
//   s2pd eval   --matrix simple --ckpt-dir ckpts --out-dir reports
//   s2pd infer  --vae2 ... --cnn ... --image test.s2pd --index 3
//
// Exit codes: 0 success, 1 evaluation gate failure, 2 usage error, 3 I/O or
// training failure.

#include <cstdio>
#include <exception>

#include "CLI11.hpp"
#include "s2pd/cli/commands.hpp"

namespace {

void add_common(CLI::App* cmd, std::string& config_path, s2pd::io::RunConfig& config,
                bool& deterministic) {
  cmd->add_option("--config", config_path, "JSON run configuration file");
  cmd->add_option("--seed", config.seed, "RNG seed (overrides config)");
  cmd->add_flag("--deterministic", deterministic,
                "single-threaded deterministic mode (the only mode implemented; "
                "accepted for interface stability)");
}

// --config is parsed first, then explicit flags override it.
s2pd::io::RunConfig resolve_config(const std::string& config_path, const CLI::App* cmd,
                                   const s2pd::io::RunConfig& overrides) {
  s2pd::io::RunConfig cfg;
  if (!config_path.empty()) cfg = s2pd::io::load_run_config(config_path);
  const auto* seed_opt = cmd->get_option_no_throw("--seed");
  if (seed_opt && seed_opt->count()) cfg.seed = overrides.seed;
  const auto* epochs_opt = cmd->get_option_no_throw("--epochs");
  if (epochs_opt && epochs_opt->count()) cfg.epochs = overrides.epochs;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sim-to-real object position detection via paired VAEs"};
  app.require_subcommand(1);

  s2pd::io::RunConfig flags;
  std::string config_path;
  bool deterministic = false;

  // gen
  auto* gen = app.add_subcommand("gen", "render a labeled dataset container");
  s2pd::cli::GenOptions gen_opt;
  gen->add_option("--object", gen_opt.object, "catalog object name")->required();
  gen->add_option("--domain", gen_opt.domain, "canonical | real-proxy");
  gen->add_option("--grid", gen_opt.grid, "grid spacing, e.g. 5mm or 50mm");
  gen->add_option("--distractors", gen_opt.distractors,
                  "catalog names placed at random poses per image");
  gen->add_option("--background", gen_opt.background, "white | black | checkered");
  gen->add_option("--lighting", gen_opt.lighting, "canonical | nominal-real | table-light");
  gen->add_option("--out", gen_opt.out, "output path");
  add_common(gen, config_path, flags, deterministic);

  // train
  auto* train = app.add_subcommand("train", "train one pipeline stage");
  s2pd::cli::TrainOptions train_opt;
  train->add_option("stage", train_opt.stage, "vae1 | vae2 | cnn | baseline")->required();
  train->add_option("--data", train_opt.data, "dataset container");
  train->add_option("--pairs-real", train_opt.pairs_real, "real side of the paired set");
  train->add_option("--pairs-synth", train_opt.pairs_synth, "synthetic side of the paired set");
  train->add_option("--vae1", train_opt.vae1_path, "VAE1 checkpoint");
  train->add_option("--epochs", flags.epochs, "epoch count (0 = stage default)");
  train->add_option("--out", train_opt.out, "output checkpoint path");
  add_common(train, config_path, flags, deterministic);

  // eval
  auto* ev = app.add_subcommand("eval", "run experiment analogs and emit CSV reports");
  s2pd::cli::EvalOptions eval_opt;
  ev->add_option("--matrix", eval_opt.matrix, "simple | textured | all");
  ev->add_option("--experiments", eval_opt.experiments, "comma-separated ids, or 'none'");
  ev->add_option("--ckpt-dir", eval_opt.ckpt_dir, "directory holding <tag>_<stage>.s2pc files");
  ev->add_option("--out-dir", eval_opt.out_dir, "report output directory");
  add_common(ev, config_path, flags, deterministic);

  // infer
  auto* inf = app.add_subcommand("infer", "predict the position for one stored image");
  s2pd::cli::InferOptions infer_opt;
  inf->add_option("--vae2", infer_opt.vae2_path, "VAE2 checkpoint");
  inf->add_option("--cnn", infer_opt.cnn_path, "CNN checkpoint");
  inf->add_option("--image", infer_opt.image_path, "dataset container holding the image");
  inf->add_option("--index", infer_opt.index, "image index in the container");
  add_common(inf, config_path, flags, deterministic);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      gen_opt.config = resolve_config(config_path, gen, flags);
      return s2pd::cli::cmd_gen(gen_opt);
    }
    if (train->parsed()) {
      train_opt.config = resolve_config(config_path, train, flags);
      return s2pd::cli::cmd_train(train_opt);
    }
    if (ev->parsed()) {
      eval_opt.config = resolve_config(config_path, ev, flags);
      return s2pd::cli::cmd_eval(eval_opt);
    }
    if (inf->parsed()) {
      infer_opt.config = resolve_config(config_path, inf, flags);
      return s2pd::cli::cmd_infer(infer_opt);
    }
  } catch (const s2pd::cli::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 2;
}
