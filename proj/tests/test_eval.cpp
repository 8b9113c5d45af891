#include <catch2/catch_amalgamated.hpp>

#include "s2pd/eval/experiments.hpp"

using namespace s2pd;
using namespace s2pd::eval;

namespace {

pipeline::TrainConfig tiny_cfg() {
  pipeline::TrainConfig c;
  c.epochs = 1;
  c.batch_size = 16;
  c.latent_dim = 8;
  c.resolution = 16;
  c.seed = 3;
  return c;
}

scene::ImageRGBD render_simple(double x, double y, const char* obj_name = "green-cube",
                               int res = 16) {
  scene::SceneSpec spec;
  spec.target = scene::Placed{*scene::find_object(obj_name), x, y};
  return scene::render(spec, res, res);
}

}  // namespace

TEST_CASE("image_mse closed forms") {
  auto a = scene::ImageRGBD::create(4, 4);
  auto b = scene::ImageRGBD::create(4, 4);
  REQUIRE(image_mse(a, b) == 0.0);
  for (int c = 0; c < 4; ++c)
    for (auto& v : b.plane(c)) v = 1.0f;
  REQUIRE(image_mse(a, b) == 1.0);

  auto c = scene::ImageRGBD::create(3, 4);
  REQUIRE_THROWS_AS(image_mse(a, c), std::invalid_argument);
}

TEST_CASE("held-out grid avoids both training lattices") {
  const auto grid = held_out_grid(400, 250, 5.0, 25.0);
  REQUIRE(grid.size() == 16 * 10);
  for (const auto& p : grid) {
    // never on the 5mm lattice nor the 50mm lattice
    REQUIRE(std::fmod(p[0], 5.0) != 0.0);
    REQUIRE(std::fmod(p[1], 5.0) != 0.0);
    REQUIRE(p[0] <= 400.0);
    REQUIRE(p[1] <= 250.0);
  }
}

TEST_CASE("experiment with zero test positions yields an empty report") {
  auto cfg = tiny_cfg();
  nd::Rng rng(1);
  models::VaeNet vae({16, 8}, rng);
  models::CnnRegressor cnn(16, rng);
  auto vck = vae.to_checkpoint(io::StageTag::vae2, 1);
  auto cck = cnn.to_checkpoint(io::StageTag::cnn, 1);

  ExperimentSpec spec;
  spec.id = "x";
  spec.target = *scene::find_object("green-cube");
  spec.test_positions_mm = {};
  auto rep = run_experiment(spec, &vck, &cck, cfg);
  REQUIRE(rep.results.empty());
  REQUIRE(rep.mean_mm == 0.0);
}

TEST_CASE("run_experiment rejects missing checkpoints") {
  auto cfg = tiny_cfg();
  nd::Rng rng(1);
  models::CnnRegressor cnn(16, rng);
  auto cck = cnn.to_checkpoint(io::StageTag::cnn, 1);
  ExperimentSpec spec;
  spec.id = "b";
  REQUIRE_THROWS_AS(run_experiment(spec, nullptr, &cck, cfg), std::invalid_argument);
  REQUIRE_THROWS_AS(run_experiment(spec, nullptr, nullptr, cfg), std::invalid_argument);
}

TEST_CASE("experiment reports are deterministic") {
  auto cfg = tiny_cfg();
  nd::Rng rng(7);
  models::VaeNet vae({16, 8}, rng);
  models::CnnRegressor cnn(16, rng);
  auto vck = vae.to_checkpoint(io::StageTag::vae2, 1);
  auto cck = cnn.to_checkpoint(io::StageTag::cnn, 1);

  ExperimentSpec spec;
  spec.id = "g";
  spec.target = *scene::find_object("green-cube");
  spec.policy.distractors = {*scene::find_object("blue-prism")};
  spec.seed = 55;
  spec.test_positions_mm = {{100, 100}, {202.5, 127.5}, {350, 200}};
  auto r1 = run_experiment(spec, &vck, &cck, cfg);
  auto r2 = run_experiment(spec, &vck, &cck, cfg);
  REQUIRE(r1.results.size() == r2.results.size());
  for (size_t i = 0; i < r1.results.size(); ++i) {
    REQUIRE(r1.results[i].pred_x_mm == r2.results[i].pred_x_mm);
    REQUIRE(r1.results[i].pred_y_mm == r2.results[i].pred_y_mm);
  }
}

TEST_CASE("selectivity with no distractors gives equal MSEs") {
  auto cfg = tiny_cfg();
  nd::Rng rng(2);
  models::VaeNet vae({16, 8}, rng);
  auto vck = vae.to_checkpoint(io::StageTag::vae2, 1);

  auto target_only = render_simple(200, 125);
  auto r = selectivity_check(vck, target_only, target_only, target_only, cfg);
  REQUIRE(r.mse_to_target_only == r.mse_to_cluttered_canonical);
  REQUIRE(!r.holds());  // strict inequality fails when the scenes are identical
}

TEST_CASE("emit_report writes the documented CSV schemas") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "s2pd_eval_tests";
  fs::create_directories(dir);

  ExperimentReport rep;
  rep.id = "b";
  rep.results = {{10, 20, 11, 21, std::sqrt(2.0)}, {30, 40, 30, 40, 0.0}};
  rep.finalize();
  auto files = emit_report({rep}, dir);
  REQUIRE(files.size() == 2);

  const auto csv = io::read_file(dir / "experiment_b.csv");
  const std::string text(csv.begin(), csv.end());
  REQUIRE(text.starts_with("experiment_id,x_mm,y_mm,pred_x_mm,pred_y_mm,err_mm\n"));
  REQUIRE(text.find("b,10.000,20.000,11.000,21.000,1.414") != std::string::npos);

  const auto sum = io::read_file(dir / "summary.csv");
  const std::string stext(sum.begin(), sum.end());
  REQUIRE(stext.starts_with("experiment_id,mean_mm,max_mm,p95_mm,n\n"));
  REQUIRE(stext.find("b,0.707,1.414,1.414,2") != std::string::npos);

  // empty report list still yields a valid summary header
  auto files2 = emit_report({}, dir);
  const auto sum2 = io::read_file(dir / "summary.csv");
  REQUIRE(std::string(sum2.begin(), sum2.end()) == "experiment_id,mean_mm,max_mm,p95_mm,n\n");
}

TEST_CASE("the built-in matrices define all fourteen experiments") {
  auto cfg = tiny_cfg();
  auto simple = simple_matrix(cfg, 1);
  auto textured = textured_matrix(cfg, 1);
  REQUIRE(simple.size() == 7);
  REQUIRE(textured.size() == 7);
  std::string ids;
  for (const auto& s : simple) ids += s.id;
  for (const auto& s : textured) ids += s.id;
  REQUIRE(ids == "abcdefghijklmn");
  REQUIRE(simple[0].baseline);
  REQUIRE(textured[0].baseline);
  // robustness experiments reference their nominal counterparts
  for (const auto& s : simple)
    if (s.id == "f" || s.id == "g") REQUIRE(s.nominal_id == "c");
  for (const auto& s : textured)
    if (s.id >= "j" && s.id <= "n") REQUIRE(s.nominal_id == "i");
}

TEST_CASE("degradation gates flag violations") {
  pipeline::TrainConfig cfg = tiny_cfg();
  ExperimentReport c, f;
  c.id = "c";
  c.results = {{0, 0, 1, 0, 1.0}};
  c.finalize();
  f.id = "f";
  f.results = {{0, 0, 5, 0, 5.0}};
  f.finalize();
  auto failures = evaluate_gates({c, f}, cfg);
  REQUIRE(failures.size() == 1);
  REQUIRE(failures[0].find("degradation") != std::string::npos);

  ExperimentReport f2;
  f2.id = "f";
  f2.results = {{0, 0, 1.5, 0, 1.5}};
  f2.finalize();
  REQUIRE(evaluate_gates({c, f2}, cfg).empty());
}
