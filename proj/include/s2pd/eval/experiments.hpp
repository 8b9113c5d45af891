#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "s2pd/io/checkpoint.hpp"
#include "s2pd/pipeline/train.hpp"
#include "s2pd/scene/dataset.hpp"
#include "s2pd/scene/render.hpp"

namespace s2pd::eval {

/// Mean over all 4 channels and pixels of the squared difference; both
/// images must be on the same [0,1] normalization.
inline double image_mse(const scene::ImageRGBD& a, const scene::ImageRGBD& b) {
  if (!a.same_dims(b))
    throw std::invalid_argument("image_mse: shape mismatch " + std::to_string(a.width) + "x" +
                                std::to_string(a.height) + " vs " + std::to_string(b.width) +
                                "x" + std::to_string(b.height));
  double acc = 0.0;
  for (int c = 0; c < 4; ++c) {
    const auto& pa = a.plane(c);
    const auto& pb = b.plane(c);
    for (size_t i = 0; i < pa.size(); ++i) {
      const double d = double(pa[i]) - double(pb[i]);
      acc += d * d;
    }
  }
  return acc / (4.0 * double(a.npx()));
}

/// Scene policy of one experiment: what surrounds the target at test time.
struct ScenePolicy {
  std::vector<scene::ObjectSpec> distractors;
  scene::Background background = scene::Background::white();
  scene::Lighting lighting = scene::nominal_real_lighting();
  scene::DomainParams domain = scene::DomainParams::real_proxy(0);
};

/// One experiment analog: id, target, scene policy, checkpoint selection and
/// the evaluation grid. Fully serializable via the manifest record.
struct ExperimentSpec {
  std::string id;                // "a" .. "n"
  std::string description;
  std::string checkpoint_tag;    // which trained pipeline to use, e.g. "green-cube"
  bool baseline = false;         // true: raw image -> baseline CNN, no VAE
  scene::ObjectSpec target;
  ScenePolicy policy;
  std::vector<std::array<double, 2>> test_positions_mm;
  uint64_t seed = 0;
  std::string nominal_id;        // robustness experiments point at their nominal run
};

struct PositionResult {
  double x_mm, y_mm, pred_x_mm, pred_y_mm, err_mm;
};

struct ExperimentReport {
  std::string id;
  std::string checkpoint_tag;
  std::vector<PositionResult> results;
  double mean_mm = 0.0, max_mm = 0.0, p95_mm = 0.0;
  double mean_ax_mm = 0.0, mean_ay_mm = 0.0;  // per-axis mean absolute errors
  uint64_t seed = 0;
  uint64_t vae2_hash = 0, cnn_hash = 0;  // provenance

  void finalize() {
    if (results.empty()) return;
    std::vector<double> errs;
    errs.reserve(results.size());
    double ax = 0, ay = 0;
    for (const auto& r : results) {
      errs.push_back(r.err_mm);
      mean_mm += r.err_mm / double(results.size());
      max_mm = std::max(max_mm, r.err_mm);
      ax += std::abs(r.pred_x_mm - r.x_mm) / double(results.size());
      ay += std::abs(r.pred_y_mm - r.y_mm) / double(results.size());
    }
    mean_ax_mm = ax;
    mean_ay_mm = ay;
    std::sort(errs.begin(), errs.end());
    const size_t rank = static_cast<size_t>(std::ceil(0.95 * double(errs.size())));
    p95_mm = errs[std::min(errs.size() - 1, rank == 0 ? 0 : rank - 1)];
  }
};

/// Held-out evaluation lattice: a coarse grid offset by half the small
/// spacing, so no test position coincides with any training position of
/// either grid.
inline std::vector<std::array<double, 2>> held_out_grid(double region_w_mm, double region_h_mm,
                                                        double small_spacing_mm,
                                                        double coarse_spacing_mm = 25.0) {
  const double off = 0.5 * small_spacing_mm;
  std::vector<std::array<double, 2>> out;
  for (double y = off; y <= region_h_mm; y += coarse_spacing_mm)
    for (double x = off; x <= region_w_mm; x += coarse_spacing_mm)
      out.push_back({x, y});
  return out;
}

/// Renders each test position under the experiment's scene policy and runs
/// the inference path. Missing checkpoints must be caught by the caller; this
/// function takes the resolved ones.
inline ExperimentReport run_experiment(const ExperimentSpec& spec,
                                       const io::Checkpoint* vae2, const io::Checkpoint* cnn,
                                       const pipeline::TrainConfig& cfg) {
  if (cnn == nullptr)
    throw std::invalid_argument("experiment " + spec.id + ": missing regressor checkpoint");
  if (!spec.baseline && vae2 == nullptr)
    throw std::invalid_argument("experiment " + spec.id + ": missing vae2 checkpoint");

  ExperimentReport rep;
  rep.id = spec.id;
  rep.checkpoint_tag = spec.checkpoint_tag;
  rep.seed = spec.seed;
  rep.cnn_hash = io::checkpoint_hash(*cnn);
  if (vae2) rep.vae2_hash = io::checkpoint_hash(*vae2);

  std::optional<pipeline::InferenceEngine> engine;
  if (spec.baseline)
    engine.emplace(*cnn, cfg);
  else
    engine.emplace(*vae2, *cnn, cfg);

  nd::Rng base(spec.seed);
  for (size_t i = 0; i < spec.test_positions_mm.size(); ++i) {
    const auto pos = spec.test_positions_mm[i];
    nd::Rng rng = base.fork(i);

    scene::SceneSpec sc;
    sc.region_mm = {cfg.region_w_mm, cfg.region_h_mm};
    sc.target = scene::Placed{spec.target, pos[0], pos[1]};
    sc.background = spec.policy.background;
    sc.lighting = spec.policy.lighting;
    sc.domain = spec.policy.domain;
    sc.domain.seed = rng.next_u64();
    scene::GridSpec region{cfg.region_w_mm, cfg.region_h_mm, 1.0};
    for (const auto& dob : spec.policy.distractors)
      sc.distractors.push_back(scene::detail::place_random(dob, region, *sc.target,
                                                           sc.distractors, rng));

    scene::ImageRGBD img = scene::render(sc, cfg.resolution, cfg.resolution);
    const auto pred = engine->predict_mm(img);
    const double err = std::hypot(pred[0] - pos[0], pred[1] - pos[1]);
    rep.results.push_back({pos[0], pos[1], pred[0], pred[1], err});
  }
  rep.finalize();

  // unit sanity: any error beyond the region diagonal indicates a unit bug
  const double diag = std::hypot(cfg.region_w_mm, cfg.region_h_mm);
  for (const auto& r : rep.results)
    if (r.err_mm > diag)
      throw std::logic_error("experiment " + spec.id + ": error " + std::to_string(r.err_mm) +
                             " mm exceeds the placement-region diagonal");
  return rep;
}

struct SelectivityResult {
  double mse_to_target_only = 0.0;
  double mse_to_cluttered_canonical = 0.0;
  bool holds() const { return mse_to_target_only < mse_to_cluttered_canonical; }
};

/// VAE2 is selective when its output for a cluttered scene is closer to the
/// canonical render of the target alone than to a canonical render that
/// includes the distractors.
inline SelectivityResult selectivity_check(const io::Checkpoint& vae2,
                                           const scene::ImageRGBD& cluttered,
                                           const scene::ImageRGBD& target_only_canonical,
                                           const scene::ImageRGBD& cluttered_canonical,
                                           const pipeline::TrainConfig& cfg) {
  models::VaeNet net = models::VaeNet::from_checkpoint(vae2, cfg.vae_config());
  scene::ImageRGBD out =
      models::images_from_batch(net.reconstruct(models::single_image_batch(cluttered)))[0];
  SelectivityResult r;
  r.mse_to_target_only = image_mse(out, target_only_canonical);
  r.mse_to_cluttered_canonical = image_mse(out, cluttered_canonical);
  return r;
}

// ---- report emission ----

inline std::string format_mm(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

/// Writes one CSV per report plus a summary CSV. Returns the file list.
inline std::vector<std::filesystem::path> emit_report(
    const std::vector<ExperimentReport>& reports, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> written;

  for (const auto& rep : reports) {
    std::string csv = "experiment_id,x_mm,y_mm,pred_x_mm,pred_y_mm,err_mm\n";
    for (const auto& r : rep.results)
      csv += rep.id + "," + format_mm(r.x_mm) + "," + format_mm(r.y_mm) + "," +
             format_mm(r.pred_x_mm) + "," + format_mm(r.pred_y_mm) + "," + format_mm(r.err_mm) +
             "\n";
    const fs::path p = out_dir / ("experiment_" + rep.id + ".csv");
    io::write_file_atomic(p, std::vector<uint8_t>(csv.begin(), csv.end()));
    written.push_back(p);
  }

  std::string summary = "experiment_id,mean_mm,max_mm,p95_mm,n\n";
  for (const auto& rep : reports)
    summary += rep.id + "," + format_mm(rep.mean_mm) + "," + format_mm(rep.max_mm) + "," +
               format_mm(rep.p95_mm) + "," + std::to_string(rep.results.size()) + "\n";
  const fs::path sp = out_dir / "summary.csv";
  io::write_file_atomic(sp, std::vector<uint8_t>(summary.begin(), summary.end()));
  written.push_back(sp);
  return written;
}

// ---- the built-in experiment matrix ----

/// Names the checkpoint files of one trained pipeline inside a directory.
struct CheckpointSet {
  std::string tag;
  std::filesystem::path vae1, vae2, cnn, baseline;
  static CheckpointSet in_dir(const std::filesystem::path& dir, const std::string& tag) {
    return {tag, dir / (tag + "_vae1.s2pc"), dir / (tag + "_vae2.s2pc"),
            dir / (tag + "_cnn.s2pc"), dir / (tag + "_baseline.s2pc")};
  }
};

inline const scene::ObjectSpec& obj(const std::string& name) {
  const auto* o = scene::find_object(name);
  if (!o) throw std::invalid_argument("unknown object '" + name + "'");
  return *o;
}

/// Experiments (a)-(g): plain printed objects. (a) baseline red cube;
/// (b)-(e) the method on four shapes; (f) unseen lighting; (g) distractors.
inline std::vector<ExperimentSpec> simple_matrix(const pipeline::TrainConfig& cfg,
                                                 uint64_t seed) {
  const auto grid = held_out_grid(cfg.region_w_mm, cfg.region_h_mm, cfg.grid_small_mm);
  std::vector<ExperimentSpec> out;

  auto make = [&](const std::string& id, const std::string& tag, const scene::ObjectSpec& target,
                  bool baseline) {
    ExperimentSpec s;
    s.id = id;
    s.checkpoint_tag = tag;
    s.baseline = baseline;
    s.target = target;
    s.test_positions_mm = grid;
    s.seed = seed + static_cast<uint64_t>(id[0]);
    return s;
  };

  auto a = make("a", "red-cube", obj("red-cube"), true);
  a.description = "baseline: CNN trained directly on the 54 real red-cube images";
  out.push_back(a);

  auto b = make("b", "red-cube", obj("red-cube"), false);
  b.description = "method: red cube";
  out.push_back(b);

  auto c = make("c", "green-cube", obj("green-cube"), false);
  c.description = "method: green cube";
  out.push_back(c);

  auto d = make("d", "black-cylinder", obj("black-cylinder"), false);
  d.description = "method: black cylinder";
  out.push_back(d);

  auto e = make("e", "blue-prism", obj("blue-prism"), false);
  e.description = "method: blue triangular prism";
  out.push_back(e);

  auto f = make("f", "green-cube", obj("green-cube"), false);
  f.description = "method: green cube under table-light-only illumination, no retraining";
  f.policy.lighting = scene::table_light_lighting();
  f.nominal_id = "c";
  out.push_back(f);

  auto g = make("g", "green-cube", obj("green-cube"), false);
  g.description = "method: green cube among red cube, black cylinder and blue prism";
  g.policy.distractors = {obj("red-cube-small"), obj("black-cylinder"), obj("blue-prism")};
  g.nominal_id = "c";
  out.push_back(g);

  return out;
}

/// Experiments (h)-(n): textured target mapped to its simplified proxy.
/// (h) baseline; (i) method on white; (j)-(k) unseen backgrounds; (l)-(m)
/// unseen distractor combinations; (n) single object.
inline std::vector<ExperimentSpec> textured_matrix(const pipeline::TrainConfig& cfg,
                                                   uint64_t seed) {
  const auto grid = held_out_grid(cfg.region_w_mm, cfg.region_h_mm, cfg.grid_small_mm);
  std::vector<ExperimentSpec> out;

  auto make = [&](const std::string& id, bool baseline,
                  std::vector<scene::ObjectSpec> distractors, scene::Background bg) {
    ExperimentSpec s;
    s.id = id;
    s.checkpoint_tag = "textured";
    s.baseline = baseline;
    s.target = obj("tex-orange-cylinder");
    s.policy.distractors = std::move(distractors);
    s.policy.background = std::move(bg);
    s.test_positions_mm = grid;
    s.seed = seed + static_cast<uint64_t>(id[0]) * 131;
    return s;
  };
  const auto white = scene::Background::white();
  const auto black = scene::Background::black();
  const auto checkered = scene::Background::checkered();
  const std::vector<scene::ObjectSpec> seen{obj("tex-blue-cube"), obj("tex-green-cylinder")};
  const std::vector<scene::ObjectSpec> unseen{obj("tex-purple-prism"), obj("tex-yellow-cube")};

  auto h = make("h", true, seen, white);
  h.description = "baseline: CNN trained directly on the 54 real three-object scenes";
  out.push_back(h);

  auto i = make("i", false, seen, white);
  i.description = "method: textured target with seen distractors on white";
  out.push_back(i);

  auto j = make("j", false, seen, black);
  j.description = "method: seen distractors, unseen black background";
  j.nominal_id = "i";
  out.push_back(j);

  auto k = make("k", false, seen, checkered);
  k.description = "method: seen distractors, unseen checkered background";
  k.nominal_id = "i";
  out.push_back(k);

  auto l = make("l", false, unseen, black);
  l.description = "method: unseen distractors, black background";
  l.nominal_id = "i";
  out.push_back(l);

  auto m = make("m", false, unseen, checkered);
  m.description = "method: unseen distractors, checkered background";
  m.nominal_id = "i";
  out.push_back(m);

  auto n = make("n", false, {}, checkered);
  n.description = "method: single target on the unseen checkered background";
  n.nominal_id = "i";
  out.push_back(n);

  return out;
}

/// Robustness gates over a finished set of reports. Returns human-readable
/// failures; empty means all gates pass.
inline std::vector<std::string> evaluate_gates(const std::vector<ExperimentReport>& reports,
                                               const pipeline::TrainConfig& cfg) {
  std::map<std::string, const ExperimentReport*> by_id;
  for (const auto& r : reports) by_id[r.id] = &r;
  std::vector<std::string> failures;

  auto fail = [&](const std::string& msg) { failures.push_back(msg); };

  if (by_id.count("a") && by_id.count("b")) {
    const double a = by_id["a"]->mean_mm, b = by_id["b"]->mean_mm;
    if (!(b <= 0.5 * a))
      fail("method-vs-baseline: mean(b)=" + format_mm(b) + " > 0.5*mean(a)=" + format_mm(0.5 * a));
    if (!(b <= 0.02 * cfg.region_w_mm))
      fail("absolute accuracy: mean(b)=" + format_mm(b) + " > 2% of region width");
  }
  // monotone degradation bound for (f) and (j)-(n)
  for (const char* id : {"f", "j", "k", "l", "m", "n"}) {
    if (!by_id.count(id)) continue;
    const auto* rep = by_id[id];
    const auto& nominal_id = [&]() -> std::string {
      for (const auto& r : reports)
        if (r.id == id) return r.id == "f" ? std::string("c") : std::string("i");
      return "";
    }();
    if (!by_id.count(nominal_id)) continue;
    const double nominal = by_id[nominal_id]->mean_mm;
    if (!(rep->mean_mm <= 2.0 * nominal))
      fail(std::string("degradation bound: mean(") + id + ")=" + format_mm(rep->mean_mm) +
           " > 2*mean(" + nominal_id + ")=" + format_mm(2.0 * nominal));
  }
  return failures;
}

}  // namespace s2pd::eval
